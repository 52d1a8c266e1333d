#include <cctype>
#include <charconv>
#include <string>
#include <system_error>

#include <json.hpp>

#include "polymp/error.hpp"
#include "polymp/geometry.hpp"

namespace polymp::geometry {

namespace {

class WktReader {
 public:
  explicit WktReader(std::string_view text) : text_(text) {}

  Polygon read() {
    skip_ws();
    expect_keyword("POLYGON");
    skip_ws();
    if (peek_keyword("EMPTY")) error("empty polygons are not supported");
    expect('(');
    std::vector<LinearRing> rings;
    rings.push_back(read_ring());
    skip_ws();
    while (peek() == ',') {
      ++pos_;
      rings.push_back(read_ring());
      skip_ws();
    }
    expect(')');
    skip_ws();
    if (pos_ != text_.size()) error("trailing characters");
    LinearRing exterior = std::move(rings.front());
    rings.erase(rings.begin());
    return Polygon{std::move(exterior), std::move(rings)};
  }

 private:
  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorCode::ParseError, "WKT parse error at offset " + std::to_string(pos_) + ": " + what);
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool peek_keyword(std::string_view kw) const {
    if (text_.size() - pos_ < kw.size()) return false;
    for (std::size_t i = 0; i < kw.size(); ++i) {
      if (std::toupper(static_cast<unsigned char>(text_[pos_ + i])) != kw[i]) return false;
    }
    return true;
  }

  void expect_keyword(std::string_view kw) {
    if (!peek_keyword(kw)) error("expected " + std::string(kw));
    pos_ += kw.size();
  }

  void expect(char c) {
    skip_ws();
    if (peek() != c) error(std::string("expected '") + c + "'");
    ++pos_;
  }

  double read_number() {
    skip_ws();
    const char* first = text_.data() + pos_;
    const char* last = text_.data() + text_.size();
    if (first != last && *first == '+') ++first;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc()) error("expected number");
    pos_ = static_cast<std::size_t>(ptr - text_.data());
    return value;
  }

  LinearRing read_ring() {
    expect('(');
    std::vector<Point2> pts;
    while (true) {
      const double x = read_number();
      const double y = read_number();
      pts.push_back({x, y});
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      break;
    }
    expect(')');
    if (pts.size() > 1 && pts.front() == pts.back()) pts.pop_back();
    return LinearRing(std::move(pts));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

void append_number(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

void append_ring(std::string& out, const LinearRing& ring) {
  out += '(';
  for (std::size_t i = 0; i <= ring.size(); ++i) {
    const Point2& p = ring[i % ring.size()];
    if (i > 0) out += ", ";
    append_number(out, p.x);
    out += ' ';
    append_number(out, p.y);
  }
  out += ')';
}

LinearRing ring_from_json(const nlohmann::json& coords) {
  if (!coords.is_array()) fail(ErrorCode::ParseError, "ring coordinates must be an array");
  std::vector<Point2> pts;
  for (const auto& c : coords) {
    if (!c.is_array() || c.size() < 2 || !c[0].is_number() || !c[1].is_number()) {
      fail(ErrorCode::ParseError, "coordinate must be [x, y]");
    }
    pts.push_back({c[0].get<double>(), c[1].get<double>()});
  }
  if (pts.size() > 1 && pts.front() == pts.back()) pts.pop_back();
  return LinearRing(std::move(pts));
}

nlohmann::json ring_to_json(const LinearRing& ring) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i <= ring.size(); ++i) {
    const Point2& p = ring[i % ring.size()];
    out.push_back({p.x, p.y});
  }
  return out;
}

}  // namespace

Polygon parse_wkt(std::string_view text) { return WktReader(text).read(); }

std::string to_wkt(const Polygon& poly) {
  std::string out = "POLYGON (";
  append_ring(out, poly.exterior);
  for (const LinearRing& h : poly.holes) {
    out += ", ";
    append_ring(out, h);
  }
  out += ')';
  return out;
}

std::vector<LabeledPolygon> parse_geojson_features(std::string_view text,
                                                   std::string_view label_key) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::ParseError, std::string("GeoJSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" ||
      !doc.contains("features") || !doc["features"].is_array()) {
    fail(ErrorCode::ParseError, "GeoJSON: expected a FeatureCollection with a features array");
  }
  const std::string key(label_key);
  std::vector<LabeledPolygon> out;
  std::size_t index = 0;
  for (const auto& feature : doc["features"]) {
    const std::string where = "feature " + std::to_string(index++);
    if (!feature.is_object() || !feature.contains("geometry") || !feature["geometry"].is_object()) {
      fail(ErrorCode::ParseError, "GeoJSON: " + where + " has no geometry object");
    }
    const auto& geom = feature["geometry"];
    const std::string type = geom.value("type", "");
    if (type != "Polygon") {
      fail(ErrorCode::UnsupportedGeometry, "GeoJSON: " + where + " has geometry type '" + type + "'");
    }
    if (!geom.contains("coordinates") || !geom["coordinates"].is_array() ||
        geom["coordinates"].empty()) {
      fail(ErrorCode::ParseError, "GeoJSON: " + where + " has no coordinates");
    }
    const auto props = feature.value("properties", nlohmann::json::object());
    if (!props.is_object() || !props.contains(key) || props[key].is_null()) {
      fail(ErrorCode::MissingLabel, "GeoJSON: " + where + " lacks property '" + key + "'");
    }
    std::string label;
    if (props[key].is_string()) {
      label = props[key].get<std::string>();
    } else if (props[key].is_number()) {
      label = props[key].dump();
    } else {
      fail(ErrorCode::MissingLabel, "GeoJSON: " + where + " label is neither string nor number");
    }
    const auto& coords = geom["coordinates"];
    LinearRing exterior = ring_from_json(coords[0]);
    std::vector<LinearRing> holes;
    for (std::size_t r = 1; r < coords.size(); ++r) holes.push_back(ring_from_json(coords[r]));
    out.push_back({Polygon{std::move(exterior), std::move(holes)}, std::move(label)});
  }
  return out;
}

std::string to_geojson(std::span<const LabeledPolygon> features, std::string_view label_key) {
  nlohmann::json doc = {{"type", "FeatureCollection"}, {"features", nlohmann::json::array()}};
  for (const LabeledPolygon& f : features) {
    nlohmann::json coords = nlohmann::json::array();
    coords.push_back(ring_to_json(f.polygon.exterior));
    for (const LinearRing& h : f.polygon.holes) coords.push_back(ring_to_json(h));
    doc["features"].push_back({{"type", "Feature"},
                               {"properties", {{std::string(label_key), f.label}}},
                               {"geometry", {{"type", "Polygon"}, {"coordinates", coords}}}});
  }
  return doc.dump();
}

}  // namespace polymp::geometry
