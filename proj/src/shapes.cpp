// Parametric letter templates used as a synthetic stand-in for glyph outlines.

#include <algorithm>
#include <cmath>

#include "polymp/dataset.hpp"
#include "polymp/error.hpp"

namespace polymp::dataset {

namespace {

using geometry::LinearRing;
using geometry::Point2;
using geometry::Polygon;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::vector<Point2> jitter_ring(const std::vector<Point2>& pts, double fraction, Rng& rng) {
  if (fraction <= 0.0) return pts;
  const std::size_t n = pts.size();
  std::vector<Point2> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& prev = pts[(i + n - 1) % n];
    const Point2& next = pts[(i + 1) % n];
    const double reach =
        fraction * std::min(std::hypot(pts[i].x - prev.x, pts[i].y - prev.y),
                            std::hypot(next.x - pts[i].x, next.y - pts[i].y));
    out[i] = {pts[i].x + reach * uniform(rng, -1.0, 1.0), pts[i].y + reach * uniform(rng, -1.0, 1.0)};
  }
  return out;
}

struct Frame {
  double w;   // letter width
  double h;   // letter height
  double t;   // stroke width
};

std::vector<Point2> letter_outline(char letter, const Frame& f, bool serif, Rng& rng) {
  const double w = f.w, h = f.h, t = f.t;
  const double cx = 0.5 * w;
  const double ym = h * uniform(rng, 0.45, 0.55);
  switch (letter) {
    case 'E': {
      const double wm = w * uniform(rng, 0.6, 0.9);
      return {{0, 0}, {w, 0}, {w, t}, {t, t}, {t, ym - t / 2}, {wm, ym - t / 2}, {wm, ym + t / 2},
              {t, ym + t / 2}, {t, h - t}, {w, h - t}, {w, h}, {0, h}};
    }
    case 'F': {
      const double wm = w * uniform(rng, 0.6, 0.9);
      return {{0, 0}, {t, 0}, {t, ym - t / 2}, {wm, ym - t / 2}, {wm, ym + t / 2}, {t, ym + t / 2},
              {t, h - t}, {w, h - t}, {w, h}, {0, h}};
    }
    case 'H':
      return {{0, 0}, {t, 0}, {t, ym - t / 2}, {w - t, ym - t / 2}, {w - t, 0}, {w, 0},
              {w, h}, {w - t, h}, {w - t, ym + t / 2}, {t, ym + t / 2}, {t, h}, {0, h}};
    case 'I': {
      const double s = t + uniform(rng, 0.0, 4.0);
      if (!serif) return {{-s / 2, 0}, {s / 2, 0}, {s / 2, h}, {-s / 2, h}};
      const double sw = s + uniform(rng, 8.0, 16.0);
      const double sh = uniform(rng, 4.0, 7.0);
      return {{-sw / 2, 0}, {sw / 2, 0}, {sw / 2, sh}, {s / 2, sh}, {s / 2, h - sh},
              {sw / 2, h - sh}, {sw / 2, h}, {-sw / 2, h}, {-sw / 2, h - sh}, {-s / 2, h - sh},
              {-s / 2, sh}, {-sw / 2, sh}};
    }
    case 'L':
      return {{0, 0}, {w, 0}, {w, t}, {t, t}, {t, h}, {0, h}};
    case 'T': {
      std::vector<Point2> foot;
      if (serif) {
        const double fw = uniform(rng, 3.0, 6.0);
        const double fh = uniform(rng, 3.0, 6.0);
        foot = {{cx - t / 2 - fw, 0}, {cx + t / 2 + fw, 0}, {cx + t / 2 + fw, fh}, {cx + t / 2, fh}};
      } else {
        foot = {{cx - t / 2, 0}, {cx + t / 2, 0}};
      }
      std::vector<Point2> pts = foot;
      const std::vector<Point2> top = {{cx + t / 2, h - t}, {w, h - t}, {w, h}, {0, h}, {0, h - t},
                                       {cx - t / 2, h - t}};
      pts.insert(pts.end(), top.begin(), top.end());
      if (serif) {
        pts.push_back({cx - t / 2, foot[2].y});
        pts.push_back({foot[0].x, foot[2].y});
      }
      return pts;
    }
    case 'U':
      return {{0, 0}, {w, 0}, {w, h}, {w - t, h}, {w - t, t}, {t, t}, {t, h}, {0, h}};
    case 'Y': {
      const double stem = h * uniform(rng, 0.4, 0.5);
      const double arm = 1.3 * t;
      const double notch = stem + 1.3 * t;
      return {{cx - t / 2, 0}, {cx + t / 2, 0}, {cx + t / 2, stem}, {w, h}, {w - arm, h},
              {cx, notch}, {arm, h}, {0, h}, {cx - t / 2, stem}};
    }
    case 'Z': {
      const double d = 1.4 * t;
      return {{0, 0}, {w, 0}, {w, t}, {d, t}, {w, h - t}, {w, h}, {0, h}, {0, h - t}, {w - d, h - t},
              {0, t}};
    }
    default:
      break;
  }
  fail(ErrorCode::InvalidArgument, std::string("no template for letter ") + letter);
}

}  // namespace

const std::vector<std::string>& default_class_names() {
  static const std::vector<std::string> names = {"E", "F", "H", "I", "L", "O", "T", "U", "Y", "Z"};
  return names;
}

ShapeClass shape_class(std::string_view name) {
  const auto& names = default_class_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    fail(ErrorCode::InvalidArgument, "unknown shape class '" + std::string(name) + "'");
  }
  return ShapeClass{std::string(name), name == "O"};
}

Polygon generate_class_instance(const ShapeClass& cls, Rng& rng, const GeneratorOptions& opts) {
  const Frame frame{uniform(rng, 32.0, 45.0), uniform(rng, 40.0, 50.0), uniform(rng, 6.0, 11.0)};
  const char letter = cls.name.at(0);
  if (letter == 'O') {
    const double w = frame.w, h = frame.h, t = frame.t;
    std::vector<Point2> outer = {{0, 0}, {w, 0}, {w, h}, {0, h}};
    std::vector<Point2> inner = {{t, t}, {w - t, t}, {w - t, h - t}, {t, h - t}};
    return Polygon{LinearRing(jitter_ring(outer, opts.jitter, rng)),
                   {LinearRing(jitter_ring(inner, opts.jitter, rng))}};
  }
  const bool serif_capable = letter == 'I' || letter == 'T';
  const bool serif = serif_capable && uniform(rng, 0.0, 1.0) < opts.serif_probability;
  const std::vector<Point2> outline = letter_outline(letter, frame, serif, rng);
  return Polygon{LinearRing(jitter_ring(outline, opts.jitter, rng)), {}};
}

namespace {

template <typename CountFn>
Polygon densify_with(const Polygon& poly, Rng& rng, CountFn&& count) {
  auto densify_ring = [&](const LinearRing& ring) {
    std::vector<Point2> out;
    for (std::size_t i = 0; i < ring.size(); ++i) {
      const Point2& a = ring[i];
      const Point2& b = ring[(i + 1) % ring.size()];
      out.push_back(a);
      const std::size_t k = count();
      if (k == 0) continue;
      const double len = std::hypot(b.x - a.x, b.y - a.y);
      const double slot = 1.0 / static_cast<double>(k + 1);
      for (std::size_t j = 1; j <= k; ++j) {
        // Slides along the edge by at most 0.1 units (and a quarter slot), so
        // the vertex stays on the segment.
        const double shift = std::min(0.1 / len, 0.25 * slot);
        const double s = static_cast<double>(j) * slot + uniform(rng, -shift, shift);
        out.push_back({a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)});
      }
    }
    return LinearRing(std::move(out));
  };
  Polygon result{densify_ring(poly.exterior), {}};
  for (const LinearRing& h : poly.holes) result.holes.push_back(densify_ring(h));
  return result;
}

}  // namespace

Polygon densify(const Polygon& poly, std::size_t points_per_edge, Rng& rng) {
  if (points_per_edge == 0) return poly;
  return densify_with(poly, rng, [&] { return points_per_edge; });
}

Polygon densify_varied(const Polygon& poly, std::size_t max_per_edge, Rng& rng) {
  // A per-polygon level first, so some polygons carry no trivial vertices at
  // all and others carry many.
  const std::size_t level = std::uniform_int_distribution<std::size_t>(0, max_per_edge)(rng);
  if (level == 0) return poly;
  std::uniform_int_distribution<std::size_t> pick(0, level);
  return densify_with(poly, rng, [&] { return pick(rng); });
}

}  // namespace polymp::dataset
