#include "polymp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "polymp/error.hpp"

namespace polymp::dataset {

namespace {

using geometry::TransformKind;

// Independent random streams for the different uses of a sample id.
enum Stream : std::uint64_t {
  kStreamShape = 1,
  kStreamTest = 2,
  kStreamRatioPick = 3,
  kStreamRatioTransform = 4,
  kStreamSplit = 5,
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr double kRatios[] = {0.0, 0.2, 0.4, 0.6, 0.8};

std::vector<std::vector<std::size_t>> indices_by_class(const Dataset& data) {
  std::vector<std::vector<std::size_t>> by_class(data.class_names.size());
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const int label = data.samples[i].label;
    if (label < 0 || static_cast<std::size_t>(label) >= by_class.size()) {
      fail(ErrorCode::LabelOutOfRange, "sample label " + std::to_string(label) + " out of range");
    }
    by_class[static_cast<std::size_t>(label)].push_back(i);
  }
  return by_class;
}

bool graphs_match(const graph::PolyGraph& a, const graph::PolyGraph& b) {
  if (a.label != b.label || a.edges != b.edges || a.nodes.size() != b.nodes.size()) return false;
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    if (std::abs(a.nodes[i] - b.nodes[i]) > 1e-9) return false;
  }
  return true;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IOErr, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IOErr, "cannot write " + path.string());
  out << content;
  if (!out) fail(ErrorCode::IOErr, "write failed for " + path.string());
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t id) {
  return splitmix64(splitmix64(splitmix64(master) ^ stream) ^ id);
}

TransformParams draw_transform(TransformKind kind, Rng& rng) {
  auto u = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  TransformParams t;
  t.kind = kind;
  switch (kind) {
    case TransformKind::Original:
      break;
    case TransformKind::Rotated:
      t.a = u(-75.0, 75.0);
      break;
    case TransformKind::Scaled:
      t.a = u(0.1, 2.0);
      t.b = u(0.1, 2.0);
      break;
    case TransformKind::Sheared:
      t.a = u(-45.0, 45.0);
      t.b = u(-45.0, 45.0);
      break;
  }
  return t;
}

geometry::Polygon apply_transform(const geometry::Polygon& poly, const TransformParams& t) {
  switch (t.kind) {
    case TransformKind::Original: return poly;
    case TransformKind::Rotated: return geometry::rotate(poly, t.a);
    case TransformKind::Scaled: return geometry::scale(poly, t.a, t.b);
    case TransformKind::Sheared: return geometry::shear(poly, t.a, t.b);
  }
  return poly;
}

geometry::Polygon apply_random_transform(const geometry::Polygon& poly, Rng& rng, TransformKind which,
                                         TransformParams* drawn) {
  if (which == TransformKind::Original) {
    fail(ErrorCode::InvalidArgument, "apply_random_transform needs R, SC or SH");
  }
  const TransformParams t = draw_transform(which, rng);
  if (drawn != nullptr) *drawn = t;
  return geometry::normalize(apply_transform(poly, t));
}

Sample make_sample(std::uint64_t id, int label, geometry::Polygon raw, TransformParams transform,
                   bool simplified) {
  geometry::Polygon polygon = geometry::normalize(apply_transform(raw, transform));
  graph::PolyGraph g = graph::encode_graph(polygon, label);
  return Sample{id, label, transform, simplified, std::move(raw), std::move(polygon), std::move(g)};
}

Dataset generate_base(const GenerationOptions& opts) {
  if (opts.per_class == 0 || opts.classes.empty()) fail(ErrorCode::EmptyDataset, "nothing to generate");
  Dataset data;
  data.class_names = opts.classes;
  for (std::size_t c = 0; c < opts.classes.size(); ++c) {
    const ShapeClass cls = shape_class(opts.classes[c]);
    for (std::size_t k = 0; k < opts.per_class; ++k) {
      const std::uint64_t id = opts.id_offset + c * opts.per_class + k;
      Rng rng(derive_seed(opts.seed, kStreamShape, id));
      geometry::Polygon raw = densify_varied(generate_class_instance(cls, rng, opts.shape), opts.points_per_edge, rng);
      data.samples.push_back(make_sample(id, static_cast<int>(c), std::move(raw), {}));
    }
  }
  return data;
}

Dataset generate_test(const GenerationOptions& opts) {
  if (opts.per_class == 0 || opts.classes.empty()) fail(ErrorCode::EmptyDataset, "nothing to generate");
  static constexpr TransformKind kCycle[] = {TransformKind::Original, TransformKind::Rotated,
                                             TransformKind::Scaled, TransformKind::Sheared};
  Dataset data;
  data.class_names = opts.classes;
  for (std::size_t c = 0; c < opts.classes.size(); ++c) {
    const ShapeClass cls = shape_class(opts.classes[c]);
    for (std::size_t k = 0; k < opts.per_class; ++k) {
      const std::uint64_t id = opts.id_offset + c * opts.per_class + k;
      Rng rng(derive_seed(opts.seed, kStreamTest, id));
      geometry::Polygon raw = densify_varied(generate_class_instance(cls, rng, opts.shape), opts.points_per_edge, rng);
      const TransformParams t = draw_transform(kCycle[k % 4], rng);
      data.samples.push_back(make_sample(id, static_cast<int>(c), std::move(raw), t));
    }
  }
  return data;
}

bool valid_ratio(double ratio) {
  return std::any_of(std::begin(kRatios), std::end(kRatios),
                     [ratio](double r) { return std::abs(r - ratio) < 1e-9; });
}

int ratio_percent(double ratio) { return static_cast<int>(std::lround(ratio * 100.0)); }

Dataset build_ratio_split(const Dataset& base, double ratio, std::uint64_t seed) {
  if (!valid_ratio(ratio)) {
    fail(ErrorCode::InvalidRatio, "ratio must be one of 0, 0.2, 0.4, 0.6, 0.8");
  }
  const auto by_class = indices_by_class(base);
  const std::size_t total = base.samples.size();
  const auto target = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(total)));

  // Largest-remainder apportionment keeps every class within one of ratio * n_c.
  std::vector<std::size_t> quota(by_class.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    const double exact = ratio * static_cast<double>(by_class[c].size());
    quota[c] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    assigned += quota[c];
    remainders.emplace_back(exact - static_cast<double>(quota[c]), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < target && r < remainders.size(); ++r, ++assigned) {
    ++quota[remainders[r].second];
  }

  Dataset out = base;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    // Same order for every ratio, so higher ratios extend lower ones.
    std::vector<std::size_t> order = by_class[c];
    Rng pick(derive_seed(seed, kStreamRatioPick, c));
    std::shuffle(order.begin(), order.end(), pick);
    for (std::size_t q = 0; q < quota[c]; ++q) {
      const Sample& src = base.samples[order[q]];
      Rng rng(derive_seed(seed, kStreamRatioTransform, src.id));
      const auto kind = static_cast<TransformKind>(1 + std::uniform_int_distribution<int>(0, 2)(rng));
      out.samples[order[q]] = make_sample(src.id, src.label, src.raw, draw_transform(kind, rng));
    }
  }
  return out;
}

SimplifiedView build_simplified_view(const Dataset& dataset, double tolerance) {
  SimplifiedView view;
  view.dataset.class_names = dataset.class_names;
  for (const Sample& s : dataset.samples) {
    try {
      view.dataset.samples.push_back(
          make_sample(s.id, s.label, geometry::simplify_dp(s.raw, tolerance), s.transform, true));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ExteriorCollapsed) throw;
      ++view.dropped;
    }
  }
  return view;
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& data, double fraction, std::uint64_t seed) {
  const auto by_class = indices_by_class(data);
  std::vector<char> second(data.samples.size(), 0);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    std::vector<std::size_t> order = by_class[c];
    Rng rng(derive_seed(seed, kStreamSplit, c));
    std::shuffle(order.begin(), order.end(), rng);
    const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(order.size())));
    for (std::size_t i = 0; i < take; ++i) second[order[i]] = 1;
  }
  std::pair<Dataset, Dataset> out;
  out.first.class_names = out.second.class_names = data.class_names;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    (second[i] ? out.second : out.first).samples.push_back(data.samples[i]);
  }
  return out;
}

Counts count_samples(const Dataset& data) {
  Counts counts;
  for (const std::string& name : data.class_names) {
    for (auto kind : {TransformKind::Original, TransformKind::Rotated, TransformKind::Scaled,
                      TransformKind::Sheared}) {
      counts[name][std::string(geometry::transform_code(kind))] = 0;
    }
  }
  for (const Sample& s : data.samples) {
    ++counts[data.class_names.at(static_cast<std::size_t>(s.label))]
            [std::string(geometry::transform_code(s.tag()))];
  }
  return counts;
}

nlohmann::json sample_to_json(const Sample& s) {
  nlohmann::json j = graph::to_json(s.graph);
  j["id"] = s.id;
  j["tag"] = geometry::transform_code(s.tag());
  j["transform"] = {s.transform.a, s.transform.b};
  j["simplified"] = s.simplified;
  j["raw"] = geometry::to_wkt(s.raw);
  return j;
}

Sample sample_from_json(const nlohmann::json& j) {
  try {
    const graph::PolyGraph stored = graph::graph_from_json(j);
    TransformParams t;
    t.kind = geometry::transform_from_code(j.at("tag").get<std::string>());
    t.a = j.at("transform").at(0).get<double>();
    t.b = j.at("transform").at(1).get<double>();
    Sample s = make_sample(j.at("id").get<std::uint64_t>(), stored.label,
                           geometry::parse_wkt(j.at("raw").get<std::string>()), t,
                           j.at("simplified").get<bool>());
    graph::validate(stored);
    if (!graphs_match(s.graph, stored)) {
      fail(ErrorCode::CorruptRecord, "stored graph does not match its raw geometry");
    }
    s.graph = stored;
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::CorruptRecord, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptRecord) throw;
    fail(ErrorCode::CorruptRecord, std::string(to_string(e.code())) + ": " + e.what());
  }
}

nlohmann::json read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::CorruptRecord, "manifest.json: " + std::string(e.what()));
  }
}

void save_split(const std::filesystem::path& dir, const std::string& split, const Dataset& data,
                std::uint64_t seed) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::IOErr, "cannot create " + dir.string() + ": " + ec.message());

  std::string body;
  for (const Sample& s : data.samples) {
    body += sample_to_json(s).dump();
    body += '\n';
  }
  const std::string file = split + ".jsonl";
  write_file(dir / file, body);

  nlohmann::json manifest;
  if (std::filesystem::exists(dir / "manifest.json")) manifest = read_manifest(dir);
  if (manifest.contains("classes") && manifest["classes"] != nlohmann::json(data.class_names)) {
    fail(ErrorCode::CorruptRecord, "class names differ from the existing manifest");
  }
  manifest["generator_version"] = kGeneratorVersion;
  manifest["seed"] = seed;
  manifest["classes"] = data.class_names;
  manifest["splits"][split] = {
      {"file", file}, {"total", data.samples.size()}, {"counts", count_samples(data)}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_split(const std::filesystem::path& dir, const std::string& split) {
  const nlohmann::json manifest = read_manifest(dir);
  Dataset data;
  nlohmann::json entry;
  try {
    data.class_names = manifest.at("classes").get<std::vector<std::string>>();
    entry = manifest.at("splits").at(split);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::CorruptRecord, "manifest.json lacks split '" + split + "': " + e.what());
  }
  const std::string text = read_file(dir / entry.value("file", split + ".jsonl"));
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      Sample s = sample_from_json(nlohmann::json::parse(line));
      if (s.label < 0 || static_cast<std::size_t>(s.label) >= data.class_names.size()) {
        fail(ErrorCode::CorruptRecord, "label out of range");
      }
      data.samples.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::CorruptRecord, split + ".jsonl line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      fail(ErrorCode::CorruptRecord, split + ".jsonl line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!text.empty() && text.back() != '\n') {
    fail(ErrorCode::CorruptRecord, split + ".jsonl line " + std::to_string(line_no) + ": truncated record");
  }
  if (entry.value("total", std::size_t{0}) != data.samples.size()) {
    fail(ErrorCode::CorruptRecord, split + ".jsonl has " + std::to_string(data.samples.size()) +
                                       " records, manifest says " +
                                       std::to_string(entry.value("total", std::size_t{0})));
  }
  if (entry.contains("counts") && entry["counts"] != nlohmann::json(count_samples(data))) {
    fail(ErrorCode::CorruptRecord, split + ".jsonl per-class counts disagree with manifest");
  }
  return data;
}

Dataset import_geojson(std::string_view text, const std::vector<std::string>& class_names,
                       std::string_view label_key, std::uint64_t id_offset) {
  Dataset data;
  data.class_names = class_names;
  std::uint64_t id = id_offset;
  for (auto& f : geometry::parse_geojson_features(text, label_key)) {
    const auto it = std::find(class_names.begin(), class_names.end(), f.label);
    if (it == class_names.end()) {
      fail(ErrorCode::LabelOutOfRange, "label '" + f.label + "' is not a known class");
    }
    data.samples.push_back(
        make_sample(id++, static_cast<int>(it - class_names.begin()), std::move(f.polygon), {}));
  }
  return data;
}

}  // namespace polymp::dataset
