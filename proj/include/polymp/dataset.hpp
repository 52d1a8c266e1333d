#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "polymp/geometry.hpp"
#include "polymp/graph.hpp"

namespace polymp::dataset {

using Rng = std::mt19937_64;

inline constexpr int kGeneratorVersion = 1;

// Letter templates: E F H I L O T U Y Z.
const std::vector<std::string>& default_class_names();

struct ShapeClass {
  std::string name;
  bool has_hole = false;
};

ShapeClass shape_class(std::string_view name);  // throws InvalidArgument

struct GeneratorOptions {
  double jitter = 0.1;            // vertex jitter as a fraction of the shortest adjacent edge
  double serif_probability = 0.5; // classes with serif variants (I, T)
};

// Polygon on a canvas of roughly 50 x 50 units.
geometry::Polygon generate_class_instance(const ShapeClass& cls, Rng& rng,
                                          const GeneratorOptions& opts = {});

// Inserts `points_per_edge` collinear vertices along every edge, each slid by
// at most 0.1 units from its even spacing.
geometry::Polygon densify(const geometry::Polygon& poly, std::size_t points_per_edge, Rng& rng);
// Same, with an independent count in [0, max_per_edge] for every edge.
geometry::Polygon densify_varied(const geometry::Polygon& poly, std::size_t max_per_edge, Rng& rng);

struct TransformParams {
  geometry::TransformKind kind = geometry::TransformKind::Original;
  double a = 0.0;  // rotation degrees | x scale | x shear degrees
  double b = 0.0;  // unused            | y scale | y shear degrees

  friend bool operator==(const TransformParams&, const TransformParams&) = default;
};

// Rotation ~ U[-75, 75] deg, scale ~ U[0.1, 2] per axis, shear ~ U[-45, 45] deg per axis.
TransformParams draw_transform(geometry::TransformKind kind, Rng& rng);
geometry::Polygon apply_transform(const geometry::Polygon& poly, const TransformParams& t);
// Draw + apply + normalize. Rejects Original.
geometry::Polygon apply_random_transform(const geometry::Polygon& poly, Rng& rng,
                                         geometry::TransformKind which,
                                         TransformParams* drawn = nullptr);

struct Sample {
  std::uint64_t id = 0;
  int label = 0;
  TransformParams transform;
  bool simplified = false;
  geometry::Polygon raw;      // generation scale, before transform and normalization
  geometry::Polygon polygon;  // normalized model input geometry
  graph::PolyGraph graph;

  geometry::TransformKind tag() const { return transform.kind; }
};

struct Dataset {
  std::vector<std::string> class_names;
  std::vector<Sample> samples;
};

// Builds polygon + graph from raw geometry and transform.
Sample make_sample(std::uint64_t id, int label, geometry::Polygon raw, TransformParams transform,
                   bool simplified = false);

// Seed of sample `id` under `master`; independent of generation order.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t id);

struct GenerationOptions {
  std::vector<std::string> classes = default_class_names();
  std::size_t per_class = 100;
  std::size_t points_per_edge = 3;  // upper bound, drawn per edge
  std::uint64_t seed = 0;
  std::uint64_t id_offset = 0;
  GeneratorOptions shape;
};

// Original-tag samples, `per_class` per class, ids id_offset + k.
Dataset generate_base(const GenerationOptions& opts);

// Test set: per class, tags cycle O, R, SC, SH.
Dataset generate_test(const GenerationOptions& opts);

bool valid_ratio(double ratio);  // one of 0, 0.2, 0.4, 0.6, 0.8
int ratio_percent(double ratio);

// Replaces round(ratio * N) samples, stratified by class, with transformed
// variants (kind uniform over R, SC, SH). Throws InvalidRatio.
Dataset build_ratio_split(const Dataset& base, double ratio, std::uint64_t seed);

struct SimplifiedView {
  Dataset dataset;
  std::size_t dropped = 0;  // samples whose exterior collapsed
};

// Douglas-Peucker on the raw geometry, then the sample's transform, then
// normalization.
SimplifiedView build_simplified_view(const Dataset& dataset, double tolerance = 1.0);

// Stratified split; `fraction` of each class goes to the second set.
std::pair<Dataset, Dataset> stratified_split(const Dataset& data, double fraction, std::uint64_t seed);

// Counts per class name, per transform code.
using Counts = std::map<std::string, std::map<std::string, std::size_t>>;
Counts count_samples(const Dataset& data);

// ---- files --------------------------------------------------------------

nlohmann::json sample_to_json(const Sample& s);
Sample sample_from_json(const nlohmann::json& j);  // throws CorruptRecord

// Writes <dir>/<split>.jsonl and records the split in <dir>/manifest.json.
void save_split(const std::filesystem::path& dir, const std::string& split, const Dataset& data,
                std::uint64_t seed);

// Reads <dir>/<split>.jsonl, validating every record and the manifest counts.
// Throws IOErr, CorruptRecord.
Dataset load_split(const std::filesystem::path& dir, const std::string& split);

nlohmann::json read_manifest(const std::filesystem::path& dir);

// Labelled GeoJSON footprints as Original samples; labels are mapped onto
// `class_names` (unknown labels throw LabelOutOfRange).
Dataset import_geojson(std::string_view text, const std::vector<std::string>& class_names,
                       std::string_view label_key = "label", std::uint64_t id_offset = 0);

}  // namespace polymp::dataset
