#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "polymp/geometry.hpp"

namespace polymp::graph {

inline constexpr std::size_t kNodeFeatures = 3;  // x, y, ring_flag

using Edge = std::pair<std::uint32_t, std::uint32_t>;

// Polygon as a graph: one node per stored vertex, ring-topology edges.
// `edges` holds both directions of every undirected edge.
struct PolyGraph {
  std::vector<double> nodes;  // n x 3, row-major
  std::vector<Edge> edges;
  int label = 0;

  std::size_t node_count() const noexcept { return nodes.size() / kNodeFeatures; }
  double x(std::size_t i) const { return nodes[i * kNodeFeatures]; }
  double y(std::size_t i) const { return nodes[i * kNodeFeatures + 1]; }
  double ring_flag(std::size_t i) const { return nodes[i * kNodeFeatures + 2]; }

  friend bool operator==(const PolyGraph&, const PolyGraph&) = default;
};

// Normalized self-loop-augmented adjacency coefficients a~_ij / sqrt(d~_i d~_j).
struct EdgeWeights {
  std::vector<double> edge;        // aligned with PolyGraph::edges
  std::vector<double> self_loop;   // one per node
};

// Checks flags in {0,1}, edge indices in range, edge symmetry, and that every
// node has exactly two distinct neighbours. Throws InvalidArgument.
void validate(const PolyGraph& g);

// Exterior nodes first (flag 0), then holes in order (flag 1).
PolyGraph encode_graph(const geometry::Polygon& poly, int label);

EdgeWeights laplacian_weights(const PolyGraph& g);

// Node i moves to position perm[i]; edges are relabelled accordingly.
// Throws InvalidPermutation.
PolyGraph permute_graph(const PolyGraph& g, std::span<const std::uint32_t> perm);

// Node rows followed by zero rows, max_len x 3. Throws TooManyVertices.
std::vector<double> to_padded_sequence(const PolyGraph& g, std::size_t max_len);

// Splits a ring-structured graph back into its rings (node order preserved).
geometry::Polygon decode_polygon(const PolyGraph& g);

// {"label":int,"flags":[...],"coords":[[x,y],...],"edges":[[i,j],...]},
// undirected edges written once with i < j, sorted.
nlohmann::json to_json(const PolyGraph& g);
PolyGraph graph_from_json(const nlohmann::json& j);  // throws CorruptRecord

}  // namespace polymp::graph
