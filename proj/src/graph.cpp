#include "polymp/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "polymp/error.hpp"

namespace polymp::graph {

namespace {

void append_ring(PolyGraph& g, const geometry::LinearRing& ring, double flag) {
  const auto offset = static_cast<std::uint32_t>(g.node_count());
  const auto k = static_cast<std::uint32_t>(ring.size());
  for (const geometry::Point2& p : ring.vertices()) {
    g.nodes.push_back(p.x);
    g.nodes.push_back(p.y);
    g.nodes.push_back(flag);
  }
  for (std::uint32_t t = 0; t < k; ++t) {
    const std::uint32_t a = offset + t;
    const std::uint32_t b = offset + (t + 1) % k;
    g.edges.emplace_back(a, b);
  }
}

// Sorted undirected pairs (i < j), each emitted as (i, j) then (j, i).
void canonicalize_edges(std::vector<Edge>& edges) {
  std::set<Edge> undirected;
  for (const auto& [i, j] : edges) undirected.insert({std::min(i, j), std::max(i, j)});
  edges.clear();
  for (const auto& [i, j] : undirected) {
    edges.emplace_back(i, j);
    edges.emplace_back(j, i);
  }
}

std::vector<std::size_t> degrees(const PolyGraph& g) {
  std::vector<std::size_t> deg(g.node_count(), 0);
  for (const auto& [i, j] : g.edges) ++deg[j];
  return deg;
}

}  // namespace

void validate(const PolyGraph& g) {
  const std::size_t n = g.node_count();
  if (g.nodes.size() != n * kNodeFeatures) fail(ErrorCode::InvalidArgument, "ragged node matrix");
  if (n == 0) fail(ErrorCode::EmptyGraph, "graph has no nodes");
  for (std::size_t i = 0; i < n; ++i) {
    const double f = g.ring_flag(i);
    if (f != 0.0 && f != 1.0) fail(ErrorCode::InvalidArgument, "ring flag must be 0 or 1");
    if (!std::isfinite(g.x(i)) || !std::isfinite(g.y(i))) {
      fail(ErrorCode::InvalidArgument, "non-finite node coordinate");
    }
  }
  std::set<Edge> present;
  for (const auto& e : g.edges) {
    if (e.first >= n || e.second >= n) fail(ErrorCode::InvalidArgument, "edge index out of range");
    if (e.first == e.second) fail(ErrorCode::InvalidArgument, "self edge");
    present.insert(e);
  }
  if (present.size() != g.edges.size()) fail(ErrorCode::InvalidArgument, "duplicate edge");
  std::vector<std::set<std::uint32_t>> nbrs(n);
  for (const auto& [i, j] : g.edges) {
    if (!present.contains({j, i})) fail(ErrorCode::InvalidArgument, "edge set not symmetric");
    nbrs[i].insert(j);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (nbrs[i].size() != 2) {
      fail(ErrorCode::InvalidArgument, "node " + std::to_string(i) + " does not have 2 neighbours");
    }
  }
}

PolyGraph encode_graph(const geometry::Polygon& poly, int label) {
  PolyGraph g;
  g.label = label;
  g.nodes.reserve(poly.vertex_count() * kNodeFeatures);
  g.edges.reserve(poly.vertex_count() * 2);
  append_ring(g, poly.exterior, 0.0);
  for (const auto& h : poly.holes) append_ring(g, h, 1.0);
  canonicalize_edges(g.edges);
  return g;
}

EdgeWeights laplacian_weights(const PolyGraph& g) {
  std::vector<std::size_t> deg = degrees(g);
  EdgeWeights w;
  w.self_loop.resize(deg.size());
  for (std::size_t i = 0; i < deg.size(); ++i) {
    const double d = static_cast<double>(deg[i] + 1);
    w.self_loop[i] = 1.0 / std::sqrt(d * d);
  }
  w.edge.reserve(g.edges.size());
  for (const auto& [i, j] : g.edges) {
    const double di = static_cast<double>(deg[i] + 1);
    const double dj = static_cast<double>(deg[j] + 1);
    w.edge.push_back(1.0 / std::sqrt(di * dj));
  }
  return w;
}

PolyGraph permute_graph(const PolyGraph& g, std::span<const std::uint32_t> perm) {
  const std::size_t n = g.node_count();
  if (perm.size() != n) fail(ErrorCode::InvalidPermutation, "permutation length mismatch");
  std::vector<char> seen(n, 0);
  for (std::uint32_t p : perm) {
    if (p >= n || seen[p]) fail(ErrorCode::InvalidPermutation, "permutation is not a bijection");
    seen[p] = 1;
  }
  PolyGraph out;
  out.label = g.label;
  out.nodes.resize(g.nodes.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(g.nodes.begin() + static_cast<std::ptrdiff_t>(i * kNodeFeatures), kNodeFeatures,
                out.nodes.begin() + static_cast<std::ptrdiff_t>(perm[i] * kNodeFeatures));
  }
  out.edges.reserve(g.edges.size());
  for (const auto& [i, j] : g.edges) out.edges.emplace_back(perm[i], perm[j]);
  return out;
}

std::vector<double> to_padded_sequence(const PolyGraph& g, std::size_t max_len) {
  if (g.node_count() > max_len) {
    fail(ErrorCode::TooManyVertices, std::to_string(g.node_count()) + " nodes exceed max_len " +
                                         std::to_string(max_len));
  }
  std::vector<double> out(max_len * kNodeFeatures, 0.0);
  std::copy(g.nodes.begin(), g.nodes.end(), out.begin());
  return out;
}

geometry::Polygon decode_polygon(const PolyGraph& g) {
  const std::size_t n = g.node_count();
  std::vector<std::vector<std::uint32_t>> nbrs(n);
  for (const auto& [i, j] : g.edges) nbrs[i].push_back(j);
  std::vector<char> visited(n, 0);
  std::vector<geometry::LinearRing> rings;
  for (std::uint32_t start = 0; start < n; ++start) {
    if (visited[start]) continue;
    std::vector<geometry::Point2> pts;
    std::uint32_t prev = start;
    std::uint32_t cur = start;
    while (!visited[cur]) {
      visited[cur] = 1;
      pts.push_back({g.x(cur), g.y(cur)});
      std::uint32_t next = cur;
      for (std::uint32_t c : nbrs[cur]) {
        if (c != prev && !visited[c]) {
          next = c;
          break;
        }
      }
      prev = cur;
      cur = next;
    }
    rings.emplace_back(std::move(pts));
  }
  if (rings.empty()) fail(ErrorCode::EmptyGraph, "graph has no nodes");
  geometry::LinearRing exterior = std::move(rings.front());
  rings.erase(rings.begin());
  return geometry::Polygon{std::move(exterior), std::move(rings)};
}

nlohmann::json to_json(const PolyGraph& g) {
  nlohmann::json flags = nlohmann::json::array();
  nlohmann::json coords = nlohmann::json::array();
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    flags.push_back(static_cast<int>(g.ring_flag(i)));
    coords.push_back({g.x(i), g.y(i)});
  }
  std::set<Edge> undirected;
  for (const auto& [i, j] : g.edges) undirected.insert({std::min(i, j), std::max(i, j)});
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [i, j] : undirected) edges.push_back({i, j});
  return {{"label", g.label}, {"flags", flags}, {"coords", coords}, {"edges", edges}};
}

PolyGraph graph_from_json(const nlohmann::json& j) {
  try {
    PolyGraph g;
    g.label = j.at("label").get<int>();
    const auto& flags = j.at("flags");
    const auto& coords = j.at("coords");
    if (flags.size() != coords.size()) fail(ErrorCode::CorruptRecord, "flags/coords length differ");
    for (std::size_t i = 0; i < coords.size(); ++i) {
      g.nodes.push_back(coords[i].at(0).get<double>());
      g.nodes.push_back(coords[i].at(1).get<double>());
      g.nodes.push_back(flags[i].get<double>());
    }
    for (const auto& e : j.at("edges")) {
      g.edges.emplace_back(e.at(0).get<std::uint32_t>(), e.at(1).get<std::uint32_t>());
    }
    canonicalize_edges(g.edges);
    validate(g);
    return g;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::CorruptRecord, std::string("malformed graph record: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptRecord) throw;
    fail(ErrorCode::CorruptRecord, std::string("invalid graph record: ") + e.what());
  }
}

}  // namespace polymp::graph
