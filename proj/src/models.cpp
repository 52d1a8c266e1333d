#include "polymp/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "polymp/error.hpp"

namespace polymp::models {

namespace {

using ops::Reduce;

Reduce to_reduce(Pooling p) {
  switch (p) {
    case Pooling::Mean: return Reduce::Mean;
    case Pooling::Max: return Reduce::Max;
    case Pooling::Sum: return Reduce::Sum;
  }
  return Reduce::Mean;
}

struct ParamSpec {
  std::string name;
  Shape shape;
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;  // 0 marks a bias
};

void add_linear(std::vector<ParamSpec>& specs, const std::string& prefix, std::size_t in,
                std::size_t out) {
  specs.push_back({prefix + ".weight", {in, out}, in, out});
  specs.push_back({prefix + ".bias", {out}, 0, 0});
}

std::vector<ParamSpec> param_specs(const ModelConfig& cfg) {
  const std::size_t d0 = cfg.dims[0], d1 = cfg.dims[1], d2 = cfg.dims[2];
  std::vector<ParamSpec> specs;
  switch (cfg.arch) {
    case Arch::PolyMP:
      add_linear(specs, "mp1", cfg.relative_only ? d0 : 2 * d0, d1);
      add_linear(specs, "mp2", 2 * d1, d2);
      break;
    case Arch::DeepSet:
      add_linear(specs, "phi1", d0, d1);
      add_linear(specs, "phi2", d1, d2);
      break;
    case Arch::GCN:
      add_linear(specs, "gcn1", d0, d1);
      add_linear(specs, "gcn2", d1, d2);
      break;
    case Arch::VeerCNN: {
      const std::size_t k = cfg.kernel_size;
      specs.push_back({"conv1.kernel", {k, d0, d1}, k * d0, k * d1});
      specs.push_back({"conv1.bias", {d1}, 0, 0});
      specs.push_back({"conv2.kernel", {k, d1, d2}, k * d1, k * d2});
      specs.push_back({"conv2.bias", {d2}, 0, 0});
      break;
    }
  }
  add_linear(specs, "head1", d2, cfg.head_hidden);
  add_linear(specs, "head2", cfg.head_hidden, cfg.n_classes);
  return specs;
}

Tensor linear(const Tensor& x, const ModelParams& p, const std::string& prefix) {
  return ops::add(ops::matmul(x, p.at(prefix + ".weight")), p.at(prefix + ".bias"));
}

Tensor classifier(const Tensor& pooled, const ModelParams& p) {
  return linear(ops::relu(linear(pooled, p, "head1")), p, "head2");
}

Tensor readout(const Tensor& h, const GraphBatch& batch, Pooling pooling) {
  return ops::segment_reduce(h, batch.node_graph, batch.n_graphs, to_reduce(pooling));
}

void check_arch(const Model& model, Arch expected) {
  if (model.config.arch != expected || model.params.arch != expected) {
    fail(ErrorCode::InvalidArgument, std::string("model is not ") + std::string(arch_name(expected)));
  }
}

}  // namespace

std::string_view arch_name(Arch arch) {
  switch (arch) {
    case Arch::PolyMP: return "polymp";
    case Arch::DeepSet: return "deepset";
    case Arch::GCN: return "gcn";
    case Arch::VeerCNN: return "veercnn";
  }
  return "?";
}

Arch arch_from_name(std::string_view name) {
  for (Arch a : {Arch::PolyMP, Arch::DeepSet, Arch::GCN, Arch::VeerCNN}) {
    if (arch_name(a) == name) return a;
  }
  fail(ErrorCode::InvalidArgument, "unknown architecture '" + std::string(name) + "'");
}

ModelConfig ModelConfig::defaults(Arch arch, std::size_t n_classes) {
  ModelConfig cfg;
  cfg.arch = arch;
  cfg.n_classes = n_classes;
  switch (arch) {
    case Arch::PolyMP:
      cfg.dims = {graph::kNodeFeatures, 64, 64};
      cfg.head_hidden = 32;
      break;
    case Arch::DeepSet:
      cfg.dims = {graph::kNodeFeatures, 64, 64};
      cfg.head_hidden = 80;
      break;
    case Arch::GCN:
      cfg.dims = {graph::kNodeFeatures, 64, 64};
      cfg.head_hidden = 32;
      break;
    case Arch::VeerCNN:
      cfg.dims = {graph::kNodeFeatures, 32, 64};
      cfg.head_hidden = 80;
      break;
  }
  return cfg;
}

void validate(const ModelConfig& cfg) {
  if (cfg.dims.size() != 3) fail(ErrorCode::InvalidArgument, "dims must list input + 2 layer widths");
  if (cfg.dims[0] != graph::kNodeFeatures) {
    fail(ErrorCode::InvalidArgument, "input width must be " + std::to_string(graph::kNodeFeatures));
  }
  if (cfg.dims[1] == 0 || cfg.dims[2] == 0 || cfg.head_hidden == 0) {
    fail(ErrorCode::InvalidArgument, "layer widths must be positive");
  }
  if (cfg.n_classes < 2) fail(ErrorCode::InvalidArgument, "need at least 2 classes");
  if (cfg.arch == Arch::VeerCNN && (cfg.max_seq_len == 0 || cfg.kernel_size % 2 == 0)) {
    fail(ErrorCode::InvalidArgument, "VeerCNN needs max_seq_len > 0 and an odd kernel size");
  }
}

std::size_t ModelParams::count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors) n += t.numel();
  return n;
}

void ModelParams::zero_grad() {
  for (auto& [name, t] : tensors) t.zero_grad();
}

ModelParams ModelParams::clone() const {
  ModelParams out;
  out.arch = arch;
  for (const auto& [name, t] : tensors) out.tensors.emplace(name, t.clone());
  return out;
}

bool is_head_param(std::string_view name) { return name.starts_with("head"); }

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed, InitOptions opts) {
  validate(cfg);
  std::vector<ParamSpec> specs = param_specs(cfg);
  std::sort(specs.begin(), specs.end(),
            [](const ParamSpec& a, const ParamSpec& b) { return a.name < b.name; });
  std::mt19937_64 rng(seed);
  ModelParams params;
  params.arch = cfg.arch;
  for (const ParamSpec& spec : specs) {
    std::vector<double> data(shape_numel(spec.shape), 0.0);
    const bool zeroed = spec.fan_out == 0 || (opts.zero_head && spec.name == "head2.weight");
    if (!zeroed) {
      const double limit = std::sqrt(6.0 / static_cast<double>(spec.fan_in + spec.fan_out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (double& v : data) v = dist(rng);
    }
    params.tensors.emplace(spec.name, Tensor::from(spec.shape, std::move(data), true));
  }
  return params;
}

GraphBatch make_batch(std::span<const graph::PolyGraph> graphs, const ModelConfig& cfg) {
  std::vector<const graph::PolyGraph*> ptrs;
  ptrs.reserve(graphs.size());
  for (const auto& g : graphs) ptrs.push_back(&g);
  return make_batch(std::span<const graph::PolyGraph* const>(ptrs), cfg);
}

GraphBatch make_batch(std::span<const graph::PolyGraph* const> graphs, const ModelConfig& cfg) {
  if (graphs.empty()) fail(ErrorCode::EmptyGraph, "empty batch");
  constexpr std::size_t F = graph::kNodeFeatures;
  GraphBatch batch;
  batch.n_graphs = graphs.size();
  batch.node_offset.push_back(0);
  std::vector<double> features;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const graph::PolyGraph& g = *graphs[gi];
    const std::size_t n = g.node_count();
    if (n == 0 || g.nodes.size() != n * F) fail(ErrorCode::EmptyGraph, "graph without nodes in batch");
    const auto offset = static_cast<std::uint32_t>(batch.node_offset.back());
    features.insert(features.end(), g.nodes.begin(), g.nodes.end());
    const graph::EdgeWeights w = [&] {
      for (const auto& [i, j] : g.edges) {
        if (i >= n || j >= n) fail(ErrorCode::IndexOutOfRange, "edge index out of range");
      }
      return graph::laplacian_weights(g);
    }();
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      // Edge (i, j) carries a message from j into i.
      batch.edge_dst.push_back(offset + g.edges[e].first);
      batch.edge_src.push_back(offset + g.edges[e].second);
      batch.edge_weight.push_back(w.edge[e]);
    }
    batch.self_weight.insert(batch.self_weight.end(), w.self_loop.begin(), w.self_loop.end());
    batch.node_graph.insert(batch.node_graph.end(), n, static_cast<std::uint32_t>(gi));
    batch.node_offset.push_back(offset + n);
    batch.labels.push_back(g.label);
  }
  const std::size_t total = batch.node_offset.back();
  batch.features = Tensor::from({total, F}, std::move(features));

  if (cfg.arch == Arch::VeerCNN) {
    const std::size_t len = cfg.max_seq_len;
    std::vector<double> seq(graphs.size() * len * F, 0.0);
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
      const graph::PolyGraph& g = *graphs[gi];
      const std::size_t n = std::min(g.node_count(), len);
      if (g.node_count() > len) ++batch.truncated;
      std::copy_n(g.nodes.begin(), n * F, seq.begin() + static_cast<std::ptrdiff_t>(gi * len * F));
    }
    batch.sequences = Tensor::from({graphs.size(), len, F}, std::move(seq));
  }
  return batch;
}

ForwardResult polymp_forward(const Model& model, const GraphBatch& batch) {
  check_arch(model, Arch::PolyMP);
  const ModelConfig& cfg = model.config;
  const std::size_t n = batch.features.dim(0);
  const Reduce agg = to_reduce(cfg.neighbor_pooling);
  Tensor h = batch.features;
  for (int layer = 1; layer <= 2; ++layer) {
    // m_i = pool_j |h_j - h_i| over the neighbours j of i.
    Tensor diff = ops::sub(ops::gather_rows(h, batch.edge_src), ops::gather_rows(h, batch.edge_dst));
    Tensor message = ops::segment_reduce(ops::abs(diff), batch.edge_dst, n, agg);
    Tensor input = (layer == 1 && cfg.relative_only) ? message : ops::concat_cols(h, message);
    h = ops::relu(linear(input, model.params, "mp" + std::to_string(layer)));
  }
  return {classifier(readout(h, batch, cfg.pooling), model.params), h};
}

ForwardResult deepset_forward(const Model& model, const GraphBatch& batch) {
  check_arch(model, Arch::DeepSet);
  Tensor h = ops::relu(linear(batch.features, model.params, "phi1"));
  h = ops::relu(linear(h, model.params, "phi2"));
  return {classifier(readout(h, batch, model.config.pooling), model.params), h};
}

ForwardResult gcn_forward(const Model& model, const GraphBatch& batch) {
  check_arch(model, Arch::GCN);
  const std::size_t n = batch.features.dim(0);
  Tensor h = batch.features;
  for (int layer = 1; layer <= 2; ++layer) {
    const std::string prefix = "gcn" + std::to_string(layer);
    Tensor hw = ops::matmul(h, model.params.at(prefix + ".weight"));
    Tensor neighbours = ops::segment_reduce(
        ops::scale_rows(ops::gather_rows(hw, batch.edge_src), batch.edge_weight), batch.edge_dst, n,
        Reduce::Sum);
    Tensor agg = ops::add(neighbours, ops::scale_rows(hw, batch.self_weight));
    h = ops::relu(ops::add(agg, model.params.at(prefix + ".bias")));
  }
  return {classifier(readout(h, batch, model.config.pooling), model.params), h};
}

ForwardResult veercnn_forward(const Model& model, const GraphBatch& batch) {
  check_arch(model, Arch::VeerCNN);
  const ModelConfig& cfg = model.config;
  if (!batch.sequences.defined() || batch.sequences.rank() != 3 ||
      batch.sequences.dim(1) != cfg.max_seq_len || batch.sequences.dim(2) != cfg.dims[0]) {
    fail(ErrorCode::ShapeMismatch, "VeerCNN expects sequences padded to max_seq_len");
  }
  const std::size_t b = batch.n_graphs, len = cfg.max_seq_len;
  auto conv_layer = [&](const Tensor& x, const std::string& prefix, std::size_t width) {
    Tensor y = ops::conv1d(x, model.params.at(prefix + ".kernel"));
    y = ops::relu(ops::add(ops::reshape(y, {b * len, width}), model.params.at(prefix + ".bias")));
    return y;
  };
  Tensor h1 = conv_layer(batch.sequences, "conv1", cfg.dims[1]);
  Tensor h2 = conv_layer(ops::reshape(h1, {b, len, cfg.dims[1]}), "conv2", cfg.dims[2]);
  std::vector<std::uint32_t> position_graph(b * len);
  for (std::size_t i = 0; i < position_graph.size(); ++i) {
    position_graph[i] = static_cast<std::uint32_t>(i / len);
  }
  // Global average over every position, padding included.
  Tensor pooled = ops::segment_reduce(h2, position_graph, b, Reduce::Mean);
  std::vector<std::uint32_t> node_rows;
  for (std::size_t gi = 0; gi < b; ++gi) {
    const std::size_t n = std::min(batch.node_offset[gi + 1] - batch.node_offset[gi], len);
    for (std::size_t t = 0; t < n; ++t) node_rows.push_back(static_cast<std::uint32_t>(gi * len + t));
  }
  return {classifier(pooled, model.params), ops::gather_rows(h2, node_rows)};
}

ForwardResult forward(const Model& model, const GraphBatch& batch) {
  switch (model.config.arch) {
    case Arch::PolyMP: return polymp_forward(model, batch);
    case Arch::DeepSet: return deepset_forward(model, batch);
    case Arch::GCN: return gcn_forward(model, batch);
    case Arch::VeerCNN: return veercnn_forward(model, batch);
  }
  fail(ErrorCode::InvalidArgument, "unknown architecture");
}

std::vector<double> node_saliency(const Model& model, const graph::PolyGraph& g) {
  if (g.node_count() == 0) fail(ErrorCode::EmptyGraph, "graph has no nodes");
  NoGradGuard no_grad;
  const graph::PolyGraph* one[] = {&g};
  const GraphBatch batch = make_batch(std::span<const graph::PolyGraph* const>(one), model.config);
  const Tensor latent = forward(model, batch).latent;
  const std::size_t rows = latent.dim(0), width = latent.dim(1);
  std::vector<double> norms(g.node_count(), 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < width; ++c) s += latent.at(i, c) * latent.at(i, c);
    norms[i] = std::sqrt(s);
  }
  const double peak = *std::max_element(norms.begin(), norms.end());
  if (peak > 0.0) {
    for (double& v : norms) v = std::min(1.0, v / peak);
  }
  return norms;
}

}  // namespace polymp::models
