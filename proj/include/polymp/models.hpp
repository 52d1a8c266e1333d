#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "polymp/graph.hpp"
#include "polymp/tensor.hpp"

namespace polymp::models {

enum class Arch { PolyMP, DeepSet, GCN, VeerCNN };
enum class Pooling { Mean, Max, Sum };

std::string_view arch_name(Arch arch);           // "polymp", "deepset", "gcn", "veercnn"
Arch arch_from_name(std::string_view name);      // throws InvalidArgument

struct ModelConfig {
  Arch arch = Arch::PolyMP;
  std::vector<std::size_t> dims;   // input width then the two feature-layer widths
  std::size_t n_classes = 26;
  Pooling pooling = Pooling::Mean;               // graph readout
  Pooling neighbor_pooling = Pooling::Max;       // PolyMP message aggregation
  std::size_t head_hidden = 32;                  // classifier hidden width
  std::size_t max_seq_len = 64;                  // VeerCNN only
  std::size_t kernel_size = 3;                   // VeerCNN only
  bool relative_only = false;                    // PolyMP: layer 1 sees messages only

  static ModelConfig defaults(Arch arch, std::size_t n_classes = 26);
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void validate(const ModelConfig& cfg);  // throws InvalidArgument

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const nlohmann::json& j);

// Named parameters in deterministic (lexicographic) order.
struct ModelParams {
  Arch arch = Arch::PolyMP;
  std::map<std::string, Tensor> tensors;

  std::size_t count() const;
  Tensor& at(const std::string& name) { return tensors.at(name); }
  const Tensor& at(const std::string& name) const { return tensors.at(name); }
  void zero_grad();
  ModelParams clone() const;
};

struct Model {
  ModelConfig config;
  ModelParams params;
};

struct InitOptions {
  bool zero_head = false;  // zero the final classifier layer (uniform logits)
};

// Glorot-uniform weights, zero biases, deterministic in `seed`.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed, InitOptions opts = {});

// Names of the classifier-head tensors (re-initialized by fine-tuning).
bool is_head_param(std::string_view name);

// Graphs stacked into one disjoint union plus the padded sequence view.
struct GraphBatch {
  Tensor features;                          // N x 3
  std::vector<std::uint32_t> edge_src;      // message source j
  std::vector<std::uint32_t> edge_dst;      // receiving node i
  std::vector<double> edge_weight;          // Laplacian weights, aligned with edges
  std::vector<double> self_weight;          // per node
  std::vector<std::uint32_t> node_graph;    // node -> graph index
  std::vector<std::size_t> node_offset;     // first node of each graph, size n_graphs + 1
  std::vector<int> labels;
  std::size_t n_graphs = 0;
  Tensor sequences;                         // n_graphs x max_seq_len x 3 (VeerCNN)
  std::size_t truncated = 0;                // graphs cut to max_seq_len
};

// Throws EmptyGraph for an empty batch or a graph without nodes.
GraphBatch make_batch(std::span<const graph::PolyGraph* const> graphs, const ModelConfig& cfg);
GraphBatch make_batch(std::span<const graph::PolyGraph> graphs, const ModelConfig& cfg);

struct ForwardResult {
  Tensor logits;  // n_graphs x n_classes
  Tensor latent;  // per-node final feature-layer output, N x width
};

ForwardResult polymp_forward(const Model& model, const GraphBatch& batch);
ForwardResult deepset_forward(const Model& model, const GraphBatch& batch);
ForwardResult gcn_forward(const Model& model, const GraphBatch& batch);
ForwardResult veercnn_forward(const Model& model, const GraphBatch& batch);
ForwardResult forward(const Model& model, const GraphBatch& batch);

// Per-node L2 norm of the final latent feature over the graph maximum, in [0, 1].
std::vector<double> node_saliency(const Model& model, const graph::PolyGraph& g);

// Checkpoint: {"arch", "config", "params": {name: {"shape", "data"}}}.
nlohmann::json checkpoint_to_json(const Model& model);
Model checkpoint_from_json(const nlohmann::json& j);  // throws IncompatibleCheckpoint
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace polymp::models
