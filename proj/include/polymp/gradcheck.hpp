#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "polymp/graph.hpp"
#include "polymp/models.hpp"
#include "polymp/tensor.hpp"

namespace polymp::gradcheck {

struct Options {
  double eps = 1e-5;        // central difference step
  double tolerance = 1e-4;  // max accepted relative error
  // Denominator floor: |a - n| / max(|a|, |n|, floor). Keeps gradients that
  // are numerically zero from producing meaningless ratios.
  double floor = 1e-6;
  // Test fixture: scales the analytic gradient of the first parameter by
  // (1 + fault) to emulate a broken backward rule.
  double fault = 0.0;
};

struct TensorReport {
  std::string name;
  std::size_t size = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct Report {
  std::vector<TensorReport> tensors;
  double max_rel_error = 0.0;
  std::string worst_tensor;
  bool passed = true;
};

double relative_error(double analytic, double numeric, double floor);

// Checks d(loss)/d(input) for every tensor in `inputs` against central
// differences of `loss_fn`, which must rebuild the loss from the current
// input values on every call.
Report check(const std::function<Tensor()>& loss_fn, std::vector<std::pair<std::string, Tensor>> inputs,
             const Options& opts = {});

// Full-model check: cross-entropy of the model's logits on `graphs`.
Report check_model(models::Model& model, const std::vector<graph::PolyGraph>& graphs,
                   const Options& opts = {});

// Two jittered polygons (one with a hole), normalized and labelled 0 and 1.
std::vector<graph::PolyGraph> sample_graphs(std::uint64_t seed);

// Randomizes every bias in [-0.1, 0.1] so no ReLU sits exactly on its kink.
void randomize_biases(models::ModelParams& params, std::uint64_t seed);

// Smallest |input| over every ReLU evaluated on `graphs`.
double relu_margin(const models::Model& model, const std::vector<graph::PolyGraph>& graphs);

// Redraws biases with seed, seed + 1, ... until every ReLU input on `graphs`
// is at least `margin` from the kink. Returns the seed that was kept.
std::uint64_t randomize_biases_off_kinks(models::Model& model, const std::vector<graph::PolyGraph>& graphs,
                                         std::uint64_t seed, double margin = 1e-4,
                                         std::size_t max_tries = 256);

}  // namespace polymp::gradcheck
