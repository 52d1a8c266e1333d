#include "polymp/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string_view>
#include <unordered_set>

#include "polymp/error.hpp"
#include "polymp/geometry.hpp"

namespace polymp::gradcheck {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

Report check(const std::function<Tensor()>& loss_fn,
             std::vector<std::pair<std::string, Tensor>> inputs, const Options& opts) {
  for (auto& [name, t] : inputs) t.zero_grad();
  backward(loss_fn());
  Report report;
  bool first = true;
  for (auto& [name, t] : inputs) {
    TensorReport tr;
    tr.name = name;
    tr.size = t.numel();
    std::vector<double> analytic(t.numel(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
    if (first && opts.fault != 0.0) {
      for (double& g : analytic) g *= 1.0 + opts.fault;
    }
    first = false;
    auto values = t.mutable_data();
    NoGradGuard no_grad;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + opts.eps;
      const double up = loss_fn().item();
      values[i] = saved - opts.eps;
      const double down = loss_fn().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * opts.eps);
      const double err = relative_error(analytic[i], numeric, opts.floor);
      if (err > tr.max_rel_error || i == 0) {
        tr.max_rel_error = err;
        tr.worst_index = i;
        tr.analytic = analytic[i];
        tr.numeric = numeric;
      }
    }
    if (tr.max_rel_error >= report.max_rel_error) {
      report.max_rel_error = tr.max_rel_error;
      report.worst_tensor = name;
    }
    report.tensors.push_back(std::move(tr));
  }
  report.passed = report.max_rel_error < opts.tolerance;
  return report;
}

Report check_model(models::Model& model, const std::vector<graph::PolyGraph>& graphs,
                   const Options& opts) {
  const models::GraphBatch batch = models::make_batch(graphs, model.config);
  auto loss_fn = [&] {
    const models::ForwardResult r = models::forward(model, batch);
    return ops::softmax_cross_entropy(r.logits, batch.labels);
  };
  std::vector<std::pair<std::string, Tensor>> inputs;
  for (auto& [name, t] : model.params.tensors) inputs.emplace_back(name, t);
  return check(loss_fn, std::move(inputs), opts);
}

std::vector<graph::PolyGraph> sample_graphs(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> radius(0.5, 1.0);
  std::uniform_real_distribution<double> wobble(-0.15, 0.15);
  auto star = [&](std::size_t k, double cx, double cy, double scale) {
    std::vector<geometry::Point2> pts;
    for (std::size_t i = 0; i < k; ++i) {
      const double a = 2.0 * std::numbers::pi * (static_cast<double>(i) + wobble(rng)) /
                       static_cast<double>(k);
      const double r = scale * radius(rng);
      pts.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
    }
    return geometry::LinearRing(std::move(pts));
  };
  geometry::Polygon plain{star(9, 0.0, 0.0, 10.0), {}};
  geometry::Polygon holed{star(7, 0.0, 0.0, 10.0), {}};
  holed.holes.push_back(star(4, 0.3, -0.2, 2.0));
  return {graph::encode_graph(geometry::normalize(plain), 0),
          graph::encode_graph(geometry::normalize(holed), 1)};
}

void randomize_biases(models::ModelParams& params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  for (auto& [name, t] : params.tensors) {
    if (!name.ends_with(".bias")) continue;
    for (double& v : t.mutable_data()) v = dist(rng);
  }
}

double relu_margin(const models::Model& model, const std::vector<graph::PolyGraph>& graphs) {
  const Tensor logits = models::forward(model, models::make_batch(graphs, model.config)).logits;
  double margin = std::numeric_limits<double>::infinity();
  std::vector<const TapeNode*> stack;
  std::unordered_set<const TapeNode*> seen;
  if (logits.producer()) stack.push_back(logits.producer().get());
  while (!stack.empty()) {
    const TapeNode* node = stack.back();
    stack.pop_back();
    if (!seen.insert(node).second) continue;
    if (std::string_view(node->op) == "relu") {
      for (double z : node->inputs.at(0).data()) margin = std::min(margin, std::abs(z));
    }
    for (const Tensor& in : node->inputs) {
      if (in.producer()) stack.push_back(in.producer().get());
    }
  }
  return margin;
}

std::uint64_t randomize_biases_off_kinks(models::Model& model, const std::vector<graph::PolyGraph>& graphs,
                                         std::uint64_t seed, double margin, std::size_t max_tries) {
  for (std::size_t t = 0; t < max_tries; ++t) {
    randomize_biases(model.params, seed + t);
    if (relu_margin(model, graphs) >= margin) return seed + t;
  }
  fail(ErrorCode::InvalidArgument, "no bias draw keeps every ReLU input off its kink");
}

}  // namespace polymp::gradcheck
