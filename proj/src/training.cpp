#include "polymp/training.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "polymp/error.hpp"

namespace polymp::training {

namespace {

using models::Model;

void check_labels(std::span<const graph::PolyGraph> graphs, std::size_t n_classes) {
  for (const auto& g : graphs) {
    if (g.label < 0 || static_cast<std::size_t>(g.label) >= n_classes) {
      fail(ErrorCode::LabelOutOfRange, "label " + std::to_string(g.label) + " outside a " +
                                           std::to_string(n_classes) + "-class model");
    }
  }
}

std::vector<const graph::PolyGraph*> slice(std::span<const graph::PolyGraph> graphs,
                                           std::span<const std::size_t> order, std::size_t begin,
                                           std::size_t end) {
  std::vector<const graph::PolyGraph*> out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) out.push_back(&graphs[order.empty() ? i : order[i]]);
  return out;
}

Tensor batch_loss(const Model& model, const std::vector<const graph::PolyGraph*>& graphs) {
  const models::GraphBatch batch =
      models::make_batch(std::span<const graph::PolyGraph* const>(graphs), model.config);
  return ops::softmax_cross_entropy(models::forward(model, batch).logits, batch.labels);
}

}  // namespace

void validate(const TrainConfig& cfg) {
  if (!(cfg.lr > 0.0) || cfg.batch_size == 0 || cfg.plateau_patience == 0 || cfg.early_stop_patience == 0) {
    fail(ErrorCode::InvalidArgument, "lr, batch_size and patience values must be positive");
  }
  if (!(cfg.plateau_factor > 1.0)) fail(ErrorCode::InvalidArgument, "plateau_factor must exceed 1");
  if (cfg.min_delta < 0.0) fail(ErrorCode::InvalidArgument, "min_delta must be non-negative");
  if (cfg.val_fraction < 0.0 || cfg.val_fraction >= 1.0) {
    fail(ErrorCode::InvalidArgument, "val_fraction must lie in [0, 1)");
  }
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"lr", cfg.lr},
          {"batch_size", cfg.batch_size},
          {"max_epochs", cfg.max_epochs},
          {"plateau_patience", cfg.plateau_patience},
          {"plateau_factor", cfg.plateau_factor},
          {"early_stop_patience", cfg.early_stop_patience},
          {"min_delta", cfg.min_delta},
          {"val_fraction", cfg.val_fraction},
          {"seed", cfg.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base) {
  if (!j.is_object()) fail(ErrorCode::InvalidArgument, "training config must be a JSON object");
  try {
    base.lr = j.value("lr", base.lr);
    base.batch_size = j.value("batch_size", base.batch_size);
    base.max_epochs = j.value("max_epochs", base.max_epochs);
    base.plateau_patience = j.value("plateau_patience", base.plateau_patience);
    base.plateau_factor = j.value("plateau_factor", base.plateau_factor);
    base.early_stop_patience = j.value("early_stop_patience", base.early_stop_patience);
    base.min_delta = j.value("min_delta", base.min_delta);
    base.val_fraction = j.value("val_fraction", base.val_fraction);
    base.seed = j.value("seed", base.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("bad training config: ") + e.what());
  }
  validate(base);
  return base;
}

void adam_step(std::span<Tensor> params, AdamState& state, double lr) {
  for (const Tensor& p : params) {
    if (!p.has_grad()) fail(ErrorCode::MissingGradient, "parameter without gradient");
  }
  if (state.m.empty()) {
    for (const Tensor& p : params) {
      state.m.emplace_back(p.numel(), 0.0);
      state.v.emplace_back(p.numel(), 0.0);
    }
  }
  if (state.m.size() != params.size()) fail(ErrorCode::ShapeMismatch, "optimizer state does not match parameters");
  ++state.t;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto w = params[k].mutable_data();
    const auto g = params[k].grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != w.size()) fail(ErrorCode::ShapeMismatch, "optimizer state does not match parameters");
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.eps);
    }
  }
}

void adam_step(models::ModelParams& params, AdamState& state, double lr) {
  std::vector<Tensor> list;
  list.reserve(params.tensors.size());
  for (auto& [name, t] : params.tensors) {
    if (!t.has_grad()) fail(ErrorCode::MissingGradient, "no gradient for " + name);
    list.push_back(t);
  }
  adam_step(std::span<Tensor>(list), state, lr);
}

double PlateauScheduler::step(double metric, double lr) {
  if (!seen_ || metric < best_ - min_delta_) {
    best_ = metric;
    seen_ = true;
    bad_epochs_ = 0;
    return lr;
  }
  if (++bad_epochs_ >= patience_) {
    bad_epochs_ = 0;
    return lr / factor_;
  }
  return lr;
}

double lr_on_plateau(std::span<const double> history, double lr, std::size_t patience, double factor,
                     double min_delta) {
  PlateauScheduler sched(patience, factor, min_delta);
  for (double h : history) lr = sched.step(h, lr);
  return lr;
}

bool early_stop(std::span<const double> history, std::size_t patience, double min_delta) {
  if (history.empty()) return false;
  double best = history[0];
  std::size_t last_improvement = 0;
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i] < best - min_delta) {
      best = history[i];
      last_improvement = i;
    }
  }
  return history.size() - 1 - last_improvement >= patience;
}

double mean_loss(const Model& model, std::span<const graph::PolyGraph> graphs, std::size_t batch_size) {
  if (graphs.empty()) fail(ErrorCode::EmptyDataset, "no samples to score");
  NoGradGuard no_grad;
  double total = 0.0;
  for (std::size_t b = 0; b < graphs.size(); b += batch_size) {
    const std::size_t e = std::min(graphs.size(), b + batch_size);
    total += batch_loss(model, slice(graphs, {}, b, e)).item() * static_cast<double>(e - b);
  }
  return total / static_cast<double>(graphs.size());
}

TrainResult train(Model model, std::span<const graph::PolyGraph> train_set,
                  std::span<const graph::PolyGraph> val_set, const TrainConfig& cfg) {
  validate(cfg);
  models::validate(model.config);
  if (train_set.empty()) fail(ErrorCode::EmptyDataset, "training set is empty");
  check_labels(train_set, model.config.n_classes);
  check_labels(val_set, model.config.n_classes);

  TrainResult result;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  AdamState adam;
  PlateauScheduler scheduler(cfg.plateau_patience, cfg.plateau_factor, cfg.min_delta);
  std::vector<double> history;
  double lr = cfg.lr;
  double best = std::numeric_limits<double>::infinity();
  models::ModelParams best_params = model.params.clone();

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double train_total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      model.params.zero_grad();
      const Tensor loss = batch_loss(model, slice(train_set, order, b, e));
      train_total += loss.item() * static_cast<double>(e - b);
      backward(loss);
      adam_step(model.params, adam, lr);
    }
    model.params.zero_grad();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_total / static_cast<double>(order.size());
    rec.val_loss = val_set.empty() ? rec.train_loss : mean_loss(model, val_set, cfg.batch_size);
    rec.lr = lr;
    if (cfg.timing) {
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    result.log.push_back(rec);

    history.push_back(rec.val_loss);
    if (rec.val_loss < best) {
      best = rec.val_loss;
      best_params = model.params.clone();
      result.best_epoch = epoch;
    }
    lr = scheduler.step(rec.val_loss, lr);
    if (early_stop(history, cfg.early_stop_patience, cfg.min_delta)) {
      result.early_stopped = true;
      break;
    }
  }
  if (result.best_epoch != 0) model.params = std::move(best_params);
  result.model = std::move(model);
  return result;
}

std::vector<graph::PolyGraph> graphs_of(const dataset::Dataset& data) {
  std::vector<graph::PolyGraph> out;
  out.reserve(data.samples.size());
  for (const auto& s : data.samples) out.push_back(s.graph);
  return out;
}

TrainResult train(Model model, const dataset::Dataset& data, const TrainConfig& cfg) {
  if (data.samples.empty()) fail(ErrorCode::EmptyDataset, "training set is empty");
  auto [fit, val] = dataset::stratified_split(data, cfg.val_fraction, cfg.seed);
  const auto fit_graphs = graphs_of(fit);
  const auto val_graphs = graphs_of(val);
  return train(std::move(model), fit_graphs, val_graphs, cfg);
}

TrainResult fine_tune(const Model& pretrained, const models::ModelConfig& target,
                      std::span<const graph::PolyGraph> train_set,
                      std::span<const graph::PolyGraph> val_set, const TrainConfig& cfg) {
  models::ModelConfig backbone = target;
  backbone.n_classes = pretrained.config.n_classes;
  if (!(backbone == pretrained.config)) {
    fail(ErrorCode::IncompatibleBackbone, "target config differs from the pretrained backbone");
  }
  Model model{target, models::init_params(target, cfg.seed)};
  for (auto& [name, t] : model.params.tensors) {
    if (models::is_head_param(name)) continue;
    const auto it = pretrained.params.tensors.find(name);
    if (it == pretrained.params.tensors.end() || it->second.shape() != t.shape()) {
      fail(ErrorCode::IncompatibleBackbone, "pretrained backbone lacks a compatible " + name);
    }
    t = it->second.clone();
    t.set_requires_grad(true);
  }
  if (cfg.max_epochs == 0) {
    TrainResult result;
    result.model = std::move(model);
    return result;
  }
  return train(std::move(model), train_set, val_set, cfg);
}

std::vector<int> predict(const Model& model, std::span<const graph::PolyGraph> graphs, std::size_t batch_size) {
  NoGradGuard no_grad;
  std::vector<int> out;
  out.reserve(graphs.size());
  for (std::size_t b = 0; b < graphs.size(); b += batch_size) {
    const std::size_t e = std::min(graphs.size(), b + batch_size);
    const auto ptrs = slice(graphs, {}, b, e);
    const Tensor logits =
        models::forward(model, models::make_batch(std::span<const graph::PolyGraph* const>(ptrs), model.config))
            .logits;
    const std::size_t c = logits.dim(1);
    const auto d = logits.data();
    for (std::size_t r = 0; r < e - b; ++r) {
      const auto row = d.subspan(r * c, c);
      out.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
    }
  }
  return out;
}

double TagStats::accuracy() const {
  if (total == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(correct) / static_cast<double>(total);
}

double EvalReport::overall() const {
  if (total == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(correct) / static_cast<double>(total);
}

EvalReport evaluate(const Model& model, const dataset::Dataset& data, std::size_t batch_size) {
  if (data.samples.empty()) fail(ErrorCode::EmptyDataset, "evaluation set is empty");
  const auto graphs = graphs_of(data);
  check_labels(graphs, model.config.n_classes);
  const auto pred = predict(model, graphs, batch_size);

  EvalReport report;
  for (const char* tag : {"O", "R", "SC", "SH"}) report.per_tag[tag] = {};
  const std::size_t c = model.config.n_classes;
  report.confusion.assign(c, std::vector<std::size_t>(c, 0));
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const int truth = graphs[i].label;
    const bool hit = pred[i] == truth;
    TagStats& ts = report.per_tag[std::string(geometry::transform_code(data.samples[i].tag()))];
    ++ts.total;
    ++report.total;
    if (hit) {
      ++ts.correct;
      ++report.correct;
    }
    ++report.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred[i])];
  }
  return report;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string log_csv(const std::vector<EpochRecord>& log) {
  std::string out = "epoch,train_loss,val_loss,lr,seconds\n";
  for (const auto& r : log) {
    out += std::to_string(r.epoch) + ',' + format_double(r.train_loss) + ',' + format_double(r.val_loss) + ',' +
           format_double(r.lr) + ',' + format_double(r.seconds) + '\n';
  }
  return out;
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json per_tag = nlohmann::json::object();
  for (const auto& [tag, ts] : report.per_tag) {
    per_tag[tag] = {{"correct", ts.correct},
                    {"total", ts.total},
                    {"accuracy", ts.total == 0 ? nlohmann::json(nullptr) : nlohmann::json(ts.accuracy())}};
  }
  return {{"per_tag", per_tag},
          {"correct", report.correct},
          {"total", report.total},
          {"overall", report.total == 0 ? nlohmann::json(nullptr) : nlohmann::json(report.overall())},
          {"confusion", report.confusion}};
}

std::string eval_csv_header() { return "model,trans_ratio,acc_O,acc_R,acc_SC,acc_SH,OA"; }

std::string eval_csv_row(std::string_view model, double ratio, const EvalReport& report) {
  std::string row = std::string(model) + ',' + format_double(ratio);
  for (const char* tag : {"O", "R", "SC", "SH"}) {
    const auto it = report.per_tag.find(tag);
    row += ',' + format_double(it == report.per_tag.end() ? std::nan("") : it->second.accuracy());
  }
  return row + ',' + format_double(report.overall());
}

}  // namespace polymp::training
