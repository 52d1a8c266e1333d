#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "polymp/dataset.hpp"
#include "polymp/models.hpp"

namespace polymp::training {

struct TrainConfig {
  double lr = 0.01;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 100;
  std::size_t plateau_patience = 25;
  double plateau_factor = 10.0;
  std::size_t early_stop_patience = 50;
  double min_delta = 1e-4;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
  bool timing = false;  // record wall-clock seconds per epoch (otherwise 0)
};

void validate(const TrainConfig& cfg);  // throws InvalidArgument

nlohmann::json to_json(const TrainConfig& cfg);
// Flat JSON; absent keys keep the values already in `base`.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// Bias-corrected Adam update from each tensor's grad. Throws MissingGradient.
void adam_step(std::span<Tensor> params, AdamState& state, double lr);
void adam_step(models::ModelParams& params, AdamState& state, double lr);

// Reduce-on-plateau over a minimized metric.
class PlateauScheduler {
 public:
  PlateauScheduler(std::size_t patience, double factor, double min_delta = 1e-4)
      : patience_(patience), factor_(factor), min_delta_(min_delta) {}

  // Feeds one epoch's metric and returns the learning rate for the next epoch.
  double step(double metric, double lr);

 private:
  std::size_t patience_;
  double factor_;
  double min_delta_;
  double best_ = 0.0;
  bool seen_ = false;
  std::size_t bad_epochs_ = 0;
};

// Replays the scheduler over `history` starting from `lr`.
double lr_on_plateau(std::span<const double> history, double lr, std::size_t patience = 25,
                     double factor = 10.0, double min_delta = 1e-4);

// True when none of the last `patience` epochs improved on the best so far by
// more than min_delta.
bool early_stop(std::span<const double> history, std::size_t patience = 50, double min_delta = 1e-4);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  models::Model model;
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
  bool early_stopped = false;
};

// Mean cross-entropy in batches, no tape.
double mean_loss(const models::Model& model, std::span<const graph::PolyGraph> graphs,
                 std::size_t batch_size = 64);

// Mini-batch training; weights of the best validation epoch are restored.
// With an empty validation set the training loss drives scheduling.
// Throws EmptyDataset, LabelOutOfRange.
TrainResult train(models::Model model, std::span<const graph::PolyGraph> train_set,
                  std::span<const graph::PolyGraph> val_set, const TrainConfig& cfg);

// Splits off a stratified validation set and trains.
TrainResult train(models::Model model, const dataset::Dataset& data, const TrainConfig& cfg);

// Keeps every non-head tensor of `pretrained`, freshly initializes the
// head for `target.n_classes`, then trains all layers.
// Throws IncompatibleBackbone.
TrainResult fine_tune(const models::Model& pretrained, const models::ModelConfig& target,
                      std::span<const graph::PolyGraph> train_set,
                      std::span<const graph::PolyGraph> val_set, const TrainConfig& cfg);

std::vector<graph::PolyGraph> graphs_of(const dataset::Dataset& data);

// Argmax of the logits, first index on ties.
std::vector<int> predict(const models::Model& model, std::span<const graph::PolyGraph> graphs,
                         std::size_t batch_size = 64);

struct TagStats {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const;  // NaN when total == 0
};

struct EvalReport {
  std::map<std::string, TagStats> per_tag;  // keys O, R, SC, SH
  std::size_t correct = 0;
  std::size_t total = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  double overall() const;
};

EvalReport evaluate(const models::Model& model, const dataset::Dataset& data,
                    std::size_t batch_size = 64);  // throws EmptyDataset

// ---- output formats --------------------------------------------------------

std::string log_csv(const std::vector<EpochRecord>& log);
nlohmann::json report_to_json(const EvalReport& report);
std::string eval_csv_header();  // model,trans_ratio,acc_O,acc_R,acc_SC,acc_SH,OA
std::string eval_csv_row(std::string_view model, double ratio, const EvalReport& report);

// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace polymp::training
