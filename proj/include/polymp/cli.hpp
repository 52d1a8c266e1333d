#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "polymp/dataset.hpp"
#include "polymp/models.hpp"
#include "polymp/training.hpp"

namespace polymp::cli {

// Exit codes: 0 success, 1 runtime error, 2 usage error. Errors are one line
// on `err`: "error: <Code>: <message>".
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

std::string split_name(double ratio);                             // "train_r80"
std::string checkpoint_name(models::Arch arch, double ratio);     // "polymp_r80.ckpt.json"

// 95th percentile of vertex counts, rounded up to a multiple of 8.
std::size_t sequence_length_for(std::span<const graph::PolyGraph> graphs);

struct TrainJob {
  models::Arch arch = models::Arch::PolyMP;
  double ratio = 0.0;
  std::filesystem::path data;
  std::filesystem::path out;
  training::TrainConfig config;
};

struct TrainOutcome {
  models::Model model;
  training::EvalReport test;
  std::filesystem::path checkpoint;
};

// Trains on <data>/train_rNN, evaluates on <data>/test and writes the
// checkpoint, log.csv and eval.json into `out`.
TrainOutcome run_train(const TrainJob& job, std::ostream& log);

std::string saliency_svg(const graph::PolyGraph& g, std::span<const double> saliency);

}  // namespace polymp::cli
