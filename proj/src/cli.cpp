#include "polymp/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "polymp/error.hpp"
#include "polymp/gradcheck.hpp"

namespace polymp::cli {

namespace {

namespace fs = std::filesystem;
using models::Arch;
using training::format_double;

constexpr double kAllRatios[] = {0.0, 0.2, 0.4, 0.6, 0.8};
constexpr Arch kAllArchs[] = {Arch::DeepSet, Arch::GCN, Arch::PolyMP, Arch::VeerCNN};

const std::map<std::string, Arch>& arch_map() {
  static const std::map<std::string, Arch> m = {
      {"deepset", Arch::DeepSet}, {"gcn", Arch::GCN}, {"polymp", Arch::PolyMP}, {"veercnn", Arch::VeerCNN}};
  return m;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IOErr, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::IOErr, "write failed for " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::IOErr, "cannot create " + dir.string() + ": " + ec.message());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double check_ratio(double ratio) {
  if (!dataset::valid_ratio(ratio)) {
    fail(ErrorCode::InvalidRatio, "ratio " + format_double(ratio) + " is not one of 0, 0.2, 0.4, 0.6, 0.8");
  }
  return ratio;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IOErr, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::InvalidArgument, path.string() + " is not JSON: " + e.what());
  }
}

// Checkpoint plus the run metadata the CLI keeps next to it.
void save_run_checkpoint(const models::Model& model, double ratio, const fs::path& path) {
  nlohmann::json j = models::checkpoint_to_json(model);
  j["meta"] = {{"trans_ratio", ratio}};
  write_text(path, j.dump() + "\n");
}

double checkpoint_ratio(const fs::path& path) {
  const nlohmann::json j = read_json(path);
  if (j.contains("meta") && j["meta"].contains("trans_ratio")) return j["meta"]["trans_ratio"].get<double>();
  return std::nan("");
}

void check_compatible(const models::Model& model, const dataset::Dataset& data) {
  if (model.config.n_classes != data.class_names.size()) {
    fail(ErrorCode::IncompatibleCheckpoint,
         "checkpoint has " + std::to_string(model.config.n_classes) + " classes, dataset has " +
             std::to_string(data.class_names.size()));
  }
}

// ---- gen-data --------------------------------------------------------------

struct GenArgs {
  std::string classes;
  std::size_t per_class = 100;
  std::size_t test_per_class = 40;
  std::size_t points_per_edge = 3;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_gen_data(const GenArgs& a, std::ostream& out) {
  dataset::GenerationOptions opts;
  if (!a.classes.empty()) opts.classes = split_list(a.classes);
  for (const auto& c : opts.classes) dataset::shape_class(c);
  opts.per_class = a.per_class;
  opts.points_per_edge = a.points_per_edge;
  opts.seed = a.seed;
  if (a.per_class == 0 || a.test_per_class == 0) fail(ErrorCode::EmptyDataset, "--per-class must be positive");

  const dataset::Dataset base = dataset::generate_base(opts);
  dataset::GenerationOptions test_opts = opts;
  test_opts.per_class = a.test_per_class;
  test_opts.id_offset = base.samples.size();
  const dataset::Dataset test = dataset::generate_test(test_opts);

  const fs::path dir(a.out);
  ensure_dir(dir);
  std::error_code ec;
  fs::remove(dir / "manifest.json", ec);
  for (double r : kAllRatios) {
    const dataset::Dataset split = dataset::build_ratio_split(base, r, a.seed);
    dataset::save_split(dir, split_name(r), split, a.seed);
    out << split_name(r) << ": " << split.samples.size() << " samples\n";
  }
  dataset::save_split(dir, "test", test, a.seed);
  out << "test: " << test.samples.size() << " samples\n";
  return 0;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string arch = "polymp";
  double ratio = 0.0;
  std::string data;
  std::string config;
  std::string out;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
  double lr = 0.0;
  std::size_t batch_size = 0;
  bool timing = false;
  bool verbose = false;
};

training::TrainConfig resolve_config(const std::string& config_path) {
  training::TrainConfig cfg;
  if (!config_path.empty()) cfg = training::train_config_from_json(read_json(config_path), cfg);
  return cfg;
}

int cmd_train(const TrainArgs& a, const CLI::App& sub, std::ostream& out) {
  TrainJob job;
  job.arch = arch_map().at(a.arch);
  job.ratio = check_ratio(a.ratio);
  job.data = a.data;
  job.out = a.out;
  job.config = resolve_config(a.config);
  if (sub.count("--epochs")) job.config.max_epochs = a.epochs;
  if (sub.count("--seed")) job.config.seed = a.seed;
  if (sub.count("--lr")) job.config.lr = a.lr;
  if (sub.count("--batch-size")) job.config.batch_size = a.batch_size;
  job.config.timing = a.timing;
  training::validate(job.config);

  std::ostringstream sink;
  const TrainOutcome res = run_train(job, a.verbose ? out : sink);
  out << training::eval_csv_header() << '\n'
      << training::eval_csv_row(a.arch, job.ratio, res.test) << '\n';
  return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string ckpt;
  std::string data;
  std::string split = "test";
  bool simplified = false;
  double tolerance = 1.0;
  std::string out;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const models::Model model = models::load_checkpoint(a.ckpt);
  dataset::Dataset data = dataset::load_split(a.data, a.split);
  check_compatible(model, data);
  std::size_t dropped = 0;
  if (a.simplified) {
    auto view = dataset::build_simplified_view(data, a.tolerance);
    data = std::move(view.dataset);
    dropped = view.dropped;
  }
  const training::EvalReport report = training::evaluate(model, data);
  const std::string name(models::arch_name(model.config.arch));
  const double ratio = checkpoint_ratio(a.ckpt);
  out << training::eval_csv_header() << '\n' << training::eval_csv_row(name, ratio, report) << '\n';
  if (a.simplified) out << "simplified view: " << dropped << " samples dropped\n";
  if (!a.out.empty()) {
    const auto graphs = training::graphs_of(data);
    const auto pred = training::predict(model, graphs);
    nlohmann::json predictions = nlohmann::json::array();
    for (std::size_t i = 0; i < pred.size(); ++i) {
      predictions.push_back({{"id", data.samples[i].id}, {"label", data.samples[i].label}, {"prediction", pred[i]}});
    }
    nlohmann::json j = {{"model", name},
                        {"trans_ratio", std::isnan(ratio) ? nlohmann::json(nullptr) : nlohmann::json(ratio)},
                        {"simplified", a.simplified},
                        {"dropped", dropped},
                        {"report", training::report_to_json(report)},
                        {"predictions", predictions}};
    write_text(a.out, j.dump(2) + "\n");
  }
  return 0;
}

// ---- benchmark -------------------------------------------------------------

struct BenchArgs {
  std::string archs;
  std::string ratios;
  std::string data;
  std::string out;
  std::string config;
  std::size_t epochs = 0;
  bool force = false;
  bool verbose = false;
};

int cmd_benchmark(const BenchArgs& a, const CLI::App& sub, std::ostream& out) {
  std::vector<Arch> archs;
  if (a.archs.empty()) {
    archs.assign(std::begin(kAllArchs), std::end(kAllArchs));
  } else {
    for (const auto& name : split_list(a.archs)) archs.push_back(models::arch_from_name(name));
  }
  std::sort(archs.begin(), archs.end(),
            [](Arch x, Arch y) { return models::arch_name(x) < models::arch_name(y); });
  archs.erase(std::unique(archs.begin(), archs.end()), archs.end());

  std::vector<double> ratios;
  if (a.ratios.empty()) {
    ratios.assign(std::begin(kAllRatios), std::end(kAllRatios));
  } else {
    for (const auto& r : split_list(a.ratios)) ratios.push_back(check_ratio(std::stod(r)));
  }
  std::sort(ratios.begin(), ratios.end());
  ratios.erase(std::unique(ratios.begin(), ratios.end()), ratios.end());

  training::TrainConfig cfg = resolve_config(a.config);
  if (sub.count("--epochs")) cfg.max_epochs = a.epochs;

  const dataset::Dataset test = dataset::load_split(a.data, "test");
  const auto simplified = dataset::build_simplified_view(test, 1.0);
  const fs::path root(a.out);
  ensure_dir(root);

  std::string table_t = training::eval_csv_header() + "\n";
  std::string table_s = table_t;
  std::map<double, std::pair<double, std::string>> best;
  for (Arch arch : archs) {
    for (double r : ratios) {
      const std::string name(models::arch_name(arch));
      const fs::path cell = root / (name + "_r" + std::to_string(dataset::ratio_percent(r)));
      const fs::path ckpt = cell / checkpoint_name(arch, r);
      models::Model model;
      if (!a.force && fs::exists(ckpt)) {
        model = models::load_checkpoint(ckpt.string());
        out << name << " r" << dataset::ratio_percent(r) << ": reusing " << ckpt.string() << '\n';
      } else {
        TrainJob job{arch, r, a.data, cell, cfg};
        std::ostringstream sink;
        model = run_train(job, a.verbose ? out : sink).model;
        out << name << " r" << dataset::ratio_percent(r) << ": trained\n";
      }
      check_compatible(model, test);
      const auto rt = training::evaluate(model, test);
      const auto rs = training::evaluate(model, simplified.dataset);
      table_t += training::eval_csv_row(name, r, rt) + "\n";
      table_s += training::eval_csv_row(name, r, rs) + "\n";
      auto& slot = best[r];
      if (slot.second.empty() || rt.overall() > slot.first) slot = {rt.overall(), name};
    }
  }
  write_text(root / "table_transform.csv", table_t);
  write_text(root / "table_simplified.csv", table_s);
  out << table_t << "simplified test view (" << simplified.dropped << " dropped)\n" << table_s;
  for (const auto& [r, b] : best) {
    out << "best O.A. at ratio " << format_double(r) << ": " << b.second << " " << format_double(b.first)
        << '\n';
  }
  return 0;
}

// ---- gradcheck -------------------------------------------------------------

struct GradArgs {
  std::string arch = "polymp";
  std::uint64_t seed = 0;
  double fault = 0.0;
};

int cmd_gradcheck(const GradArgs& a, std::ostream& out) {
  models::ModelConfig cfg = models::ModelConfig::defaults(arch_map().at(a.arch));
  cfg.max_seq_len = 16;
  models::Model model{cfg, models::init_params(cfg, a.seed)};
  const auto graphs = gradcheck::sample_graphs(a.seed);
  gradcheck::randomize_biases_off_kinks(model, graphs, a.seed + 1);
  gradcheck::Options opts;
  opts.fault = a.fault;
  const auto report = gradcheck::check_model(model, graphs, opts);
  for (const auto& t : report.tensors) {
    out << t.name << " size=" << t.size << " max_rel_err=" << format_double(t.max_rel_error) << '\n';
  }
  out << "max_rel_err=" << format_double(report.max_rel_error) << " worst=" << report.worst_tensor << '\n';
  if (!report.passed) {
    fail(ErrorCode::GradCheckFailed,
         "worst tensor " + report.worst_tensor + " rel. error " + format_double(report.max_rel_error));
  }
  return 0;
}

// ---- saliency --------------------------------------------------------------

struct SaliencyArgs {
  std::string ckpt;
  std::string data;
  std::string split = "test";
  std::string ids;
  std::string out;
};

int cmd_saliency(const SaliencyArgs& a, std::ostream& out) {
  const models::Model model = models::load_checkpoint(a.ckpt);
  const dataset::Dataset data = dataset::load_split(a.data, a.split);
  check_compatible(model, data);
  const fs::path dir(a.out);
  ensure_dir(dir);
  for (const auto& token : split_list(a.ids)) {
    std::uint64_t id = 0;
    try {
      id = std::stoull(token);
    } catch (const std::exception&) {
      fail(ErrorCode::InvalidArgument, "bad sample id '" + token + "'");
    }
    const auto it = std::find_if(data.samples.begin(), data.samples.end(),
                                 [id](const dataset::Sample& s) { return s.id == id; });
    if (it == data.samples.end()) fail(ErrorCode::SampleNotFound, "no sample with id " + token);
    const graph::PolyGraph& g = it->graph;
    const auto sal = models::node_saliency(model, g);
    const int pred = training::predict(model, std::span<const graph::PolyGraph>(&g, 1)).at(0);

    nlohmann::json nodes = nlohmann::json::array();
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      nodes.push_back({{"x", g.x(i)}, {"y", g.y(i)}, {"ring_flag", g.ring_flag(i)}, {"saliency", sal[i]}});
    }
    const nlohmann::json j = {{"id", id},
                              {"label", it->label},
                              {"class", data.class_names.at(static_cast<std::size_t>(it->label))},
                              {"prediction", pred},
                              {"predicted_class", data.class_names.at(static_cast<std::size_t>(pred))},
                              {"nodes", nodes}};
    const std::string stem = "saliency_" + std::to_string(id);
    write_text(dir / (stem + ".json"), j.dump(2) + "\n");
    write_text(dir / (stem + ".svg"), saliency_svg(g, sal));
    out << stem << ": label " << it->label << " prediction " << pred << '\n';
  }
  return 0;
}

}  // namespace

std::string split_name(double ratio) { return "train_r" + std::to_string(dataset::ratio_percent(ratio)); }

std::string checkpoint_name(Arch arch, double ratio) {
  return std::string(models::arch_name(arch)) + "_r" + std::to_string(dataset::ratio_percent(ratio)) +
         ".ckpt.json";
}

std::size_t sequence_length_for(std::span<const graph::PolyGraph> graphs) {
  if (graphs.empty()) fail(ErrorCode::EmptyDataset, "no graphs to size sequences for");
  std::vector<std::size_t> counts;
  counts.reserve(graphs.size());
  for (const auto& g : graphs) counts.push_back(g.node_count());
  std::sort(counts.begin(), counts.end());
  // Nearest-rank percentile.
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(counts.size())));
  const std::size_t p95 = counts[std::max<std::size_t>(rank, 1) - 1];
  return (p95 + 7) / 8 * 8;
}

TrainOutcome run_train(const TrainJob& job, std::ostream& log) {
  check_ratio(job.ratio);
  const dataset::Dataset train_data = dataset::load_split(job.data, split_name(job.ratio));
  const dataset::Dataset test = dataset::load_split(job.data, "test");
  if (train_data.class_names != test.class_names) {
    fail(ErrorCode::CorruptRecord, "train and test splits disagree on class names");
  }
  ensure_dir(job.out);

  models::ModelConfig cfg = models::ModelConfig::defaults(job.arch, train_data.class_names.size());
  if (job.arch == Arch::VeerCNN) {
    cfg.max_seq_len = sequence_length_for(training::graphs_of(train_data));
  }
  models::Model model{cfg, models::init_params(cfg, job.config.seed)};

  training::TrainResult res = training::train(std::move(model), train_data, job.config);
  for (const auto& r : res.log) {
    log << "epoch " << r.epoch << " train " << format_double(r.train_loss) << " val "
        << format_double(r.val_loss) << " lr " << format_double(r.lr) << '\n';
  }

  TrainOutcome outcome;
  outcome.test = training::evaluate(res.model, test);
  outcome.checkpoint = job.out / checkpoint_name(job.arch, job.ratio);
  save_run_checkpoint(res.model, job.ratio, outcome.checkpoint);
  write_text(job.out / "log.csv", training::log_csv(res.log));
  const nlohmann::json eval = {{"model", models::arch_name(job.arch)},
                               {"trans_ratio", job.ratio},
                               {"epochs_run", res.log.size()},
                               {"best_epoch", res.best_epoch},
                               {"early_stopped", res.early_stopped},
                               {"train_config", training::to_json(job.config)},
                               {"test", training::report_to_json(outcome.test)}};
  write_text(job.out / "eval.json", eval.dump(2) + "\n");
  outcome.model = std::move(res.model);
  return outcome;
}

std::string saliency_svg(const graph::PolyGraph& g, std::span<const double> saliency) {
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"-1.1 -1.1 2.2 2.2\" width=\"400\" height=\"400\">\n"
      << "<g transform=\"scale(1,-1)\">\n";
  const geometry::Polygon poly = graph::decode_polygon(g);
  svg << "<path fill=\"#eeeeee\" fill-rule=\"evenodd\" stroke=\"#888888\" stroke-width=\"0.01\" d=\"";
  auto ring_path = [&svg](const geometry::LinearRing& ring) {
    for (std::size_t i = 0; i < ring.size(); ++i) {
      svg << (i == 0 ? "M" : " L") << format_double(ring[i].x) << ' ' << format_double(ring[i].y);
    }
    svg << " Z ";
  };
  ring_path(poly.exterior);
  for (const auto& h : poly.holes) ring_path(h);
  svg << "\"/>\n";
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    // Darker is more salient.
    const int level = static_cast<int>(std::lround(255.0 * (1.0 - std::clamp(saliency[i], 0.0, 1.0))));
    svg << "<circle cx=\"" << format_double(g.x(i)) << "\" cy=\"" << format_double(g.y(i))
        << "\" r=\"0.03\" fill=\"rgb(" << level << ',' << level << ',' << level
        << ")\" stroke=\"#000000\" stroke-width=\"0.004\"/>\n";
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Polygon shape classification with message passing networks", "polymp"};
  app.require_subcommand(1);
  std::vector<std::string> arch_names;
  for (const auto& [name, arch] : arch_map()) arch_names.push_back(name);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate the synthetic letter datasets");
  gen_cmd->add_option("--classes", gen.classes, "Comma-separated class names (default: all ten)");
  gen_cmd->add_option("--per-class", gen.per_class, "Training samples per class")->capture_default_str();
  gen_cmd->add_option("--test-per-class", gen.test_per_class, "Test samples per class")->capture_default_str();
  gen_cmd->add_option("--points-per-edge", gen.points_per_edge, "Trivial vertices per edge")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Master seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train one model on one transformation ratio");
  train_cmd->add_option("--arch", tr.arch, "Architecture")->check(CLI::IsMember(arch_names))->capture_default_str();
  train_cmd->add_option("--ratio", tr.ratio, "Transformation ratio")->capture_default_str();
  train_cmd->add_option("--data", tr.data, "Dataset directory")->required();
  train_cmd->add_option("--config", tr.config, "Flat JSON training config")->check(CLI::ExistingFile);
  train_cmd->add_option("--out", tr.out, "Output directory")->required();
  train_cmd->add_option("--epochs", tr.epochs, "Maximum epochs");
  train_cmd->add_option("--seed", tr.seed, "Seed for init, shuffling and validation split");
  train_cmd->add_option("--lr", tr.lr, "Initial learning rate");
  train_cmd->add_option("--batch-size", tr.batch_size, "Mini-batch size");
  train_cmd->add_flag("--timing", tr.timing, "Record wall-clock seconds in log.csv");
  train_cmd->add_flag("--verbose", tr.verbose, "Print per-epoch losses");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", ev.data, "Dataset directory")->required();
  eval_cmd->add_option("--split", ev.split, "Split name")->capture_default_str();
  eval_cmd->add_flag("--simplified", ev.simplified, "Evaluate the Douglas-Peucker view");
  eval_cmd->add_option("--tolerance", ev.tolerance, "Simplification tolerance")->capture_default_str();
  eval_cmd->add_option("--out", ev.out, "Write report and predictions as JSON");

  BenchArgs be;
  auto* bench_cmd = app.add_subcommand("benchmark", "Train and evaluate the arch x ratio grid");
  bench_cmd->add_option("--archs", be.archs, "Comma-separated architectures (default: all)");
  bench_cmd->add_option("--ratios", be.ratios, "Comma-separated ratios (default: all)");
  bench_cmd->add_option("--data", be.data, "Dataset directory")->required();
  bench_cmd->add_option("--out", be.out, "Output directory")->required();
  bench_cmd->add_option("--config", be.config, "Flat JSON training config")->check(CLI::ExistingFile);
  bench_cmd->add_option("--epochs", be.epochs, "Maximum epochs");
  bench_cmd->add_flag("--force", be.force, "Retrain cells that already have a checkpoint");
  bench_cmd->add_flag("--verbose", be.verbose, "Print per-epoch losses");

  GradArgs gr;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every parameter");
  grad_cmd->add_option("--arch", gr.arch, "Architecture")->check(CLI::IsMember(arch_names))->capture_default_str();
  grad_cmd->add_option("--seed", gr.seed, "Seed")->capture_default_str();
  grad_cmd->add_option("--inject-fault", gr.fault, "Scale one analytic gradient by (1 + x)");

  SaliencyArgs sa;
  auto* sal_cmd = app.add_subcommand("saliency", "Export per-vertex saliency as JSON and SVG");
  sal_cmd->add_option("--ckpt", sa.ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  sal_cmd->add_option("--data", sa.data, "Dataset directory")->required();
  sal_cmd->add_option("--split", sa.split, "Split name")->capture_default_str();
  sal_cmd->add_option("--ids", sa.ids, "Comma-separated sample ids")->required();
  sal_cmd->add_option("--out", sa.out, "Output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: Usage: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen, out);
    if (*train_cmd) return cmd_train(tr, *train_cmd, out);
    if (*eval_cmd) return cmd_eval(ev, out);
    if (*bench_cmd) return cmd_benchmark(be, *bench_cmd, out);
    if (*grad_cmd) return cmd_gradcheck(gr, out);
    if (*sal_cmd) return cmd_saliency(sa, out);
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: Internal: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace polymp::cli
