// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
//   acceptance [--work-dir DIR] [--only N,N,...]

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oracles/dp_oracle.hpp"
#include "polymp/cli.hpp"
#include "polymp/dataset.hpp"
#include "polymp/gradcheck.hpp"
#include "polymp/graph.hpp"
#include "polymp/models.hpp"
#include "polymp/training.hpp"

namespace fs = std::filesystem;
using namespace polymp;
using models::Arch;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return a.shape() == b.shape() ? m : INFINITY;
}

Tensor logits_of(const models::Model& m, const graph::PolyGraph& g) {
  NoGradGuard ng;
  return models::forward(m, models::make_batch(std::span<const graph::PolyGraph>(&g, 1), m.config)).logits;
}

models::Model fresh(Arch arch, std::size_t n_classes, std::uint64_t seed) {
  const auto cfg = models::ModelConfig::defaults(arch, n_classes);
  return {cfg, models::init_params(cfg, seed)};
}

// Star-shaped random ring, optionally with near-collinear runs.
std::vector<geometry::Point2> random_ring(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(3, 80);
  std::uniform_real_distribution<double> rad(1.0, 20.0), wiggle(-0.5, 0.5), coin(0.0, 1.0);
  const int n = count(rng);
  std::vector<geometry::Point2> pts;
  double prev = rad(rng);
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * M_PI * i / n;
    const double r = coin(rng) < 0.5 ? prev + wiggle(rng) : rad(rng);
    prev = std::max(0.5, r);
    pts.push_back({prev * std::cos(a), prev * std::sin(a)});
  }
  return pts;
}

// ---- shared state for the training criteria ------------------------------

struct Grid {
  fs::path data;
  fs::path root;
  std::map<std::string, fs::path> ckpt;  // "polymp_r0" -> checkpoint
  bool ok = true;
  std::string error;
};

fs::path train_cell(Grid& grid, const std::string& arch, const std::string& ratio, const fs::path& out) {
  std::ostringstream so, se;
  const auto t0 = std::chrono::steady_clock::now();
  const int code = cli::run({"train", "--arch", arch, "--ratio", ratio, "--data", grid.data.string(), "--out",
                             out.string(), "--seed", "0"},
                            so, se);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "  trained " << arch << " r=" << ratio << " in " << fmt(secs, 3) << " s: " << so.str() << std::flush;
  if (code != 0) {
    grid.ok = false;
    grid.error += se.str();
  }
  const double r = std::stod(ratio);
  return out / cli::checkpoint_name(models::arch_from_name(arch), r);
}

Grid& grid(const fs::path& work) {
  static Grid g = [&] {
    Grid grid;
    grid.data = work / "data";
    grid.root = work / "grid";
    fs::remove_all(grid.data);
    fs::remove_all(grid.root);
    std::ostringstream so, se;
    if (cli::run({"gen-data", "--out", grid.data.string(), "--seed", "0"}, so, se) != 0) {
      grid.ok = false;
      grid.error = se.str();
      return grid;
    }
    for (const auto& [arch, ratio] : std::vector<std::pair<std::string, std::string>>{
             {"polymp", "0"}, {"polymp", "0.8"}, {"gcn", "0.8"}, {"veercnn", "0.8"}}) {
      const std::string key = arch + "_r" + (ratio == "0" ? "0" : "80");
      grid.ckpt[key] = train_cell(grid, arch, ratio, grid.root / key);
    }
    return grid;
  }();
  return g;
}

training::EvalReport eval_cell(const Grid& g, const std::string& key, bool simplified) {
  const models::Model m = models::load_checkpoint(g.ckpt.at(key).string());
  dataset::Dataset test = dataset::load_split(g.data, "test");
  if (simplified) test = dataset::build_simplified_view(test, 1.0).dataset;
  return training::evaluate(m, test);
}

std::vector<dataset::Sample> test_samples(std::size_t per_class, std::uint64_t seed) {
  dataset::GenerationOptions opts;
  opts.per_class = per_class;
  opts.seed = seed;
  return dataset::generate_test(opts).samples;
}

// ---- criteria ----------------------------------------------------------------

Outcome permutation_invariance() {
  std::mt19937_64 rng(101);
  const auto samples = test_samples(12, 101);  // 120 polygons
  std::size_t pairs = 0;
  double worst = 0.0;
  for (Arch arch : {Arch::PolyMP, Arch::DeepSet, Arch::GCN}) {
    const auto m = fresh(arch, 10, 7);
    for (const auto& s : samples) {
      std::vector<std::uint32_t> perm(s.graph.node_count());
      std::iota(perm.begin(), perm.end(), 0u);
      std::shuffle(perm.begin(), perm.end(), rng);
      const auto a = logits_of(m, s.graph);
      const auto b = logits_of(m, graph::permute_graph(s.graph, perm));
      worst = std::max(worst, max_abs_diff(a, b));
      ++pairs;
    }
  }
  return {worst < 1e-9, std::to_string(pairs) + " pairs, max |diff| " + fmt(worst)};
}

Outcome gradient_correctness() {
  double worst = 0.0;
  std::string where;
  bool pass = true;
  for (Arch arch : {Arch::PolyMP, Arch::DeepSet, Arch::GCN, Arch::VeerCNN}) {
    auto cfg = models::ModelConfig::defaults(arch, 26);
    cfg.max_seq_len = 16;
    models::Model m{cfg, models::init_params(cfg, 3)};
    const auto graphs = gradcheck::sample_graphs(3);
    gradcheck::randomize_biases_off_kinks(m, graphs, 4);
    const auto rep = gradcheck::check_model(m, graphs);
    pass = pass && rep.passed && rep.max_rel_error < 1e-4;
    if (rep.max_rel_error >= worst) {
      worst = rep.max_rel_error;
      where = std::string(models::arch_name(arch)) + "/" + rep.worst_tensor;
    }
  }
  return {pass, "max rel err " + fmt(worst) + " at " + where};
}

Outcome loss_sanity() {
  const auto samples = test_samples(3, 5);
  std::vector<graph::PolyGraph> graphs;
  for (const auto& s : samples) graphs.push_back(s.graph);
  double worst = 0.0;
  for (Arch arch : {Arch::PolyMP, Arch::DeepSet, Arch::GCN, Arch::VeerCNN}) {
    const auto cfg = models::ModelConfig::defaults(arch, 26);
    const models::Model m{cfg, models::init_params(cfg, 9, {.zero_head = true})};
    worst = std::max(worst, std::abs(training::mean_loss(m, graphs, 7) - std::log(26.0)));
  }
  return {worst <= 1e-6, "max |loss - ln 26| " + fmt(worst)};
}

Outcome laplacian_oracle() {
  const auto samples = test_samples(5, 6);
  std::size_t checked = 0, wrong = 0;
  for (const auto& s : samples) {
    const auto w = graph::laplacian_weights(s.graph);
    for (double v : w.edge) wrong += v != 1.0 / 3.0;
    for (double v : w.self_loop) wrong += v != 1.0 / 3.0;
    checked += w.edge.size() + w.self_loop.size();
  }
  return {wrong == 0 && checked > 0, std::to_string(checked) + " weights, " + std::to_string(wrong) + " off"};
}

Outcome dp_oracle() {
  std::mt19937_64 rng(55);
  std::size_t mismatches = 0, runs = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto ring = random_ring(rng);
    std::vector<oracle::P> plain;
    for (const auto& p : ring) plain.push_back({p.x, p.y});
    for (double tol : {0.1, 1.0, 5.0}) {
      mismatches += geometry::simplify_ring_indices(ring, tol) != oracle::dp_ring(plain, tol);
      ++runs;
    }
  }
  return {mismatches == 0, std::to_string(runs) + " runs, " + std::to_string(mismatches) + " mismatches"};
}

Outcome training_smoke(const fs::path& work) {
  Grid& g = grid(work);
  if (!g.ok) return {false, g.error};
  const auto r = eval_cell(g, "polymp_r0", false);
  const double acc = r.per_tag.at("O").accuracy();
  return {acc >= 0.9, "PolyMP r0 Original-tag accuracy " + fmt(acc)};
}

Outcome augmentation_trend(const fs::path& work) {
  Grid& g = grid(work);
  if (!g.ok) return {false, g.error};
  const auto p0 = eval_cell(g, "polymp_r0", false);
  const auto p80 = eval_cell(g, "polymp_r80", false);
  const auto g80 = eval_cell(g, "gcn_r80", false);
  const double gain = p80.per_tag.at("R").accuracy() - p0.per_tag.at("R").accuracy();
  const bool pass = gain >= 0.20 && p80.overall() >= g80.overall();
  return {pass, "R acc " + fmt(p0.per_tag.at("R").accuracy()) + " -> " + fmt(p80.per_tag.at("R").accuracy()) +
                    "; r80 OA polymp " + fmt(p80.overall()) + " vs gcn " + fmt(g80.overall())};
}

Outcome simplification_robustness(const fs::path& work) {
  Grid& g = grid(work);
  if (!g.ok) return {false, g.error};
  const double p_drop = eval_cell(g, "polymp_r80", false).overall() - eval_cell(g, "polymp_r80", true).overall();
  const double v_drop = eval_cell(g, "veercnn_r80", false).overall() - eval_cell(g, "veercnn_r80", true).overall();
  return {p_drop <= v_drop && p_drop <= 0.05,
          "OA drop polymp " + fmt(p_drop) + ", veercnn " + fmt(v_drop)};
}

Outcome translation_robustness() {
  const auto samples = test_samples(10, 8);
  auto cfg = models::ModelConfig::defaults(Arch::PolyMP, 10);
  cfg.relative_only = true;
  const models::Model poly{cfg, models::init_params(cfg, 11)};
  auto vcfg = models::ModelConfig::defaults(Arch::VeerCNN, 10);
  std::vector<graph::PolyGraph> all;
  for (const auto& s : samples) all.push_back(s.graph);
  vcfg.max_seq_len = cli::sequence_length_for(all);
  const models::Model veer{vcfg, models::init_params(vcfg, 11)};
  double worst = 0.0;
  std::size_t veer_differs = 0;
  for (const auto& s : samples) {
    graph::PolyGraph moved = s.graph;
    for (std::size_t i = 0; i < moved.node_count(); ++i) {
      moved.nodes[i * graph::kNodeFeatures] += 1000.0;
      moved.nodes[i * graph::kNodeFeatures + 1] += 1000.0;
    }
    worst = std::max(worst, max_abs_diff(logits_of(poly, s.graph), logits_of(poly, moved)));
    veer_differs += max_abs_diff(logits_of(veer, s.graph), logits_of(veer, moved)) > 1e-3;
  }
  const double frac = static_cast<double>(veer_differs) / static_cast<double>(samples.size());
  return {worst <= 1e-9 && frac >= 0.9,
          "relative-only polymp max |diff| " + fmt(worst) + "; veercnn differs on " + fmt(frac)};
}

Outcome hole_sensitivity() {
  const auto samples = test_samples(20, 12);
  const auto deepset = fresh(Arch::DeepSet, 10, 13);
  const auto poly = fresh(Arch::PolyMP, 10, 13);
  std::size_t two_ring = 0, changed = 0, deepset_bitwise = 0;
  for (const auto& s : samples) {
    if (s.polygon.holes.size() != 1) continue;
    ++two_ring;
    // Re-wire the hole: connect its nodes in a different cyclic order.
    graph::PolyGraph rewired = s.graph;
    std::vector<std::uint32_t> hole;
    for (std::uint32_t i = 0; i < rewired.node_count(); ++i) {
      if (rewired.ring_flag(i) == 1.0) hole.push_back(i);
    }
    std::vector<graph::Edge> edges;
    for (const auto& e : rewired.edges) {
      if (rewired.ring_flag(e.first) == 0.0) edges.push_back(e);
    }
    std::vector<std::uint32_t> order;
    for (std::size_t k = 0; k < hole.size(); k += 2) order.push_back(hole[k]);
    for (std::size_t k = 1; k < hole.size(); k += 2) order.push_back(hole[k]);
    for (std::size_t k = 0; k < order.size(); ++k) {
      const auto a = order[k], b = order[(k + 1) % order.size()];
      edges.push_back({a, b});
      edges.push_back({b, a});
    }
    rewired.edges = edges;
    const auto d0 = logits_of(deepset, s.graph), d1 = logits_of(deepset, rewired);
    deepset_bitwise += std::equal(d0.data().begin(), d0.data().end(), d1.data().begin());

    const geometry::Polygon solid{s.polygon.exterior, {}};
    const auto no_hole = graph::encode_graph(solid, s.label);
    changed += max_abs_diff(logits_of(poly, s.graph), logits_of(poly, no_hole)) > 1e-6;
  }
  const double frac = two_ring ? static_cast<double>(changed) / static_cast<double>(two_ring) : 0.0;
  return {two_ring > 0 && deepset_bitwise == two_ring && frac >= 0.9,
          std::to_string(two_ring) + " two-ring samples; deepset bitwise " + std::to_string(deepset_bitwise) +
              "; polymp changed on " + fmt(frac)};
}

Outcome determinism(const fs::path& work) {
  Grid& g = grid(work);
  if (!g.ok) return {false, g.error};
  const fs::path again = work / "determinism" / "polymp_r0";
  fs::remove_all(again);
  const fs::path ckpt = train_cell(g, "polymp", "0", again);
  if (!g.ok) return {false, g.error};
  const fs::path first = g.ckpt.at("polymp_r0");
  const bool same_ckpt = slurp(first) == slurp(ckpt);
  const bool same_log = slurp(first.parent_path() / "log.csv") == slurp(again / "log.csv");
  return {same_ckpt && same_log, std::string("checkpoint ") + (same_ckpt ? "identical" : "differs") + ", log " +
                                     (same_log ? "identical" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string work = "acceptance_work";
  std::vector<int> only;
  app.add_option("--work-dir", work, "Scratch directory for datasets and checkpoints");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  omp_set_num_threads(1);
  const fs::path dir(work);
  fs::create_directories(dir);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"permutation invariance", permutation_invariance},
      {"gradient correctness", gradient_correctness},
      {"loss sanity", loss_sanity},
      {"gcn weight oracle", laplacian_oracle},
      {"douglas-peucker oracle", dp_oracle},
      {"training smoke", [&] { return training_smoke(dir); }},
      {"augmentation trend", [&] { return augmentation_trend(dir); }},
      {"simplification robustness", [&] { return simplification_robustness(dir); }},
      {"translation robustness", translation_robustness},
      {"hole sensitivity", hole_sensitivity},
      {"determinism", [&] { return determinism(dir); }},
  };

  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(n)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << n << "] " << criteria[i].first << ": " << o.detail << " ("
              << fmt(secs, 3) << " s)" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
