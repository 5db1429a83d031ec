// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <string>

#include "cdattack/attack.hpp"
#include "cdattack/experiment.hpp"
#include "cdattack/perturb.hpp"
#include "op_catalog.hpp"
#include "oracles.hpp"

using namespace cdattack;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void verdict(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] %d %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

Matrix one_hot(const std::vector<int>& labels, int k) {
  Matrix c = Matrix::Zero(static_cast<Index>(labels.size()), k);
  for (std::size_t i = 0; i < labels.size(); ++i) c(static_cast<Index>(i), labels[i]) = 1.0;
  return c;
}

void autodiff_soundness() {
  const auto start = Clock::now();
  double worst = 0.0;
  std::string worst_op;
  for (const auto& op : oracle::differentiable_ops()) {
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
      const double e = oracle::check_gradients(op.build, op.inputs(rng), 5000 + trial, op.training).worst_error;
      if (e > worst) {
        worst = e;
        worst_op = op.name;
      }
    }
  }
  const double t = seconds_since(start);
  verdict(1, "autodiff soundness", worst < 1e-4 && t < 60.0,
          fmt("%zu ops x 100 instances, worst relative error %.2e (%s), %.1f s", oracle::differentiable_ops().size(),
              worst, worst_op.c_str(), t));
}

void trace_identity() {
  Rng rng(2024);
  double worst_hard = 0.0;
  double worst_soft = 0.0;
  int done = 0;
  while (done < 200) {
    const Graph g = oracle::random_graph(12, 0.35, rng);
    const int k = 3;
    std::uniform_int_distribution<int> pick(0, k - 1);
    std::vector<int> labels(12);
    for (int& l : labels) l = pick(rng);
    const Matrix c = one_hot(labels, k);
    // The set form needs every community to have positive volume.
    if ((c.transpose() * g.degrees()).minCoeff() == 0.0) continue;
    const double trace = ncut_trace_term(c, g.adjacency(), g.degrees());
    worst_hard = std::max(worst_hard, std::abs((1.0 + trace) - oracle::ncut_by_sets(g, labels, k)));

    // Soft rows: the relaxed cut C_kᵀA(1 − C_k) / C_kᵀDC_k summed edge by edge.
    const Matrix soft = oracle::random_row_stochastic(12, k, rng);
    const Vector d = g.degrees();
    double relaxed = 0.0;
    double spill = 0.0;
    for (int q = 0; q < k; ++q) {
      double cut = 0.0, vol = 0.0;
      for (const Edge& e : g.edges()) {
        cut += soft(e.u, q) * (1.0 - soft(e.v, q)) + soft(e.v, q) * (1.0 - soft(e.u, q));
      }
      for (Index i = 0; i < 12; ++i) vol += d(i) * soft(i, q) * soft(i, q);
      relaxed += cut / vol;
      spill += soft.col(q).dot(d) / vol;
    }
    relaxed /= k;
    spill /= k;
    worst_soft = std::max(worst_soft, std::abs(relaxed - (spill + ncut_trace_term(soft, g.adjacency(), d))));
    ++done;
  }
  verdict(2, "normalized-cut trace identity", worst_hard < 1e-10 && worst_soft < 1e-10,
          fmt("200 one-hot assignments: max |set - trace| %.2e; 200 soft assignments: max |relaxed - (spill + "
              "trace)| %.2e",
              worst_hard, worst_soft));
}

void hand_oracles() {
  const Graph triangles = oracle::two_triangles();
  const double tri = unsupervised_loss(one_hot({0, 0, 0, 1, 1, 1}, 2), triangles.adjacency(), triangles.degrees(), 0.0);
  const Graph k4(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}, Matrix::Ones(4, 1));
  const double split = unsupervised_loss(one_hot({0, 0, 1, 1}, 2), k4.adjacency(), k4.degrees(), 0.0);
  bool ok = std::abs(tri + 1.0) < 1e-9 && std::abs(split + 1.0 / 3.0) < 1e-9;

  Rng rng(8);
  std::size_t checked = 0;
  double worst = 0.0;
  for (int n = 2; n <= 8; ++n) {
    for (const std::vector<int>& labels : oracle::all_partitions(n)) {
      const int k = std::max(2, *std::max_element(labels.begin(), labels.end()) + 1);
      std::uniform_int_distribution<int> size(1, n);
      std::vector<NodeId> ids(static_cast<std::size_t>(n));
      std::iota(ids.begin(), ids.end(), 0);
      std::shuffle(ids.begin(), ids.end(), rng);
      ids.resize(static_cast<std::size_t>(size(rng)));
      const std::set<int> targets(ids.begin(), ids.end());
      worst = std::max(worst, std::abs(m1(labels, ids, k) - oracle::m1_by_sets(labels, targets, k)));
      worst = std::max(worst, std::abs(m2(labels, ids) - oracle::m2_by_sets(labels, targets)));
      ++checked;
    }
  }
  ok = ok && worst < 1e-12;
  verdict(3, "hand oracles", ok,
          fmt("two triangles %.12f, K4 2/2 %.12f, M1/M2 on %zu partitions max deviation %.1e", tri, split, checked,
              worst));
}

void budget_exactness() {
  int violations = 0;
  int runs = 0;
  int delete_only = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Benchmark b = sbm_generate({.blocks = 3, .per_block = 10, .p_in = 0.4, .p_out = 0.05, .feature_dim = 3,
                                      .feature_noise = 0.5, .seed = seed});
    AttackConfig cfg;
    cfg.budget = 1 + seed % 12;
    cfg.mode = seed % 2 == 0 ? AttackMode::delete_only : AttackMode::delete_insert;
    cfg.iterations = 3;
    cfg.detector_epochs = 1;
    cfg.encoder_hidden = 8;
    cfg.latent = 4;
    cfg.decoder_hidden = 8;
    cfg.seed = seed;
    cfg.detector.communities = 3;
    cfg.detector.hidden = 8;
    cfg.detector.embedding = 4;
    cfg.detector.assign_hidden = 8;
    cfg.detector.seed = seed;
    const Detector det(b.graph.feature_dim(), cfg.detector);
    const std::vector<NodeId> targets{0, 1, 2, 3};
    const AttackResult r = train_attack(b.graph, targets, cfg, det);
    ++runs;
    bool valid = true;
    try {
      validate_edits(b.graph, r.edits);
    } catch (const std::exception&) {
      valid = false;
    }
    for (const Edge& e : r.edits.inserted) valid = valid && e.u != e.v;
    const std::size_t used = budget_used(b.graph, apply_edits(b.graph, r.edits));
    const bool exact = cfg.mode != AttackMode::delete_only ||
                       (used == cfg.budget && r.edits.deleted.size() == cfg.budget && r.edits.inserted.empty());
    const bool split = cfg.mode != AttackMode::delete_insert ||
                       (r.edits.deleted.size() == cfg.budget / 2 && r.edits.inserted.size() == cfg.budget - cfg.budget / 2);
    if (!valid || used > cfg.budget || !exact || !split) ++violations;
    delete_only += cfg.mode == AttackMode::delete_only ? 1 : 0;
  }
  verdict(4, "budget exactness", violations == 0,
          fmt("%d attack runs (%d delete-only), %d violations", runs, delete_only, violations));
}

void detection_quality() {
  double total = 0.0;
  double slowest = 0.0;
  std::string per;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto start = Clock::now();
    const Benchmark b = sbm_generate({.seed = seed});
    DetectorConfig cfg;
    cfg.seed = seed;
    const TrainedDetector t = train_detector(std::span<const Graph>(&b.graph, 1), cfg);
    const double acc = oracle::best_matching_accuracy(t.assignments.front().hard, b.blocks, 10);
    slowest = std::max(slowest, seconds_since(start));
    total += acc;
    per += fmt("%s%.3f", seed ? " " : "", acc);
  }
  verdict(5, "detection quality", total / 5.0 >= 0.7 && slowest < 300.0,
          fmt("matched accuracy mean %.3f over seeds [%s], slowest seed %.1f s", total / 5.0, per.c_str(), slowest));
}

RunConfig benchmark_config() {
  RunConfig c;
  c.target_partition = TargetPartition::planted;
  c.target_community = 0;
  c.targets_top = 2;
  c.targets_random = 2;
  c.seeds = {0, 1, 2, 3, 4};
  c.deltas = {2, 6, 10};
  return c;
}

struct Means {
  double m2 = 0.0, hide = 0.0, hide_clean = 0.0, local = 0.0, global = 0.0;
  int n = 0;
};

void attack_experiments() {
  const RunConfig config = benchmark_config();
  const auto start = Clock::now();
  const ExperimentResult result = run_experiment(config);
  const double total = seconds_since(start);

  std::map<std::pair<std::string, std::size_t>, Means> means;
  std::map<std::uint64_t, double> per_seed_time;
  std::string raw;
  for (const MethodReport& r : result.runs) {
    per_seed_time[r.seed] += r.wall_seconds;
    if (!r.ok) {
      raw += fmt("  %s d=%zu seed=%llu failed: %s\n", r.method.c_str(), r.delta, (unsigned long long)r.seed,
                 r.error.c_str());
      continue;
    }
    Means& m = means[{r.method, r.delta}];
    m.m2 += r.attacked.m2;
    m.hide += r.hide;
    m.hide_clean += r.hide_clean;
    m.local += r.perturb.l_perturb_local;
    m.global += r.perturb.l_perturb_global;
    ++m.n;
  }
  for (auto& [key, m] : means) {
    m.m2 /= m.n;
    m.hide /= m.n;
    m.hide_clean /= m.n;
    m.local /= m.n;
    m.global /= m.n;
  }
  std::printf("benchmark runs (%zu, %.0f s total):\n%s", result.runs.size(), total, raw.c_str());
  for (const auto& [key, m] : means) {
    std::printf("  %-9s d=%-2zu n=%d  M2 %.4f  hide %.3e (clean %.3e)  L_perturb local %.5f global %.6f\n",
                key.first.c_str(), key.second, m.n, m.m2, m.hide, m.hide_clean, m.local, m.global);
  }
  double slowest = 0.0;
  for (const auto& [seed, t] : per_seed_time) slowest = std::max(slowest, t);
  const bool complete = result.all_ok;

  const Means& cd = means[{"CD-ATTACK", 10}];
  const Means& rta = means[{"RTA", 10}];
  verdict(6, "attack effectiveness",
          complete && cd.m2 >= rta.m2 && cd.hide > cd.hide_clean && slowest < 900.0,
          fmt("Δ=10: mean M2 CD-ATTACK %.4f vs RTA %.4f; mean hide on attacked graph %.3e vs clean %.3e; slowest "
              "seed %.0f s",
              cd.m2, rta.m2, cd.hide, cd.hide_clean, slowest) +
              (cd.m2 == rta.m2 ? " (M2 tie: flagged)" : ""));

  const Means& cd2 = means[{"CD-ATTACK", 2}];
  verdict(7, "budget sweep", complete && cd.m2 >= cd2.m2,
          fmt("CD-ATTACK mean M2 at Δ=2 %.4f, Δ=6 %.4f, Δ=10 %.4f", cd2.m2, means[{"CD-ATTACK", 6}].m2, cd.m2) +
              (cd.m2 == cd2.m2 ? " (no change across budgets: flagged)" : ""));

  int lost = 0;
  std::string detail = fmt("Δ=10 mean local L_perturb: CD-ATTACK %.5f", cd.local);
  for (const char* baseline : {"DICE", "MBA", "RTA"}) {
    const Means& b = means[{baseline, 10}];
    const bool wins = cd.local <= b.local;
    lost += wins ? 0 : 1;
    detail += fmt(", %s %.5f%s", baseline, b.local, wins ? "" : " (CD-ATTACK higher)");
  }
  if (lost == 1) detail += "; one comparison lost, within tolerance (flagged)";
  verdict(8, "imperceptibility ordering", complete && lost <= 1, detail);
}

void determinism() {
  RunConfig c = benchmark_config();
  c.seeds = {0};
  c.deltas = {10};
  const std::string first = run_experiment(c).summary_csv;
  const std::string second = run_experiment(c).summary_csv;
  verdict(9, "determinism", first == second,
          fmt("two runs of seed 0, Δ=10, all methods: summary CSVs %s (%zu bytes)",
              first == second ? "byte-identical" : "differ", first.size()));
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<void()>>> criteria{
      {1, autodiff_soundness}, {2, trace_identity}, {3, hand_oracles},       {4, budget_exactness},
      {5, detection_quality},  {6, attack_experiments}, {9, determinism}};
  for (const auto& [id, run] : criteria) {
    try {
      run();
    } catch (const std::exception& e) {
      verdict(id, "criterion threw", false, e.what());
    }
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
