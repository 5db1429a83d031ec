#include <algorithm>
#include <cmath>
#include <set>

#include "cdattack/baselines.hpp"
#include "cdattack/perturb.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace cdattack;

namespace {

Graph star(NodeId leaves) {
  std::vector<Edge> edges;
  for (NodeId v = 1; v <= leaves; ++v) edges.push_back({0, v});
  return Graph(leaves + 1, std::move(edges), Matrix::Ones(leaves + 1, 1));
}

Graph two_triangles() { return Graph(6, {{0, 1}, {0, 2}, {1, 2}, {3, 4}, {3, 5}, {4, 5}}, Matrix::Ones(6, 1)); }

// Lowest modularity reachable with one admissible MBA edit, by rebuilding the edge list.
double best_single_edit(const Graph& g, const std::set<NodeId>& targets, const std::vector<int>& part) {
  double best = std::numeric_limits<double>::infinity();
  for (NodeId a = 0; a < g.num_nodes(); ++a) {
    for (NodeId b = a + 1; b < g.num_nodes(); ++b) {
      if (!targets.contains(a) && !targets.contains(b)) continue;
      const bool present = g.has_edge(a, b);
      const bool same = part[a] == part[b];
      if (present != same) continue;
      std::vector<Edge> edges;
      for (const Edge& e : g.edges()) {
        if (!(e.u == a && e.v == b)) edges.push_back(e);
      }
      if (!present) edges.push_back({a, b});
      best = std::min(best, oracle::modularity_by_sets(g.num_nodes(), edges, part));
    }
  }
  return best;
}

void check_valid(const Graph& g, const EditSet& edits, std::size_t budget) {
  CHECK_NOTHROW(validate_edits(g, edits));
  CHECK(budget_used(g, apply_edits(g, edits)) <= budget);
  for (const Edge& e : edits.inserted) CHECK(e.u != e.v);
}

}  // namespace

TEST_CASE("baseline names") {
  CHECK(parse_baseline("dice") == BaselineKind::dice);
  CHECK(parse_baseline("MBA") == BaselineKind::mba);
  CHECK(parse_baseline("Rta") == BaselineKind::rta);
  CHECK_THROWS_AS(parse_baseline("roam"), ConfigError);
  CHECK(std::string(to_string(BaselineKind::mba)) == "MBA");
}

TEST_CASE("modularity against the edge-fraction oracle") {
  const Graph g = two_triangles();
  const std::vector<int> comp{0, 0, 0, 1, 1, 1};
  CHECK(modularity(g, comp) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(oracle::modularity_by_sets(6, g.edges(), comp) == doctest::Approx(0.5));

  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(trial);
    const Graph r = oracle::random_graph(12, 0.3, rng);
    std::uniform_int_distribution<int> label(0, 3);
    std::vector<int> part(12);
    for (int& l : part) l = label(rng);
    CHECK(modularity(r, part) == doctest::Approx(oracle::modularity_by_sets(12, r.edges(), part)).epsilon(1e-13));
  }
}

TEST_CASE("DICE examples") {
  // Hub and one leaf are targets; the other leaves can still be wired to the leaf target.
  const Graph s = star(5);
  const std::vector<NodeId> targets{0, 1};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const BaselineResult r = dice(s, targets, 2, seed);
    REQUIRE(r.edits.deleted.size() == 1);
    REQUIRE(r.edits.inserted.size() == 1);
    CHECK(r.edits.deleted.front().u == 0);
    CHECK(r.edits.inserted.front().u == 1);
    CHECK(r.warnings.empty());
    check_valid(s, r.edits, 2);
  }

  // Isolated targets: nothing to delete, so the whole budget goes to insertions.
  const Graph g(6, {{2, 3}, {3, 4}}, Matrix::Ones(6, 1));
  const std::vector<NodeId> isolated{0, 1};
  const BaselineResult ins = dice(g, isolated, 4, 3);
  CHECK(ins.edits.deleted.empty());
  CHECK(ins.edits.inserted.size() == 4);
  for (const Edge& e : ins.edits.inserted) CHECK((e.u <= 1) != (e.v <= 1));
  check_valid(g, ins.edits, 4);

  const BaselineResult same = dice(g, isolated, 4, 3);
  CHECK(same.edits.inserted == ins.edits.inserted);

  // Complete graph with all nodes targeted: no candidates at all.
  const Graph k3(3, {{0, 1}, {0, 2}, {1, 2}}, Matrix::Ones(3, 1));
  const std::vector<NodeId> everyone{0, 1, 2};
  const BaselineResult del = dice(k3, everyone, 2, 0);
  CHECK(del.edits.deleted.size() == 1);
  CHECK(del.warnings.size() == 1);
  CHECK_THROWS_AS(dice(Graph(3, {}, Matrix::Ones(3, 1)), everyone, 2, 0), BudgetError);
  CHECK_THROWS_AS(dice(s, targets, 0, 0), BudgetError);
  CHECK_THROWS_AS(dice(s, targets, 2, 0, 1.5), ConfigError);
}

TEST_CASE("MBA on two triangles follows the brute-force optimum") {
  const Graph g = two_triangles();
  const std::vector<int> comp{0, 0, 0, 1, 1, 1};
  const std::vector<NodeId> targets{0, 1, 2};
  const std::set<NodeId> target_set(targets.begin(), targets.end());
  // Deleting inside the triangle leaves Q = 12/25; bridging the triangles leaves Q = 5/14.
  CHECK(best_single_edit(g, target_set, comp) == doctest::Approx(5.0 / 14.0));
  std::set<Edge> picked;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const BaselineResult r = mba(g, targets, comp, 1, seed);
    REQUIRE(r.edits.inserted.size() == 1);
    CHECK(r.edits.deleted.empty());
    CHECK(modularity(apply_edits(g, r.edits), comp) == doctest::Approx(5.0 / 14.0));
    picked.insert(r.edits.inserted.front());
  }
  CHECK(picked.size() == 9);

  const std::vector<int> one{0, 0, 0, 0, 0, 0};
  const std::vector<NodeId> all{0, 1, 2, 3, 4, 5};
  const BaselineResult del = mba(g, all, one, 1, 0);
  CHECK(del.edits.deleted.size() == 1);
}

TEST_CASE("MBA greedy steps match a brute-force oracle") {
  for (int trial = 0; trial < 40; ++trial) {
    Rng rng(500 + trial);
    const Index n = 6 + trial % 7;
    const Graph g = oracle::random_graph(n, 0.35, rng);
    std::uniform_int_distribution<int> label(0, 2);
    std::vector<int> part(static_cast<std::size_t>(n));
    for (int& l : part) l = label(rng);
    const std::vector<NodeId> targets{0, 1};
    const std::set<NodeId> target_set(targets.begin(), targets.end());

    // Tie draws consume the RNG step by step, so shorter budgets are prefixes.
    for (std::size_t step = 0; step < 3; ++step) {
      const BaselineResult before = mba(g, targets, part, step == 0 ? 1 : step, trial);
      const BaselineResult after = mba(g, targets, part, step + 1, trial);
      if (after.edits.size() <= step) break;
      const Graph current = step == 0 ? g : apply_edits(g, before.edits);
      const Graph next = apply_edits(g, after.edits);
      CHECK(modularity(next, part) == doctest::Approx(best_single_edit(current, target_set, part)).epsilon(1e-12));
    }
  }
}

TEST_CASE("MBA stops early with a warning") {
  const Graph g(4, {{0, 1}}, Matrix::Ones(4, 1));
  const std::vector<int> part{0, 0, 0, 0};
  const std::vector<NodeId> targets{0};
  const BaselineResult r = mba(g, targets, part, 3, 0);
  CHECK(r.edits.deleted.size() == 1);
  CHECK(r.warnings.size() == 1);
  CHECK_THROWS_AS(mba(g, targets, std::vector<int>{0, 0}, 1, 0), DimensionError);
}

TEST_CASE("RTA examples") {
  // Node 3 is the only non-target, and it already touches target 0.
  const Graph g(4, {{0, 3}, {1, 2}}, Matrix::Ones(4, 1));
  const std::vector<NodeId> targets{0, 1, 2};
  const BaselineResult r = rta(g, targets, 1, 5);
  REQUIRE(r.edits.deleted.size() == 1);
  CHECK(r.edits.deleted.front() == Edge{0, 3});

  // After the deletion node 3 is detached and can only be reconnected to 1 or 2.
  const BaselineResult two = rta(g, targets, 2, 5);
  REQUIRE(two.edits.inserted.size() == 1);
  CHECK(two.edits.inserted.front().v == 3);
  CHECK(two.edits.inserted.front().u != 0);

  Rng rng(3);
  const Graph dense = oracle::random_graph(30, 0.3, rng);
  const std::vector<NodeId> t{0, 1, 2};
  const BaselineResult a = rta(dense, t, 8, 11);
  const BaselineResult b = rta(dense, t, 8, 11);
  CHECK(a.edits.deleted == b.edits.deleted);
  CHECK(a.edits.inserted == b.edits.inserted);
  check_valid(dense, a.edits, 8);
  CHECK(a.edits.size() == 8);
  CHECK_THROWS_AS(rta(dense, t, 0, 0), BudgetError);
}

TEST_CASE("RTA delete frequency matches the share of nodes adjacent to the targets") {
  Rng rng(44);
  const Graph g = oracle::random_graph(40, 0.15, rng);
  const std::vector<NodeId> targets{0, 1, 2, 3};
  int adjacent = 0;
  for (NodeId v = 4; v < 40; ++v) {
    bool hit = false;
    for (NodeId t : targets) hit = hit || g.has_edge(v, t);
    adjacent += hit ? 1 : 0;
  }
  const double expected = adjacent / 36.0;
  int deletes = 0;
  const int runs = 1000;
  for (int seed = 0; seed < runs; ++seed) deletes += static_cast<int>(rta(g, targets, 1, seed).edits.deleted.size());
  const double sigma = std::sqrt(expected * (1.0 - expected) / runs);
  CHECK(std::abs(deletes / static_cast<double>(runs) - expected) <= 4.0 * sigma);
}

TEST_CASE("baselines emit valid edits within budget on random SBMs") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Benchmark b = sbm_generate({.blocks = 3, .per_block = 8, .p_in = 0.5, .p_out = 0.05, .feature_dim = 3,
                                      .feature_noise = 0.5, .seed = seed});
    const std::vector<NodeId> targets{0, 1, static_cast<NodeId>(8 + seed % 8)};
    const std::size_t budget = 1 + seed % 10;
    check_valid(b.graph, dice(b.graph, targets, budget, seed).edits, budget);
    check_valid(b.graph, mba(b.graph, targets, b.blocks, budget, seed).edits, budget);
    check_valid(b.graph, rta(b.graph, targets, budget, seed).edits, budget);
  }
}
