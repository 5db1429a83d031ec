#include <algorithm>
#include <numeric>
#include <set>

#include "cdattack/eval.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace cdattack;

namespace {

std::vector<int> blocks_of(int n, int size) {
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) labels[i] = i / size;
  return labels;
}

Graph stars(NodeId count, NodeId leaves) {
  std::vector<Edge> edges;
  const NodeId size = leaves + 1;
  for (NodeId s = 0; s < count; ++s) {
    // Hubs sit at the last slot so the lowest id is never the answer by accident.
    const NodeId hub = s * size + leaves;
    for (NodeId l = 0; l < leaves; ++l) edges.push_back(make_edge(hub, s * size + l));
  }
  return Graph(count * size, std::move(edges), Matrix::Ones(count * size, 1));
}

}  // namespace

TEST_CASE("M1 examples") {
  const std::vector<int> labels = blocks_of(100, 10);
  const std::vector<NodeId> together{0, 1, 2, 3};
  CHECK(m1(labels, together, 10) == 0.0);
  std::vector<NodeId> spread;
  for (NodeId c = 0; c < 10; ++c) spread.push_back(c * 10);
  CHECK(m1(labels, spread, 10) == 1.0);
  const std::vector<NodeId> halves{0, 1, 10, 11};
  CHECK(m1(labels, halves, 10) == doctest::Approx(1.0 / 18.0).epsilon(1e-15));
  CHECK_THROWS_AS(m1(labels, halves, 1), ConfigError);
}

TEST_CASE("M2 examples") {
  const std::vector<int> labels = blocks_of(100, 10);
  std::vector<NodeId> spread;
  for (NodeId c = 0; c < 10; ++c) spread.push_back(c * 10 + 3);
  CHECK(m2(labels, spread) == 1.0);

  std::vector<int> alone = blocks_of(100, 10);
  for (int i = 0; i < 4; ++i) alone[i] = 10;
  const std::vector<NodeId> isolated{0, 1, 2, 3};
  CHECK(m2(alone, isolated) == 0.0);

  std::vector<int> big(100, 1);
  for (int i = 0; i < 30; ++i) big[i] = 0;
  CHECK(m2(big, isolated) == doctest::Approx(26.0 / 96.0).epsilon(1e-15));

  const HidingScore s = hiding_score(labels, spread, 10);
  CHECK(s.tally == std::vector<int>(10, 1));
  CHECK(s.m1 == 1.0);
  CHECK(s.communities == 10);
}

TEST_CASE("M1 and M2 agree with set definitions on every partition of small graphs") {
  Rng rng(2);
  for (int n = 2; n <= 8; ++n) {
    for (const std::vector<int>& labels : oracle::all_partitions(n)) {
      const int k = std::max(2, *std::max_element(labels.begin(), labels.end()) + 1);
      std::uniform_int_distribution<int> size(1, n);
      std::vector<NodeId> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      order.resize(static_cast<std::size_t>(size(rng)));
      const std::set<int> targets(order.begin(), order.end());

      const double v1 = m1(labels, order, k);
      const double v2 = m2(labels, order);
      CHECK(v1 == doctest::Approx(oracle::m1_by_sets(labels, targets, k)).epsilon(1e-15));
      CHECK(v2 == doctest::Approx(oracle::m2_by_sets(labels, targets)).epsilon(1e-15));
      CHECK((v1 >= 0.0 && v1 <= 1.0));
      CHECK((v2 >= 0.0 && v2 <= 1.0));

      std::set<int> touched;
      for (int t : targets) touched.insert(labels[t]);
      CHECK((v1 == 0.0) == (touched.size() == 1));
      const auto used = static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end()) + 1);
      // With C⁺ = V the guarded denominator makes M2 = 0.
      if (touched.size() == used && targets.size() < static_cast<std::size_t>(n)) {
        CHECK(v2 == 1.0);
      }
    }
  }
}

TEST_CASE("M1 and M2 ignore relabeling") {
  const std::vector<int> labels{0, 0, 1, 1, 2, 2, 2, 1};
  const std::vector<NodeId> targets{0, 2, 3};
  const std::vector<int> perm{2, 0, 1};
  std::vector<int> relabeled;
  for (int l : labels) relabeled.push_back(perm[l]);
  CHECK(m1(labels, targets, 3) == m1(relabeled, targets, 3));
  CHECK(m2(labels, targets) == m2(relabeled, targets));

  // Permuting node ids together with the target ids.
  const std::vector<NodeId> ids{7, 3, 5, 0, 1, 6, 2, 4};
  std::vector<int> moved(8);
  std::vector<NodeId> moved_targets;
  for (int i = 0; i < 8; ++i) moved[ids[i]] = labels[i];
  for (NodeId t : targets) moved_targets.push_back(ids[t]);
  CHECK(m1(labels, targets, 3) == m1(moved, moved_targets, 3));
  CHECK(m2(labels, targets) == m2(moved, moved_targets));
}

TEST_CASE("select_targets") {
  const Graph g = stars(4, 5);
  const std::vector<int> part = blocks_of(24, 6);
  const TargetSelection hubs = select_targets(g, part, 1, 0, 0);
  CHECK(hubs.targets == std::vector<NodeId>{5, 11, 17, 23});
  CHECK(hubs.warnings.empty());

  const TargetSelection mixed = select_targets(g, part, 1, 2, 9);
  CHECK(mixed.targets.size() == 12);
  CHECK(select_targets(g, part, 1, 2, 9).targets == mixed.targets);
  for (NodeId hub : {5, 11, 17, 23}) CHECK(std::count(mixed.targets.begin(), mixed.targets.end(), hub) == 1);
  std::vector<int> per(4, 0);
  for (NodeId t : mixed.targets) ++per[part[t]];
  CHECK(per == std::vector<int>(4, 3));

  const TargetSelection all = select_targets(g, part, 5, 5, 1);
  CHECK(all.targets.size() == 24);
  CHECK(all.warnings.size() == 4);

  const TargetSelection one = select_targets(g, part, 1, 1, 3, 2);
  CHECK(one.targets.size() == 2);
  for (NodeId t : one.targets) CHECK(part[t] == 2);
  CHECK_THROWS_AS(select_targets(g, part, 1, 1, 3, 9), ConfigError);
  CHECK_THROWS_AS(select_targets(g, std::vector<int>{0}, 1, 1, 3), DimensionError);

  // Degree ties go to the lower id.
  const Graph ring(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 5}}, Matrix::Ones(6, 1));
  const std::vector<int> same(6, 0);
  CHECK(select_targets(ring, same, 2, 0, 0).targets == std::vector<NodeId>{0, 1});
}

TEST_CASE("select_targets size is the sum of clipped community sizes") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Graph g = oracle::random_graph(30, 0.2, rng);
    std::uniform_int_distribution<int> label(0, 4);
    std::vector<int> part(30);
    for (int& l : part) l = label(rng);
    std::map<int, int> size;
    for (int l : part) ++size[l];
    std::size_t expected = 0;
    for (auto [c, s] : size) expected += static_cast<std::size_t>(std::min(s, 5));
    const TargetSelection sel = select_targets(g, part, 2, 3, trial);
    CHECK(sel.targets.size() == expected);
    CHECK(std::set<NodeId>(sel.targets.begin(), sel.targets.end()).size() == expected);
  }
}

TEST_CASE("Hungarian assignment matches brute force") {
  Rng rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const Index n = 1 + trial % 6;
    const Matrix cost = oracle::random_matrix(n, n, rng, -5.0, 5.0);
    const std::vector<int> match = hungarian(cost);
    double got = 0.0;
    for (Index r = 0; r < n; ++r) got += cost(r, match[r]);
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      double c = 0.0;
      for (Index r = 0; r < n; ++r) c += cost(r, perm[r]);
      best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(got == doctest::Approx(best).epsilon(1e-12));
    std::vector<int> sorted = match;
    std::sort(sorted.begin(), sorted.end());
    for (Index r = 0; r < n; ++r) CHECK(sorted[r] == r);
  }
  CHECK_THROWS_AS(hungarian(Matrix::Zero(2, 3)), DimensionError);
}

TEST_CASE("matched accuracy against the bitmask oracle") {
  Rng rng(21);
  std::uniform_int_distribution<int> label(0, 5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> a(40), b(40);
    for (int& x : a) x = label(rng);
    for (int& x : b) x = label(rng);
    CHECK(matched_accuracy(a, b, 6) == doctest::Approx(oracle::best_matching_accuracy(a, b, 6)).epsilon(1e-15));
  }
  const std::vector<int> p{1, 1, 0, 0}, t{0, 0, 1, 1};
  CHECK(matched_accuracy(p, t, 2) == 1.0);
}

TEST_CASE("k-means separates obvious blobs") {
  Matrix pts(9, 2);
  pts << 0, 0, 0.1, 0, 0, 0.1, 5, 5, 5.1, 5, 5, 5.1, -5, 5, -5.1, 5, -5, 5.1;
  const KMeansResult r = kmeans(pts, 3, 1);
  for (int c = 0; c < 3; ++c) {
    CHECK(r.labels[3 * c] == r.labels[3 * c + 1]);
    CHECK(r.labels[3 * c] == r.labels[3 * c + 2]);
  }
  CHECK(std::set<int>(r.labels.begin(), r.labels.end()).size() == 3);
  CHECK(r.inertia < 0.1);
  CHECK(kmeans(pts, 3, 1).labels == r.labels);
  CHECK_THROWS_AS(kmeans(pts, 10, 1), ConfigError);
}

TEST_CASE("spectral partition on two triangles") {
  const Graph g = oracle::two_triangles();
  const std::vector<int> labels = spectral_partition(g, 2, 3);
  CHECK(labels[0] == labels[1]);
  CHECK(labels[1] == labels[2]);
  CHECK(labels[3] == labels[4]);
  CHECK(labels[4] == labels[5]);
  CHECK(labels[0] != labels[3]);

  const std::vector<NodeId> triangle{0, 1, 2};
  const HidingScore s = transfer_eval(g, triangle, 2, 3);
  CHECK(s.m1 == 0.0);
  CHECK(s.m2 == doctest::Approx(0.0));

  const Matrix emb = spectral_embedding(g, 2, 1);
  CHECK(emb.rows() == 6);
  CHECK((emb.rowwise().norm().array() - 1.0).abs().maxCoeff() < 1e-9);

  SpectralOptions tight;
  tight.tolerance = 1e-300;
  tight.max_iterations = 3;
  CHECK_THROWS_AS(spectral_embedding(g, 2, 1, tight), ConvergenceError);
  CHECK_THROWS_AS(spectral_embedding(g, 7, 1), ConfigError);
}

TEST_CASE("spectral partition recovers planted SBM blocks") {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Benchmark b = sbm_generate({.seed = seed});
    const std::vector<int> labels = spectral_partition(b.graph, 10, seed);
    const double acc = matched_accuracy(labels, b.blocks, 10);
    CHECK(acc == doctest::Approx(oracle::best_matching_accuracy(labels, b.blocks, 10)));
    total += acc;
  }
  CHECK(total / 5.0 >= 0.7);
}
