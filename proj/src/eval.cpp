#include "cdattack/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

namespace cdattack {

namespace {

std::vector<int> count_targets(std::span<const int> labels, std::span<const NodeId> targets, int k) {
  std::vector<int> tally(static_cast<std::size_t>(k), 0);
  for (NodeId t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= labels.size()) throw std::invalid_argument("target id out of range");
    const int c = labels[t];
    if (c < 0 || c >= k) throw std::invalid_argument("community label " + std::to_string(c) + " outside [0, K)");
    ++tally[c];
  }
  return tally;
}

}  // namespace

double m1(std::span<const int> labels, std::span<const NodeId> targets, int k) {
  if (k <= 1) throw ConfigError("M1 needs K > 1");
  if (targets.empty()) throw std::invalid_argument("M1 needs a non-empty target set");
  const std::vector<int> tally = count_targets(labels, targets, k);
  const int touched = static_cast<int>(std::count_if(tally.begin(), tally.end(), [](int c) { return c > 0; }));
  const int most = std::max(*std::max_element(tally.begin(), tally.end()), 1);
  return static_cast<double>(touched - 1) / (static_cast<double>(k - 1) * most);
}

double m2(std::span<const int> labels, std::span<const NodeId> targets) {
  const std::set<NodeId> target_set(targets.begin(), targets.end());
  std::set<int> touched;
  for (NodeId t : target_set) {
    if (t < 0 || static_cast<std::size_t>(t) >= labels.size()) throw std::invalid_argument("target id out of range");
    touched.insert(labels[t]);
  }
  std::size_t hidden = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (touched.contains(labels[i]) && !target_set.contains(static_cast<NodeId>(i))) ++hidden;
  }
  const auto others = static_cast<double>(labels.size()) - static_cast<double>(target_set.size());
  return static_cast<double>(hidden) / std::max(others, 1.0);
}

HidingScore hiding_score(std::span<const int> labels, std::span<const NodeId> targets, int k) {
  HidingScore s;
  s.communities = k;
  s.m1 = m1(labels, targets, k);
  s.m2 = m2(labels, targets);
  s.tally = count_targets(labels, targets, k);
  return s;
}

TargetSelection select_targets(const Graph& g, std::span<const int> partition, Index top, Index random,
                               std::uint64_t seed, std::optional<int> only) {
  if (static_cast<Index>(partition.size()) != g.num_nodes()) throw DimensionError("one partition label per node");
  if (top < 0 || random < 0) throw ConfigError("target counts must be non-negative");
  std::map<int, std::vector<NodeId>> members;
  for (NodeId v = 0; v < g.num_nodes(); ++v) members[partition[v]].push_back(v);
  if (only && !members.contains(*only)) throw ConfigError("community " + std::to_string(*only) + " is empty");

  Rng rng(seed);
  TargetSelection out;
  for (auto& [community, nodes] : members) {
    if (only && community != *only) continue;
    std::stable_sort(nodes.begin(), nodes.end(), [&](NodeId a, NodeId b) { return g.degree(a) > g.degree(b); });
    const auto wanted = static_cast<std::size_t>(top + random);
    if (nodes.size() < wanted) {
      out.warnings.push_back("community " + std::to_string(community) + " has " + std::to_string(nodes.size()) +
                             " nodes, fewer than " + std::to_string(wanted) + "; taking all");
      out.targets.insert(out.targets.end(), nodes.begin(), nodes.end());
      continue;
    }
    const auto head = static_cast<std::size_t>(top);
    out.targets.insert(out.targets.end(), nodes.begin(), nodes.begin() + static_cast<std::ptrdiff_t>(head));
    std::vector<NodeId> rest(nodes.begin() + static_cast<std::ptrdiff_t>(head), nodes.end());
    std::sort(rest.begin(), rest.end());
    for (std::size_t i = 0; i < static_cast<std::size_t>(random); ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, rest.size() - 1);
      std::swap(rest[i], rest[pick(rng)]);
      out.targets.push_back(rest[i]);
    }
  }
  std::sort(out.targets.begin(), out.targets.end());
  return out;
}

Matrix spectral_embedding(const Graph& g, Index k, std::uint64_t seed, const SpectralOptions& options) {
  const Index n = g.num_nodes();
  if (k < 1 || k > n) throw ConfigError("spectral embedding needs 1 <= K <= N");
  const auto normalized = normalize(g, Normalization::with_self_loop).matrix;
  const SparseMatrix& a = *normalized;
  auto apply = [&](const Matrix& v) -> Matrix { return 0.5 * (a * v + v); };

  const Index p = std::min(n, k + options.oversample);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix basis(n, p);
  for (Index i = 0; i < basis.size(); ++i) basis.data()[i] = normal(rng);

  double residual = std::numeric_limits<double>::infinity();
  for (int it = 0; it < options.max_iterations; ++it) {
    Eigen::HouseholderQR<Matrix> qr(apply(basis));
    const Matrix q = qr.householderQ() * Matrix::Identity(n, p);
    const Matrix mq = apply(q);
    const Matrix t = q.transpose() * mq;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (t + t.transpose()));
    // Eigen sorts ascending; the top-k Ritz pairs are the trailing columns.
    const Matrix ritz = q * eig.eigenvectors().rightCols(k);
    const Vector values = eig.eigenvalues().tail(k);
    const Matrix r = apply(ritz) - ritz * values.asDiagonal();
    residual = r.colwise().norm().maxCoeff();
    basis = q * eig.eigenvectors();
    if (residual < options.tolerance) {
      Matrix out = ritz.rowwise().reverse();
      for (Index i = 0; i < n; ++i) {
        const double norm = out.row(i).norm();
        if (norm > kEpsilon) out.row(i) /= norm;
      }
      return out;
    }
  }
  throw ConvergenceError("spectral embedding did not converge in " + std::to_string(options.max_iterations) +
                             " iterations",
                         residual);
}

KMeansResult kmeans(const Matrix& points, Index k, std::uint64_t seed, int restarts, int max_iterations) {
  const Index n = points.rows();
  if (k < 1 || k > n) throw ConfigError("k-means needs 1 <= K <= N");
  if (restarts < 1) throw ConfigError("k-means needs at least one restart");
  Rng rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();

  for (int restart = 0; restart < restarts; ++restart) {
    Matrix centroids(k, points.cols());
    std::uniform_int_distribution<Index> first(0, n - 1);
    centroids.row(0) = points.row(first(rng));
    Vector nearest = (points.rowwise() - centroids.row(0)).rowwise().squaredNorm();
    for (Index c = 1; c < k; ++c) {
      const double total = nearest.sum();
      Index chosen = 0;
      if (total > 0.0) {
        std::uniform_real_distribution<double> u(0.0, total);
        double target = u(rng);
        for (chosen = 0; chosen < n - 1; ++chosen) {
          target -= nearest(chosen);
          if (target <= 0.0) break;
        }
      } else {
        chosen = first(rng);
      }
      centroids.row(c) = points.row(chosen);
      nearest = nearest.cwiseMin((points.rowwise() - centroids.row(c)).rowwise().squaredNorm());
    }

    std::vector<int> labels(static_cast<std::size_t>(n), -1);
    Vector dist(n);
    for (int it = 0; it < max_iterations; ++it) {
      bool changed = false;
      for (Index i = 0; i < n; ++i) {
        Index arg = 0;
        double d = std::numeric_limits<double>::infinity();
        for (Index c = 0; c < k; ++c) {
          const double dc = (points.row(i) - centroids.row(c)).squaredNorm();
          if (dc < d) {
            d = dc;
            arg = c;
          }
        }
        dist(i) = d;
        if (labels[i] != arg) {
          labels[i] = static_cast<int>(arg);
          changed = true;
        }
      }
      if (!changed && it > 0) break;
      Matrix sums = Matrix::Zero(k, points.cols());
      std::vector<Index> counts(static_cast<std::size_t>(k), 0);
      for (Index i = 0; i < n; ++i) {
        sums.row(labels[i]) += points.row(i);
        ++counts[labels[i]];
      }
      for (Index c = 0; c < k; ++c) {
        if (counts[c] > 0) {
          centroids.row(c) = sums.row(c) / static_cast<double>(counts[c]);
        } else {
          // Re-seed an empty cluster at the point worst served by its centroid.
          Index far = 0;
          dist.maxCoeff(&far);
          centroids.row(c) = points.row(far);
          dist(far) = 0.0;
        }
      }
    }
    double inertia = 0.0;
    for (Index i = 0; i < n; ++i) inertia += (points.row(i) - centroids.row(labels[i])).squaredNorm();
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.labels = labels;
      best.centroids = centroids;
    }
  }
  return best;
}

std::vector<int> spectral_partition(const Graph& g, Index k, std::uint64_t seed) {
  return kmeans(spectral_embedding(g, k, derive_seed(seed, 41)), k, derive_seed(seed, 42)).labels;
}

HidingScore transfer_eval(const Graph& attacked, std::span<const NodeId> targets, Index k, std::uint64_t seed) {
  const std::vector<int> labels = spectral_partition(attacked, k, seed);
  return hiding_score(labels, targets, static_cast<int>(k));
}

std::vector<int> hungarian(const Matrix& cost) {
  const Index n = cost.rows();
  if (cost.cols() != n) throw DimensionError("hungarian needs a square cost matrix");
  const double inf = std::numeric_limits<double>::infinity();
  // Potentials u, v and column matches p are 1-based with a virtual column 0.
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<Index> p(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<bool> used(static_cast<std::size_t>(n + 1), false);
    do {
      used[j0] = true;
      const Index i0 = p[j0];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const Index j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> match(static_cast<std::size_t>(n), -1);
  for (Index j = 1; j <= n; ++j) match[p[j] - 1] = static_cast<int>(j - 1);
  return match;
}

double matched_accuracy(std::span<const int> predicted, std::span<const int> truth, int k) {
  if (predicted.size() != truth.size()) throw DimensionError("matched_accuracy: label vectors differ in length");
  if (predicted.empty()) return 0.0;
  Matrix cost = Matrix::Zero(k, k);
  for (std::size_t i = 0; i < predicted.size(); ++i) cost(predicted[i], truth[i]) -= 1.0;
  const std::vector<int> match = hungarian(cost);
  double agree = 0.0;
  for (int r = 0; r < k; ++r) agree -= cost(r, match[r]);
  return agree / static_cast<double>(predicted.size());
}

}  // namespace cdattack
