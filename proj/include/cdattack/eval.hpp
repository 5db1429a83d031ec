#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdattack/graph.hpp"

namespace cdattack {

/// (#communities touched by C⁺ − 1) / ((K − 1) · max_i |G_i ∩ C⁺|).
double m1(std::span<const int> labels, std::span<const NodeId> targets, int k);
/// Σ over communities touched by C⁺ of |G_i ∖ C⁺|, over max(N − |C⁺|, 1).
double m2(std::span<const int> labels, std::span<const NodeId> targets);

struct HidingScore {
  double m1 = 0.0;
  double m2 = 0.0;
  int communities = 0;
  /// Targets per community label.
  std::vector<int> tally;
};

HidingScore hiding_score(std::span<const int> labels, std::span<const NodeId> targets, int k);

struct TargetSelection {
  std::vector<NodeId> targets;
  std::vector<std::string> warnings;
};

/// Per community: the `top` highest-degree members (ties to the lower id) plus
/// `random` members drawn uniformly from the rest. With `only` set, a single
/// community is used. Result is sorted by node id.
TargetSelection select_targets(const Graph& g, std::span<const int> partition, Index top, Index random,
                               std::uint64_t seed, std::optional<int> only = std::nullopt);

struct SpectralOptions {
  double tolerance = 1e-6;
  int max_iterations = 20000;
  Index oversample = 8;
};

/// Top-k eigenvectors of (Ā + I)/2 by block power iteration with
/// Rayleigh–Ritz, rows scaled to unit length. Throws ConvergenceError.
Matrix spectral_embedding(const Graph& g, Index k, std::uint64_t seed, const SpectralOptions& options = {});

struct KMeansResult {
  std::vector<int> labels;
  Matrix centroids;
  double inertia = 0.0;
};

/// Lloyd iterations from k-means++ seeds, best inertia over the restarts.
KMeansResult kmeans(const Matrix& points, Index k, std::uint64_t seed, int restarts = 50, int max_iterations = 100);

/// Spectral embedding followed by k-means: the transfer-target detector.
std::vector<int> spectral_partition(const Graph& g, Index k, std::uint64_t seed);

HidingScore transfer_eval(const Graph& attacked, std::span<const NodeId> targets, Index k, std::uint64_t seed);

/// Minimum-cost perfect assignment on a square cost matrix; result[row] = column.
std::vector<int> hungarian(const Matrix& cost);

/// Agreement under the best one-to-one relabeling of predicted communities.
double matched_accuracy(std::span<const int> predicted, std::span<const int> truth, int k);

}  // namespace cdattack
