#pragma once

// Surrogate community detector: a two-layer GCN (or a PPNP propagation)
// feeding a softmax assignment head, trained on the relaxed normalized cut
//
//   L_u = -(1/K) Tr((CᵀAC) ⊘ (CᵀDC)) + γ ||(K/N) CᵀC - I_K||²_F.

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "cdattack/autodiff.hpp"
#include "cdattack/graph.hpp"
#include "cdattack/optim.hpp"

namespace cdattack {

enum class EncoderMode {
  /// H = Ā σ(Ā X W⁰) W¹.
  local,
  /// H = softmax(𝒜 X W_g) with 𝒜 the Personalized PageRank matrix.
  global,
};

struct DetectorConfig {
  Index communities = 10;
  Index hidden = 32;
  Index embedding = 16;
  Index assign_hidden = 32;
  double gamma = 0.1;
  double dropout = 0.3;
  EncoderMode encoder = EncoderMode::local;
  Normalization normalization = Normalization::with_self_loop;
  double ppr_alpha = 0.1;
  /// Glorot bound multiplier. At gain 1 the assignment starts near uniform,
  /// which is a local minimum of the loss for small γ.
  double init_gain = 2.5;
  int max_epochs = 2000;
  int patience = 50;
  ad::AdamConfig adam;
  std::uint64_t seed = 0;
};

/// Per-graph constants consumed by the detector.
struct GraphContext {
  Index num_nodes = 0;
  std::shared_ptr<const SparseMatrix> adjacency;
  std::shared_ptr<const SparseMatrix> normalized;
  Vector degrees;
  Matrix features;
  /// Ā X, reused by the first layer.
  Matrix smoothed;
  /// 𝒜 X in global mode, empty otherwise.
  Matrix propagated;
};

GraphContext make_context(const Graph& g, const DetectorConfig& config);

struct Assignment {
  Matrix soft;
  std::vector<int> hard;
};

/// Row-wise argmax, ties to the lowest community index.
template <typename Derived>
std::vector<int> hard_labels(const Eigen::MatrixBase<Derived>& soft) {
  std::vector<int> out(static_cast<std::size_t>(soft.rows()));
  for (Index i = 0; i < soft.rows(); ++i) {
    Index best = 0;
    for (Index k = 1; k < soft.cols(); ++k) {
      if (soft(i, k) > soft(i, best)) best = k;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

/// −(1/K) Σ_k (CᵀAC)_kk / (CᵀDC)_kk, denominators clamped to kEpsilon.
template <typename Derived>
double ncut_trace_term(const Eigen::MatrixBase<Derived>& c, const SparseMatrix& adjacency, const Vector& degrees) {
  const Matrix cm = c.template cast<double>();
  const Matrix ac = adjacency * cm;
  const Vector num = (cm.transpose() * ac).diagonal();
  const Vector den = (cm.transpose() * degrees.asDiagonal() * cm).diagonal();
  return -num.cwiseQuotient(den.cwiseMax(kEpsilon)).sum() / static_cast<double>(cm.cols());
}

/// ||(K/N) CᵀC − I_K||²_F.
template <typename Derived>
double orthogonality_penalty(const Eigen::MatrixBase<Derived>& c) {
  const Matrix cm = c.template cast<double>();
  const double scale = static_cast<double>(cm.cols()) / static_cast<double>(cm.rows());
  const Matrix gram = scale * (cm.transpose() * cm) - Matrix::Identity(cm.cols(), cm.cols());
  return gram.squaredNorm();
}

template <typename Derived>
double unsupervised_loss(const Eigen::MatrixBase<Derived>& c, const SparseMatrix& adjacency, const Vector& degrees,
                         double gamma) {
  return ncut_trace_term(c, adjacency, degrees) + gamma * orthogonality_penalty(c);
}

/// Differentiable L_u of an N×K assignment on one graph.
ad::Var ncut_loss(const ad::Var& c, const GraphContext& ctx, double gamma);

struct DetectorParams {
  ad::Parameter w0;       // d×h
  ad::Parameter w1;       // h×v
  ad::Parameter wc1;      // v×r
  ad::Parameter wc2;      // r×K
  ad::Parameter wg;       // d×v, global mode
  ad::Parameter w0_self;  // d×h, decoupled normalization
  ad::Parameter w1_self;  // h×v, decoupled normalization

  std::vector<ad::Parameter*> trainable(const DetectorConfig& config);
};

struct TrainStats {
  int epochs = 0;
  double best_loss = 0.0;
  std::vector<double> history;
};

class Detector {
 public:
  Detector(Index feature_dim, DetectorConfig config);
  Detector(const Detector& other);
  Detector& operator=(const Detector& other);
  Detector(Detector&&) noexcept = default;
  Detector& operator=(Detector&&) noexcept = default;

  /// N×v node embeddings H.
  ad::Var embed(ad::Tape& tape, const GraphContext& ctx);
  /// Row-stochastic N×K assignment C from embeddings.
  ad::Var assign(ad::Tape& tape, const ad::Var& embeddings);

  /// Summed L_u over the graphs (all share this detector's weights).
  ad::Var loss(ad::Tape& tape, std::span<const GraphContext* const> graphs);

  /// Evaluation-mode assignment.
  Assignment detect(const GraphContext& ctx);
  /// Evaluation-mode row-stochastic node encoding: softmax(H_l) locally, H_g globally.
  Matrix encoding(const GraphContext& ctx);

  /// Full-batch Adam. patience <= 0 runs exactly `epochs`; otherwise stops
  /// after `patience` epochs without improvement and restores the best weights.
  TrainStats fit(std::span<const GraphContext* const> graphs, int epochs, int patience);

  const DetectorConfig& config() const { return config_; }
  DetectorParams& params() { return *params_; }
  const DetectorParams& params() const { return *params_; }

 private:
  Detector& rebind();

  DetectorConfig config_;
  std::unique_ptr<DetectorParams> params_;
  std::unique_ptr<ad::Adam> optimizer_;
  Rng rng_;
};

struct TrainedDetector {
  Detector detector;
  std::vector<Assignment> assignments;
  TrainStats stats;
};

/// Trains a fresh detector with early stopping; several graphs train jointly
/// with the unweighted sum of their losses.
TrainedDetector train_detector(std::span<const Graph> graphs, const DetectorConfig& config);

}  // namespace cdattack
