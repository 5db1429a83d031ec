#pragma once

// Budget-constrained adversarial graph generator.
//
// A two-layer GCN encodes each node as a diagonal Gaussian; sampled latents
// concatenated with node features score candidate pairs through a masked edge
// decoder. Existing edges get keep scores Θ, non-edges from an insertion pool
// get insert scores Ψ, each a softmax over its own candidate set. The
// generator is trained with a score-function signal
//
//   L_g = L_prior + (λ1 L_hide + λ2 L_perturb − b)(Σ_S log Θ + Σ_S̄ log Ψ)
//
// against a surrogate detector that is retrained on {G, Ĝ} as it goes.

#include <span>
#include <string>
#include <vector>

#include "cdattack/detector.hpp"
#include "cdattack/graph.hpp"
#include "cdattack/optim.hpp"

namespace cdattack {

enum class AttackMode {
  /// delete_insert when m <= mode_threshold, delete_only otherwise.
  automatic,
  /// Keep m − Δ edges.
  delete_only,
  /// ⌊Δ/2⌋ deletions and ⌈Δ/2⌉ insertions.
  delete_insert,
};

struct AttackConfig {
  std::size_t budget = 10;
  AttackMode mode = AttackMode::automatic;
  std::size_t mode_threshold = 50000;
  Index encoder_hidden = 32;
  Index latent = 16;
  Index decoder_hidden = 32;
  double lambda_hide = -1.0;
  double lambda_perturb = 1.0;
  /// Subtract an exponential moving average of the reward.
  bool reward_baseline = true;
  double baseline_decay = 0.9;
  /// Average rather than sum the log-probabilities of each candidate set.
  bool normalize_log_prob = false;
  int iterations = 200;
  /// Detector epochs on {G, Ĝ} per generator step.
  int detector_epochs = 5;
  /// Random non-edges added to the insertion pool, as a multiple of Δ.
  std::size_t random_pool_factor = 10;
  ad::AdamConfig adam;
  DetectorConfig detector;
  std::uint64_t seed = 0;
};

AttackMode resolve_mode(const Graph& g, const AttackConfig& config);
const char* to_string(AttackMode mode);

struct GeneratorParams {
  ad::Parameter enc_hidden;     // d×h
  ad::Parameter enc_mu;         // h×z
  ad::Parameter enc_log_sigma;  // h×z
  ad::Parameter keep_hidden;    // (z+d)×r
  ad::Parameter keep_out;       // r×1
  ad::Parameter insert_hidden;  // (z+d)×r
  ad::Parameter insert_out;     // r×1

  std::vector<ad::Parameter*> all();
};

GeneratorParams make_generator(Index feature_dim, const AttackConfig& config);

struct EncoderOut {
  ad::Var mu;
  ad::Var log_sigma;
  ad::Var sigma;
  ad::Var z;
  Matrix noise;
};

/// μ = Ā relu(Ā X W_h) W_μ, σ = exp(Ā relu(Ā X W_h) W_σ), Z = μ + σ ⊙ ε with ε drawn from the tape's RNG.
EncoderOut encode(ad::Tape& tape, GeneratorParams& params, const GraphContext& ctx);

/// KL(N(μ, σ²) || N(0, I)) summed over nodes and latent dimensions.
ad::Var prior_loss(const EncoderOut& enc);

/// ½ Σ (μ² + σ² − 1 − 2 ln σ), value-level.
template <typename DerivedM, typename DerivedS>
double gaussian_kl(const Eigen::MatrixBase<DerivedM>& mu, const Eigen::MatrixBase<DerivedS>& sigma) {
  const auto m = mu.template cast<double>().array();
  const auto s = sigma.template cast<double>().array();
  return 0.5 * (m.square() + s.square() - 1.0 - 2.0 * s.log()).sum();
}

struct CandidatePool {
  std::vector<Edge> keep;
  std::vector<Edge> insert;
};

/// Keep candidates are all edges. In delete_insert mode the insertion pool is
/// every non-edge touching a target plus random_pool_factor·Δ further random
/// non-edges.
CandidatePool build_pool(const Graph& g, std::span<const NodeId> targets, AttackMode mode, std::size_t budget,
                         std::size_t random_pool_factor, Rng& rng);

struct EdgeScoreTable {
  std::vector<Edge> keep_pairs;
  std::vector<Edge> insert_pairs;
  /// Column vectors of logits b_ij and their log-softmax over each candidate set.
  ad::Var keep_logits;
  ad::Var keep_log_prob;
  ad::Var insert_logits;
  ad::Var insert_log_prob;

  Vector keep_prob() const;
  Vector insert_prob() const;
};

/// b_ij = W_b1 relu(W_b2 E_ij) with E_ij = [Z_i|X_i] ⊙ [Z_j|X_j].
EdgeScoreTable score_edges(ad::Tape& tape, GeneratorParams& params, const ad::Var& z, const Matrix& features,
                           const CandidatePool& pool);

struct SampledEdits {
  EditSet edits;
  /// Indices into keep_pairs that survive and insert_pairs that are added.
  std::vector<Index> kept;
  std::vector<Index> inserted;
  double log_prob = 0.0;
};

/// Weighted sampling without replacement by Gumbel top-k over each candidate set.
SampledEdits sample_edits(const EdgeScoreTable& table, std::size_t budget, AttackMode mode, Rng& rng,
                          bool normalize_log_prob = false);

/// Σ_S log Θ + Σ_S̄ log Ψ as a differentiable scalar.
ad::Var edit_log_prob(const EdgeScoreTable& table, const SampledEdits& sample, bool normalize = false);

/// min over distinct target pairs of KL(C_i || C_j).
double hide_loss(const Matrix& soft, std::span<const NodeId> targets);

struct GenLoss {
  ad::Var total;
  double prior = 0.0;
  double hide = 0.0;
  double perturb = 0.0;
  double reward = 0.0;
  double value = 0.0;
};

/// L_prior + (λ1·hide + λ2·perturb − baseline)·log_prob, with the reward held constant.
GenLoss gen_loss(const ad::Var& prior, double hide, double perturb, const ad::Var& log_prob, double lambda_hide,
                 double lambda_perturb, double baseline = 0.0);

struct AttackResult {
  EditSet edits;
  AttackMode mode = AttackMode::delete_insert;
  /// Pretrained detector on the clean graph.
  double hide_clean = 0.0;
  /// Best iterate, scored by the robust detector.
  double hide = 0.0;
  double perturb = 0.0;
  int best_iteration = -1;
  std::vector<double> reward_history;
  std::vector<double> hide_history;
};

/// Pretrains a detector on G, then runs the alternating attack loop.
AttackResult train_attack(const Graph& g, std::span<const NodeId> targets, const AttackConfig& config);
/// Same, starting from an already trained detector.
AttackResult train_attack(const Graph& g, std::span<const NodeId> targets, const AttackConfig& config,
                          const Detector& pretrained);

}  // namespace cdattack
