#pragma once

#include "cdattack/detector.hpp"
#include "cdattack/graph.hpp"

namespace cdattack {

/// Σ_{i<j} |A_ij − Â_ij|: size of the symmetric difference of the edge sets.
std::size_t budget_used(const Graph& g, const Graph& h);

/// Σ_i KL(P_i || Q_i) over rows, both sides clamped to kEpsilon.
template <typename DerivedP, typename DerivedQ>
double row_kl_sum(const Eigen::MatrixBase<DerivedP>& p, const Eigen::MatrixBase<DerivedQ>& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) throw DimensionError("row_kl_sum: shape mismatch");
  double total = 0.0;
  for (Index i = 0; i < p.rows(); ++i) {
    for (Index k = 0; k < p.cols(); ++k) {
      const double pk = static_cast<double>(p(i, k));
      if (pk <= 0.0) continue;
      total += pk * (std::log(std::max(pk, kEpsilon)) - std::log(std::max(static_cast<double>(q(i, k)), kEpsilon)));
    }
  }
  return std::max(total, 0.0);
}

/// Σ_i KL(ENC(v_i|G) || ENC(v_i|Ĝ)) with the encoder's own mode and normalization.
double perturb_loss(Detector& encoder, const Graph& g, const Graph& h);
/// Same, with the clean-graph encoding precomputed.
double perturb_loss(Detector& encoder, const Matrix& clean_encoding, const Graph& h);

struct PerturbReport {
  std::size_t edits_used = 0;
  std::size_t budget = 0;
  double l_perturb_local = 0.0;
  double l_perturb_global = 0.0;
};

}  // namespace cdattack
