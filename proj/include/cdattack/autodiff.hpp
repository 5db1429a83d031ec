#pragma once

// Reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every operation in creation order, so parents always precede
// children and the recorded graph is acyclic. backward() sweeps the tape in
// reverse and accumulates gradients; leaves created with Tape::parameter()
// forward their gradient into the persistent Parameter, where it accumulates
// across tapes until an optimizer step zeroes it.

#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "cdattack/types.hpp"

namespace cdattack::ad {

/// Trainable matrix that outlives any single tape.
struct Parameter {
  Parameter() = default;
  explicit Parameter(Matrix init) : value(std::move(init)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(); }

  Matrix value;
  Matrix grad;
};

/// Glorot-uniform initialisation, bound scaled by `gain`.
Parameter glorot(Index rows, Index cols, Rng& rng, double gain = 1.0);

class Tape;

/// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  const Matrix& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const;

  Tape& tape() const { return *tape_; }
  std::size_t index() const { return index_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  explicit Tape(std::uint64_t seed = 0, bool training = false) : training(training), rng(seed) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var parameter(Parameter& param);

  /// Records a derived value. `parents` decide whether the node needs a gradient.
  Var record(Matrix value, std::span<const std::size_t> parents, Backward backward);

  /// Populates gradients of every node reachable from a 1×1 loss.
  void backward(const Var& loss);

  const Matrix& value(std::size_t i) const { return nodes_[i].value; }
  const Matrix& grad(std::size_t i) const { return nodes_[i].grad; }
  bool needs_grad(std::size_t i) const { return nodes_[i].needs_grad; }

  /// Adds `g` into the gradient of node `i` (no-op for constants).
  template <typename Derived>
  void accumulate(std::size_t i, const Eigen::MatrixBase<Derived>& g) {
    Node& node = nodes_[i];
    if (node.needs_grad) node.grad += g;
  }

  std::size_t size() const { return nodes_.size(); }

  bool training;
  Rng rng;

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };
  std::deque<Node> nodes_;
};

// Linear algebra.
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
/// Constant sparse matrix times a dense value; backward applies the transpose.
Var spmm(std::shared_ptr<const SparseMatrix> s, const Var& x);
/// Multiplies row i by the constant weights[i].
Var scale_rows(const Var& x, const Vector& weights);
Var gather_rows(const Var& x, std::span<const Index> rows);
Var concat_cols(const Var& a, const Var& b);

// Elementwise.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
/// a / max(b, kEpsilon).
Var div(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double shift);
Var relu(const Var& a);
Var exp(const Var& a);
/// log(max(a, kEpsilon)).
Var log(const Var& a);
Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
/// Inverted dropout; identity unless the tape is in training mode.
Var dropout(const Var& a, double rate);

// Reductions.
Var sum(const Var& a);
/// Main diagonal of a square matrix as a column.
Var diag(const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(double c, const Var& a) { return scale(a, c); }
inline Var operator*(const Var& a, double c) { return scale(a, c); }

/// Finite-value check applied after every public op.
void require_finite(const Matrix& m, const char* op);

}  // namespace cdattack::ad
