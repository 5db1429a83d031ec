#include "cdattack/autodiff.hpp"

#include <array>
#include <cmath>
#include <string>

namespace cdattack::ad {

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
  }
}

Tape& common_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw std::logic_error("operands recorded on different tapes");
  return a.tape();
}

}  // namespace

Parameter glorot(Index rows, Index cols, Rng& rng, double gain) {
  const double limit = gain * std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return Parameter(std::move(m));
}

const Matrix& Var::value() const { return tape_->value(index_); }
const Matrix& Var::grad() const { return tape_->grad(index_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw DimensionError("scalar(): value is not 1x1");
  return v(0, 0);
}

void require_finite(const Matrix& m, const char* op) {
  if (!m.allFinite()) throw TrainingError(std::string(op) + ": non-finite value");
}

Var Tape::constant(Matrix value) {
  require_finite(value, "constant");
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr, nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& param) {
  require_finite(param.value, "parameter");
  if (param.grad.rows() != param.value.rows() || param.grad.cols() != param.value.cols()) {
    param.grad = Matrix::Zero(param.value.rows(), param.value.cols());
  }
  nodes_.push_back(Node{param.value, Matrix(), nullptr, &param, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::span<const std::size_t> parents, Backward backward) {
  bool needs = false;
  for (std::size_t p : parents) needs = needs || nodes_[p].needs_grad;
  nodes_.push_back(Node{std::move(value), Matrix(), needs ? std::move(backward) : nullptr, nullptr, needs});
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(const Var& loss) {
  if (&loss.tape() != this) throw std::logic_error("backward(): loss belongs to another tape");
  if (loss.value().size() != 1) throw DimensionError("backward(): loss must be 1x1");
  const std::size_t root = loss.index();
  for (std::size_t i = 0; i <= root; ++i) {
    Node& n = nodes_[i];
    if (n.needs_grad) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  }
  if (!nodes_[root].needs_grad) return;
  nodes_[root].grad(0, 0) = 1.0;
  for (std::size_t i = root + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param != nullptr) n.param->grad += n.grad;
  }
}

Var matmul(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " times " +
                         std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  Matrix out = a.value() * b.value();
  require_finite(out, "matmul");
  const std::array parents{a.index(), b.index()};
  return t.record(std::move(out), parents, [ia = a.index(), ib = b.index()](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.needs_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

Var transpose(const Var& a) {
  const std::array parents{a.index()};
  return a.tape().record(a.value().transpose(), parents,
                         [ia = a.index()](Tape& t, std::size_t self) { t.accumulate(ia, t.grad(self).transpose()); });
}

Var spmm(std::shared_ptr<const SparseMatrix> s, const Var& x) {
  if (s->cols() != x.rows()) throw DimensionError("spmm: sparse cols != dense rows");
  Matrix out = (*s) * x.value();
  require_finite(out, "spmm");
  const std::array parents{x.index()};
  return x.tape().record(std::move(out), parents, [s, ix = x.index()](Tape& t, std::size_t self) {
    t.accumulate(ix, s->transpose() * t.grad(self));
  });
}

Var scale_rows(const Var& x, const Vector& weights) {
  if (weights.size() != x.rows()) throw DimensionError("scale_rows: weight count != rows");
  Matrix out = weights.asDiagonal() * x.value();
  require_finite(out, "scale_rows");
  const std::array parents{x.index()};
  return x.tape().record(std::move(out), parents, [weights, ix = x.index()](Tape& t, std::size_t self) {
    t.accumulate(ix, weights.asDiagonal() * t.grad(self));
  });
}

Var gather_rows(const Var& x, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= x.rows()) throw DimensionError("gather_rows: row index out of range");
    out.row(static_cast<Index>(r)) = x.value().row(rows[r]);
  }
  const std::array parents{x.index()};
  std::vector<Index> idx(rows.begin(), rows.end());
  return x.tape().record(std::move(out), parents, [idx = std::move(idx), ix = x.index()](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix scatter = Matrix::Zero(t.value(ix).rows(), t.value(ix).cols());
    for (std::size_t r = 0; r < idx.size(); ++r) scatter.row(idx[r]) += g.row(static_cast<Index>(r));
    t.accumulate(ix, scatter);
  });
}

Var concat_cols(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  if (a.rows() != b.rows()) throw DimensionError("concat_cols: row count mismatch");
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const std::array parents{a.index(), b.index()};
  return t.record(std::move(out), parents,
                  [ia = a.index(), ib = b.index(), ca = a.cols(), cb = b.cols()](Tape& t, std::size_t self) {
                    const Matrix& g = t.grad(self);
                    t.accumulate(ia, g.leftCols(ca));
                    t.accumulate(ib, g.rightCols(cb));
                  });
}

Var add(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  require_same_shape(a, b, "add");
  Matrix out = a.value() + b.value();
  require_finite(out, "add");
  const std::array parents{a.index(), b.index()};
  return t.record(std::move(out), parents, [ia = a.index(), ib = b.index()](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, t.grad(self));
  });
}

Var sub(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  require_same_shape(a, b, "sub");
  Matrix out = a.value() - b.value();
  require_finite(out, "sub");
  const std::array parents{a.index(), b.index()};
  return t.record(std::move(out), parents, [ia = a.index(), ib = b.index()](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, -t.grad(self));
  });
}

Var mul(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  require_same_shape(a, b, "mul");
  Matrix out = a.value().cwiseProduct(b.value());
  require_finite(out, "mul");
  const std::array parents{a.index(), b.index()};
  return t.record(std::move(out), parents, [ia = a.index(), ib = b.index()](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
    if (t.needs_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
  });
}

Var div(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  require_same_shape(a, b, "div");
  const Matrix den = b.value().cwiseMax(kEpsilon);
  Matrix out = a.value().cwiseQuotient(den);
  require_finite(out, "div");
  const std::array parents{a.index(), b.index()};
  return t.record(std::move(out), parents, [ia = a.index(), ib = b.index(), den](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ia)) t.accumulate(ia, g.cwiseQuotient(den));
    if (t.needs_grad(ib)) {
      const Matrix& bv = t.value(ib);
      Matrix gb = -g.cwiseProduct(t.value(self)).cwiseQuotient(den);
      gb = (bv.array() > kEpsilon).select(gb, 0.0);
      t.accumulate(ib, gb);
    }
  });
}

Var scale(const Var& a, double factor) {
  Matrix out = a.value() * factor;
  require_finite(out, "scale");
  const std::array parents{a.index()};
  return a.tape().record(std::move(out), parents, [ia = a.index(), factor](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self) * factor);
  });
}

Var add_scalar(const Var& a, double shift) {
  Matrix out = a.value().array() + shift;
  require_finite(out, "add_scalar");
  const std::array parents{a.index()};
  return a.tape().record(std::move(out), parents,
                         [ia = a.index()](Tape& t, std::size_t self) { t.accumulate(ia, t.grad(self)); });
}

Var relu(const Var& a) {
  Matrix out = a.value().cwiseMax(0.0);
  const std::array parents{a.index()};
  return a.tape().record(std::move(out), parents, [ia = a.index()](Tape& t, std::size_t self) {
    t.accumulate(ia, (t.value(ia).array() > 0.0).select(t.grad(self), 0.0));
  });
}

Var exp(const Var& a) {
  Matrix out = a.value().array().exp();
  require_finite(out, "exp");
  const std::array parents{a.index()};
  return a.tape().record(std::move(out), parents, [ia = a.index()](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self).cwiseProduct(t.value(self)));
  });
}

Var log(const Var& a) {
  const Matrix clamped = a.value().cwiseMax(kEpsilon);
  Matrix out = clamped.array().log();
  require_finite(out, "log");
  const std::array parents{a.index()};
  return a.tape().record(std::move(out), parents, [ia = a.index(), clamped](Tape& t, std::size_t self) {
    Matrix g = t.grad(self).cwiseQuotient(clamped);
    t.accumulate(ia, (t.value(ia).array() > kEpsilon).select(g, 0.0));
  });
}

Var softmax_rows(const Var& a) {
  Matrix out = a.value();
  for (Index r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    row = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
  require_finite(out, "softmax_rows");
  const std::array parents{a.index()};
  return a.tape().record(std::move(out), parents, [ia = a.index()](Tape& t, std::size_t self) {
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    const Vector dot = g.cwiseProduct(y).rowwise().sum();
    t.accumulate(ia, y.cwiseProduct(g - dot.replicate(1, g.cols())));
  });
}

Var log_softmax_rows(const Var& a) {
  Matrix out = a.value();
  for (Index r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double mx = row.maxCoeff();
    const double lse = mx + std::log((row.array() - mx).exp().sum());
    row.array() -= lse;
  }
  require_finite(out, "log_softmax_rows");
  const std::array parents{a.index()};
  return a.tape().record(std::move(out), parents, [ia = a.index()](Tape& t, std::size_t self) {
    const Matrix p = t.value(self).array().exp();
    const Matrix& g = t.grad(self);
    const Vector total = g.rowwise().sum();
    t.accumulate(ia, g - p.cwiseProduct(total.replicate(1, g.cols())));
  });
}

Var dropout(const Var& a, double rate) {
  Tape& t = a.tape();
  if (!t.training || rate <= 0.0) return a;
  if (rate >= 1.0) throw ConfigError("dropout rate must be < 1");
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix mask(a.rows(), a.cols());
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(t.rng) ? 1.0 / (1.0 - rate) : 0.0;
  Matrix out = a.value().cwiseProduct(mask);
  const std::array parents{a.index()};
  return t.record(std::move(out), parents, [ia = a.index(), mask = std::move(mask)](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self).cwiseProduct(mask));
  });
}

Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  require_finite(out, "sum");
  const std::array parents{a.index()};
  return a.tape().record(std::move(out), parents, [ia = a.index()](Tape& t, std::size_t self) {
    const Matrix& v = t.value(ia);
    t.accumulate(ia, Matrix::Constant(v.rows(), v.cols(), t.grad(self)(0, 0)));
  });
}

Var diag(const Var& a) {
  if (a.rows() != a.cols()) throw DimensionError("diag: matrix is not square");
  Matrix out = a.value().diagonal();
  const std::array parents{a.index()};
  return a.tape().record(std::move(out), parents, [ia = a.index()](Tape& t, std::size_t self) {
    const Index n = t.value(ia).rows();
    Matrix g = Matrix::Zero(n, n);
    g.diagonal() = t.grad(self).col(0);
    t.accumulate(ia, g);
  });
}

}  // namespace cdattack::ad
