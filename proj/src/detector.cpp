#include "cdattack/detector.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>

namespace cdattack {

GraphContext make_context(const Graph& g, const DetectorConfig& config) {
  GraphContext ctx;
  ctx.num_nodes = g.num_nodes();
  ctx.adjacency = g.adjacency_ptr();
  ctx.normalized = normalize(g, config.normalization).matrix;
  ctx.degrees = g.degrees();
  ctx.features = g.features();
  ctx.smoothed = (*ctx.normalized) * ctx.features;
  if (config.encoder == EncoderMode::global) {
    PprOptions ppr;
    ppr.alpha = config.ppr_alpha;
    ppr.normalization = config.normalization;
    ctx.propagated = personalized_pagerank(g, ppr) * ctx.features;
  }
  return ctx;
}

ad::Var ncut_loss(const ad::Var& c, const GraphContext& ctx, double gamma) {
  using namespace ad;
  const Index n = c.rows();
  const Index k = c.cols();
  if (k < 2) throw DimensionError("ncut_loss: need at least two communities");
  if (n != ctx.num_nodes) throw DimensionError("ncut_loss: assignment rows != node count");
  if (ctx.adjacency->nonZeros() == 0) throw DimensionError("ncut_loss: graph has no edges");
  Tape& tape = c.tape();

  const Var ct = transpose(c);
  const Var assoc = diag(matmul(ct, spmm(ctx.adjacency, c)));
  const Var volume = diag(matmul(ct, scale_rows(c, ctx.degrees)));
  const Var cut_term = scale(sum(div(assoc, volume)), -1.0 / static_cast<double>(k));

  const Var gram = scale(matmul(ct, c), static_cast<double>(k) / static_cast<double>(n));
  const Var offset = sub(gram, tape.constant(Matrix::Identity(k, k)));
  const Var penalty = sum(mul(offset, offset));
  return add(cut_term, scale(penalty, gamma));
}

std::vector<ad::Parameter*> DetectorParams::trainable(const DetectorConfig& config) {
  if (config.encoder == EncoderMode::global) return {&wg, &wc1, &wc2};
  std::vector<ad::Parameter*> out{&w0, &w1, &wc1, &wc2};
  if (config.normalization == Normalization::decoupled) {
    out.push_back(&w0_self);
    out.push_back(&w1_self);
  }
  return out;
}

Detector::Detector(Index feature_dim, DetectorConfig config)
    : config_(config), params_(std::make_unique<DetectorParams>()), rng_(derive_seed(config.seed, 11)) {
  if (config_.communities < 2) throw ConfigError("detector needs K >= 2 communities");
  if (config_.gamma < 0.0) throw ConfigError("gamma must be >= 0");
  if (config_.init_gain <= 0.0) throw ConfigError("init_gain must be > 0");
  if (config_.dropout < 0.0 || config_.dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  Rng init(derive_seed(config.seed, 7));
  DetectorParams& p = *params_;
  p.w0 = ad::glorot(feature_dim, config_.hidden, init, config_.init_gain);
  p.w1 = ad::glorot(config_.hidden, config_.embedding, init, config_.init_gain);
  p.wc1 = ad::glorot(config_.embedding, config_.assign_hidden, init, config_.init_gain);
  p.wc2 = ad::glorot(config_.assign_hidden, config_.communities, init, config_.init_gain);
  p.wg = ad::glorot(feature_dim, config_.embedding, init, config_.init_gain);
  p.w0_self = ad::glorot(feature_dim, config_.hidden, init, config_.init_gain);
  p.w1_self = ad::glorot(config_.hidden, config_.embedding, init, config_.init_gain);
  optimizer_ = std::make_unique<ad::Adam>(p.trainable(config_), config_.adam);
}

Detector::Detector(const Detector& other)
    : config_(other.config_),
      params_(std::make_unique<DetectorParams>(*other.params_)),
      optimizer_(std::make_unique<ad::Adam>(*other.optimizer_)),
      rng_(other.rng_) {
  rebind();
}

Detector& Detector::operator=(const Detector& other) {
  if (this == &other) return *this;
  config_ = other.config_;
  params_ = std::make_unique<DetectorParams>(*other.params_);
  optimizer_ = std::make_unique<ad::Adam>(*other.optimizer_);
  rng_ = other.rng_;
  return rebind();
}

Detector& Detector::rebind() {
  optimizer_->rebind(params_->trainable(config_));
  return *this;
}

ad::Var Detector::embed(ad::Tape& tape, const GraphContext& ctx) {
  using namespace ad;
  DetectorParams& p = *params_;
  const Index d = p.w0.value.rows();
  if (ctx.features.cols() != d) {
    throw DimensionError("detector expects " + std::to_string(d) + " features, graph has " +
                         std::to_string(ctx.features.cols()));
  }
  if (config_.encoder == EncoderMode::global) {
    if (ctx.propagated.size() == 0) throw std::logic_error("global encoder needs a context built in global mode");
    return softmax_rows(matmul(tape.constant(ctx.propagated), tape.parameter(p.wg)));
  }
  Var hidden = matmul(tape.constant(ctx.smoothed), tape.parameter(p.w0));
  if (config_.normalization == Normalization::decoupled) {
    hidden = add(hidden, matmul(tape.constant(ctx.features), tape.parameter(p.w0_self)));
  }
  hidden = relu(hidden);
  const Var projected = matmul(hidden, tape.parameter(p.w1));
  Var out = spmm(ctx.normalized, projected);
  if (config_.normalization == Normalization::decoupled) {
    out = add(out, matmul(hidden, tape.parameter(p.w1_self)));
  }
  return out;
}

ad::Var Detector::assign(ad::Tape& tape, const ad::Var& embeddings) {
  using namespace ad;
  DetectorParams& p = *params_;
  if (embeddings.cols() != p.wc1.value.rows()) throw DimensionError("assign: embedding width mismatch");
  const Var fc = dropout(relu(matmul(embeddings, tape.parameter(p.wc1))), config_.dropout);
  return softmax_rows(matmul(fc, tape.parameter(p.wc2)));
}

ad::Var Detector::loss(ad::Tape& tape, std::span<const GraphContext* const> graphs) {
  if (graphs.empty()) throw std::invalid_argument("detector loss needs at least one graph");
  ad::Var total;
  for (const GraphContext* ctx : graphs) {
    ad::Var l = ncut_loss(assign(tape, embed(tape, *ctx)), *ctx, config_.gamma);
    total = total.valid() ? ad::add(total, l) : l;
  }
  return total;
}

Assignment Detector::detect(const GraphContext& ctx) {
  ad::Tape tape(0, false);
  Assignment out;
  out.soft = assign(tape, embed(tape, ctx)).value();
  out.hard = hard_labels(out.soft);
  return out;
}

Matrix Detector::encoding(const GraphContext& ctx) {
  ad::Tape tape(0, false);
  const ad::Var h = embed(tape, ctx);
  if (config_.encoder == EncoderMode::global) return h.value();
  return ad::softmax_rows(h).value();
}

TrainStats Detector::fit(std::span<const GraphContext* const> graphs, int epochs, int patience) {
  TrainStats stats;
  stats.best_loss = std::numeric_limits<double>::infinity();
  std::optional<DetectorParams> best;
  int best_epoch = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    ad::Tape tape(rng_(), true);
    ad::Var l;
    try {
      l = loss(tape, graphs);
    } catch (const TrainingError& e) {
      throw TrainingError("detector diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    const double value = l.scalar();
    if (!std::isfinite(value)) throw TrainingError("detector loss is not finite at epoch " + std::to_string(epoch));
    stats.history.push_back(value);
    stats.epochs = epoch + 1;
    if (value < stats.best_loss) {
      stats.best_loss = value;
      best_epoch = epoch;
      if (patience > 0) best = *params_;
    } else if (patience > 0 && epoch - best_epoch >= patience) {
      break;
    }
    tape.backward(l);
    optimizer_->step();
    optimizer_->end_epoch();
  }
  if (best) *params_ = std::move(*best);
  return stats;
}

TrainedDetector train_detector(std::span<const Graph> graphs, const DetectorConfig& config) {
  if (graphs.empty()) throw std::invalid_argument("train_detector needs at least one graph");
  const Index n = graphs[0].num_nodes();
  for (const Graph& g : graphs) {
    if (g.num_nodes() != n || g.features() != graphs[0].features()) {
      throw std::invalid_argument("jointly trained graphs must share nodes and features");
    }
  }
  std::vector<GraphContext> contexts;
  contexts.reserve(graphs.size());
  for (const Graph& g : graphs) contexts.push_back(make_context(g, config));
  std::vector<const GraphContext*> ptrs;
  for (const GraphContext& c : contexts) ptrs.push_back(&c);

  TrainedDetector out{Detector(graphs[0].feature_dim(), config), {}, {}};
  out.stats = out.detector.fit(ptrs, config.max_epochs, config.patience);
  for (const GraphContext& c : contexts) out.assignments.push_back(out.detector.detect(c));
  return out;
}

}  // namespace cdattack
