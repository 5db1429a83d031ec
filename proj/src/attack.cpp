#include "cdattack/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "cdattack/perturb.hpp"

namespace cdattack {

namespace {

std::pair<std::size_t, std::size_t> split_budget(std::size_t budget, AttackMode mode) {
  if (mode == AttackMode::delete_only) return {budget, 0};
  return {budget / 2, budget - budget / 2};
}

// Indices of the k largest keys, ties to the lower index, returned in index order.
std::vector<Index> top_k(const Vector& keys, std::size_t k) {
  std::vector<Index> order(static_cast<std::size_t>(keys.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](Index a, Index b) { return keys(a) > keys(b) || (keys(a) == keys(b) && a < b); });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

Vector gumbel_keys(const Vector& log_prob, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector keys(log_prob.size());
  for (Index i = 0; i < keys.size(); ++i) {
    const double draw = std::max(u(rng), std::numeric_limits<double>::min());
    keys(i) = log_prob(i) - std::log(-std::log(draw));
  }
  return keys;
}

ad::Var pair_logits(ad::Tape& tape, const ad::Var& zx, const std::vector<Edge>& pairs, ad::Parameter& hidden,
                    ad::Parameter& out) {
  std::vector<Index> us, vs;
  us.reserve(pairs.size());
  vs.reserve(pairs.size());
  for (const Edge& e : pairs) {
    us.push_back(e.u);
    vs.push_back(e.v);
  }
  const ad::Var e = ad::mul(ad::gather_rows(zx, us), ad::gather_rows(zx, vs));
  return ad::matmul(ad::relu(ad::matmul(e, tape.parameter(hidden))), tape.parameter(out));
}

ad::Var column_log_softmax(const ad::Var& logits) {
  return ad::transpose(ad::log_softmax_rows(ad::transpose(logits)));
}

}  // namespace

AttackMode resolve_mode(const Graph& g, const AttackConfig& config) {
  if (config.mode != AttackMode::automatic) return config.mode;
  return g.num_edges() <= config.mode_threshold ? AttackMode::delete_insert : AttackMode::delete_only;
}

const char* to_string(AttackMode mode) {
  switch (mode) {
    case AttackMode::automatic: return "auto";
    case AttackMode::delete_only: return "delete-only";
    case AttackMode::delete_insert: return "delete+insert";
  }
  return "?";
}

std::vector<ad::Parameter*> GeneratorParams::all() {
  return {&enc_hidden, &enc_mu, &enc_log_sigma, &keep_hidden, &keep_out, &insert_hidden, &insert_out};
}

GeneratorParams make_generator(Index feature_dim, const AttackConfig& config) {
  Rng init(derive_seed(config.seed, 31));
  const Index pair_dim = config.latent + feature_dim;
  GeneratorParams p;
  p.enc_hidden = ad::glorot(feature_dim, config.encoder_hidden, init);
  p.enc_mu = ad::glorot(config.encoder_hidden, config.latent, init);
  p.enc_log_sigma = ad::glorot(config.encoder_hidden, config.latent, init);
  p.keep_hidden = ad::glorot(pair_dim, config.decoder_hidden, init);
  p.keep_out = ad::glorot(config.decoder_hidden, 1, init);
  p.insert_hidden = ad::glorot(pair_dim, config.decoder_hidden, init);
  p.insert_out = ad::glorot(config.decoder_hidden, 1, init);
  return p;
}

EncoderOut encode(ad::Tape& tape, GeneratorParams& params, const GraphContext& ctx) {
  using namespace ad;
  if (ctx.features.cols() != params.enc_hidden.value.rows()) throw DimensionError("encode: feature width mismatch");
  const Var hidden = relu(matmul(tape.constant(ctx.smoothed), tape.parameter(params.enc_hidden)));
  EncoderOut out;
  out.mu = spmm(ctx.normalized, matmul(hidden, tape.parameter(params.enc_mu)));
  out.log_sigma = spmm(ctx.normalized, matmul(hidden, tape.parameter(params.enc_log_sigma)));
  out.sigma = exp(out.log_sigma);
  std::normal_distribution<double> normal(0.0, 1.0);
  out.noise.resize(out.mu.rows(), out.mu.cols());
  for (Index i = 0; i < out.noise.size(); ++i) out.noise.data()[i] = normal(tape.rng);
  out.z = add(out.mu, mul(out.sigma, tape.constant(out.noise)));
  return out;
}

ad::Var prior_loss(const EncoderOut& enc) {
  using namespace ad;
  const Var terms = sub(add(mul(enc.mu, enc.mu), mul(enc.sigma, enc.sigma)), scale(enc.log_sigma, 2.0));
  return scale(sum(add_scalar(terms, -1.0)), 0.5);
}

CandidatePool build_pool(const Graph& g, std::span<const NodeId> targets, AttackMode mode, std::size_t budget,
                         std::size_t random_pool_factor, Rng& rng) {
  CandidatePool pool;
  pool.keep = g.edges();
  if (mode != AttackMode::delete_insert) return pool;
  std::set<Edge> chosen;
  const Index n = g.num_nodes();
  for (NodeId t : targets) {
    for (NodeId v = 0; v < n; ++v) {
      if (v != t && !g.has_edge(t, v)) chosen.insert(make_edge(t, v));
    }
  }
  const std::size_t all_pairs = static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2;
  const std::size_t non_edges = all_pairs - g.num_edges();
  const std::size_t wanted = std::min(non_edges, chosen.size() + random_pool_factor * budget);
  std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(n - 1));
  // Rejection sampling; callers only reach here when non-edges exist.
  while (chosen.size() < wanted) {
    const NodeId a = pick(rng);
    const NodeId b = pick(rng);
    if (a != b && !g.has_edge(a, b)) chosen.insert(make_edge(a, b));
  }
  pool.insert.assign(chosen.begin(), chosen.end());
  return pool;
}

Vector EdgeScoreTable::keep_prob() const { return keep_log_prob.value().col(0).array().exp(); }

Vector EdgeScoreTable::insert_prob() const {
  if (!insert_log_prob.valid()) return {};
  return insert_log_prob.value().col(0).array().exp();
}

EdgeScoreTable score_edges(ad::Tape& tape, GeneratorParams& params, const ad::Var& z, const Matrix& features,
                           const CandidatePool& pool) {
  if (pool.keep.empty()) throw std::invalid_argument("score_edges: graph has no edges to keep or delete");
  if (z.rows() != features.rows()) throw DimensionError("score_edges: latent and feature rows differ");
  const ad::Var zx = ad::concat_cols(z, tape.constant(features));
  EdgeScoreTable table;
  table.keep_pairs = pool.keep;
  table.keep_logits = pair_logits(tape, zx, pool.keep, params.keep_hidden, params.keep_out);
  table.keep_log_prob = column_log_softmax(table.keep_logits);
  if (!pool.insert.empty()) {
    table.insert_pairs = pool.insert;
    table.insert_logits = pair_logits(tape, zx, pool.insert, params.insert_hidden, params.insert_out);
    table.insert_log_prob = column_log_softmax(table.insert_logits);
  }
  return table;
}

SampledEdits sample_edits(const EdgeScoreTable& table, std::size_t budget, AttackMode mode, Rng& rng,
                          bool normalize_log_prob) {
  if (mode == AttackMode::automatic) throw std::invalid_argument("sample_edits needs a resolved mode");
  const auto [deletions, insertions] = split_budget(budget, mode);
  const std::size_t m = table.keep_pairs.size();
  if (deletions >= m && deletions > 0) {
    throw BudgetError("budget needs " + std::to_string(deletions) + " deletions but the graph has " +
                      std::to_string(m) + " edges");
  }
  if (insertions > table.insert_pairs.size()) {
    throw BudgetError("budget needs " + std::to_string(insertions) + " insertions but the pool has " +
                      std::to_string(table.insert_pairs.size()) + " candidates");
  }
  SampledEdits out;
  const Vector keep_lp = table.keep_log_prob.value().col(0);
  out.kept = top_k(gumbel_keys(keep_lp, rng), m - deletions);
  std::vector<bool> survives(m, false);
  for (Index i : out.kept) survives[static_cast<std::size_t>(i)] = true;
  for (std::size_t i = 0; i < m; ++i) {
    if (!survives[i]) out.edits.deleted.push_back(table.keep_pairs[i]);
  }
  if (insertions > 0) {
    const Vector insert_lp = table.insert_log_prob.value().col(0);
    out.inserted = top_k(gumbel_keys(insert_lp, rng), insertions);
    for (Index i : out.inserted) out.edits.inserted.push_back(table.insert_pairs[static_cast<std::size_t>(i)]);
  }
  out.log_prob = edit_log_prob(table, out, normalize_log_prob).scalar();
  return out;
}

ad::Var edit_log_prob(const EdgeScoreTable& table, const SampledEdits& sample, bool normalize) {
  using namespace ad;
  Tape& tape = table.keep_log_prob.tape();
  Var total = tape.constant(Matrix::Zero(1, 1));
  if (!sample.kept.empty()) {
    Var kept = sum(gather_rows(table.keep_log_prob, sample.kept));
    if (normalize) kept = scale(kept, 1.0 / static_cast<double>(sample.kept.size()));
    total = add(total, kept);
  }
  if (!sample.inserted.empty()) {
    Var inserted = sum(gather_rows(table.insert_log_prob, sample.inserted));
    if (normalize) inserted = scale(inserted, 1.0 / static_cast<double>(sample.inserted.size()));
    total = add(total, inserted);
  }
  return total;
}

double hide_loss(const Matrix& soft, std::span<const NodeId> targets) {
  if (targets.size() < 2) throw std::invalid_argument("hide_loss needs at least two targets");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < targets.size(); ++a) {
    for (std::size_t b = 0; b < targets.size(); ++b) {
      if (a == b) continue;
      best = std::min(best, row_kl_sum(soft.row(targets[a]), soft.row(targets[b])));
    }
  }
  return best;
}

GenLoss gen_loss(const ad::Var& prior, double hide, double perturb, const ad::Var& log_prob, double lambda_hide,
                 double lambda_perturb, double baseline) {
  if (!(lambda_hide < 0.0)) throw ConfigError("lambda_hide must be negative");
  GenLoss out;
  out.prior = prior.scalar();
  out.hide = hide;
  out.perturb = perturb;
  out.reward = lambda_hide * hide + lambda_perturb * perturb;
  out.total = ad::add(prior, ad::scale(log_prob, out.reward - baseline));
  out.value = out.total.scalar();
  return out;
}

AttackResult train_attack(const Graph& g, std::span<const NodeId> targets, const AttackConfig& config) {
  const TrainedDetector pretrained = train_detector(std::span<const Graph>(&g, 1), config.detector);
  return train_attack(g, targets, config, pretrained.detector);
}

AttackResult train_attack(const Graph& g, std::span<const NodeId> targets, const AttackConfig& config,
                          const Detector& pretrained) {
  if (!(config.lambda_hide < 0.0)) throw ConfigError("lambda_hide must be negative");
  if (targets.size() < 2) throw ConfigError("attack needs at least two targets");
  for (NodeId t : targets) {
    if (t < 0 || t >= g.num_nodes()) throw std::invalid_argument("target id out of range");
  }
  AttackResult result;
  result.mode = resolve_mode(g, config);
  Detector frozen = pretrained;
  const GraphContext clean = make_context(g, frozen.config());
  result.hide_clean = hide_loss(frozen.detect(clean).soft, targets);
  if (config.budget == 0) {
    result.hide = result.hide_clean;
    return result;
  }
  const auto [deletions, insertions] = split_budget(config.budget, result.mode);
  if (deletions >= g.num_edges() && deletions > 0) {
    throw BudgetError("budget " + std::to_string(config.budget) + " needs " + std::to_string(deletions) +
                      " deletions but the graph has " + std::to_string(g.num_edges()) + " edges");
  }

  Rng pool_rng(derive_seed(config.seed, 22));
  const CandidatePool pool =
      build_pool(g, targets, result.mode, config.budget, config.random_pool_factor, pool_rng);
  if (insertions > pool.insert.size()) throw BudgetError("insertion pool is smaller than the insertion budget");

  const Matrix clean_encoding = frozen.encoding(clean);
  Detector robust = pretrained;
  GeneratorParams gen = make_generator(g.feature_dim(), config);
  ad::Adam optimizer(gen.all(), config.adam);
  Rng rng(derive_seed(config.seed, 21));

  double baseline = 0.0;
  double best_hide = -std::numeric_limits<double>::infinity();
  double best_perturb = std::numeric_limits<double>::infinity();
  for (int it = 0; it < config.iterations; ++it) {
    ad::Tape tape(rng(), false);
    const EncoderOut enc = encode(tape, gen, clean);
    const EdgeScoreTable table = score_edges(tape, gen, enc.z, g.features(), pool);
    const SampledEdits sample = sample_edits(table, config.budget, result.mode, rng, config.normalize_log_prob);
    const Graph attacked = apply_edits(g, sample.edits);
    const GraphContext attacked_ctx = make_context(attacked, robust.config());

    const GraphContext* pair[] = {&clean, &attacked_ctx};
    robust.fit(pair, config.detector_epochs, 0);
    const double hide = hide_loss(robust.detect(attacked_ctx).soft, targets);
    const double perturb = perturb_loss(frozen, clean_encoding, attacked);

    const ad::Var log_prob = edit_log_prob(table, sample, config.normalize_log_prob);
    const double reward = config.lambda_hide * hide + config.lambda_perturb * perturb;
    if (it == 0) baseline = reward;
    const GenLoss loss = gen_loss(prior_loss(enc), hide, perturb, log_prob, config.lambda_hide,
                                  config.lambda_perturb, config.reward_baseline ? baseline : 0.0);
    if (!std::isfinite(loss.value)) {
      throw TrainingError("generator loss is not finite at iteration " + std::to_string(it) + " (prior " +
                          std::to_string(loss.prior) + ", hide " + std::to_string(hide) + ", perturb " +
                          std::to_string(perturb) + ")");
    }
    tape.backward(loss.total);
    optimizer.step();
    optimizer.end_epoch();
    baseline = config.baseline_decay * baseline + (1.0 - config.baseline_decay) * reward;

    result.reward_history.push_back(reward);
    result.hide_history.push_back(hide);
    if (hide > best_hide || (hide == best_hide && perturb < best_perturb)) {
      best_hide = hide;
      best_perturb = perturb;
      result.edits = sample.edits;
      result.best_iteration = it;
    }
  }
  result.hide = best_hide;
  result.perturb = best_perturb;
  return result;
}

}  // namespace cdattack
