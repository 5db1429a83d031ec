#include "cdattack/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace cdattack {

Edge make_edge(NodeId a, NodeId b) {
  if (a == b) throw std::invalid_argument("self-loop on node " + std::to_string(a));
  return a < b ? Edge{a, b} : Edge{b, a};
}

Graph::Graph(Index num_nodes, std::vector<Edge> edges, Matrix features, std::vector<std::string> labels)
    : num_nodes_(num_nodes), edges_(std::move(edges)), features_(std::move(features)), labels_(std::move(labels)) {
  if (num_nodes_ < 0) throw std::invalid_argument("negative node count");
  if (features_.rows() != num_nodes_) {
    throw DimensionError("feature matrix has " + std::to_string(features_.rows()) + " rows, expected " +
                         std::to_string(num_nodes_));
  }
  if (!features_.allFinite()) throw std::invalid_argument("non-finite node features");
  if (!labels_.empty() && static_cast<Index>(labels_.size()) != num_nodes_) {
    throw std::invalid_argument("label count does not match node count");
  }
  for (Edge& e : edges_) {
    e = make_edge(e.u, e.v);
    if (e.u < 0 || e.v >= num_nodes_) {
      throw std::invalid_argument("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) + ") out of range");
    }
  }
  std::sort(edges_.begin(), edges_.end());
  if (auto dup = std::adjacent_find(edges_.begin(), edges_.end()); dup != edges_.end()) {
    throw std::invalid_argument("duplicate edge (" + std::to_string(dup->u) + "," + std::to_string(dup->v) + ")");
  }

  neighbors_.assign(static_cast<std::size_t>(num_nodes_), {});
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * edges_.size());
  for (const Edge& e : edges_) {
    neighbors_[e.u].push_back(e.v);
    neighbors_[e.v].push_back(e.u);
    triplets.emplace_back(e.u, e.v, 1.0);
    triplets.emplace_back(e.v, e.u, 1.0);
  }
  for (auto& list : neighbors_) std::sort(list.begin(), list.end());
  auto adj = std::make_shared<SparseMatrix>(num_nodes_, num_nodes_);
  adj->setFromTriplets(triplets.begin(), triplets.end());
  adjacency_ = std::move(adj);
}

bool Graph::has_edge(NodeId a, NodeId b) const {
  if (a == b) return false;
  const Edge e = make_edge(a, b);
  return std::binary_search(edges_.begin(), edges_.end(), e);
}

Vector Graph::degrees() const {
  Vector d(num_nodes_);
  for (Index i = 0; i < num_nodes_; ++i) d(i) = static_cast<double>(neighbors_[i].size());
  return d;
}

Graph Graph::with_edges(std::vector<Edge> edges) const { return Graph(num_nodes_, std::move(edges), features_, labels_); }

bool operator==(const Graph& a, const Graph& b) {
  return a.num_nodes_ == b.num_nodes_ && a.edges_ == b.edges_ && a.features_ == b.features_ && a.labels_ == b.labels_;
}

void validate_edits(const Graph& g, const EditSet& edits) {
  std::set<Edge> seen;
  for (const Edge& e : edits.deleted) {
    const Edge c = make_edge(e.u, e.v);
    if (!g.has_edge(c.u, c.v)) {
      throw std::invalid_argument("deleted pair (" + std::to_string(c.u) + "," + std::to_string(c.v) +
                                  ") is not an edge");
    }
    if (!seen.insert(c).second) throw std::invalid_argument("pair edited twice");
  }
  for (const Edge& e : edits.inserted) {
    const Edge c = make_edge(e.u, e.v);
    if (c.u < 0 || c.v >= g.num_nodes()) throw std::invalid_argument("inserted pair out of range");
    if (g.has_edge(c.u, c.v)) {
      throw std::invalid_argument("inserted pair (" + std::to_string(c.u) + "," + std::to_string(c.v) +
                                  ") is already an edge");
    }
    if (!seen.insert(c).second) throw std::invalid_argument("pair edited twice");
  }
}

Graph apply_edits(const Graph& g, const EditSet& edits) {
  validate_edits(g, edits);
  std::set<Edge> removed;
  for (const Edge& e : edits.deleted) removed.insert(make_edge(e.u, e.v));
  std::vector<Edge> out;
  out.reserve(g.num_edges() + edits.inserted.size());
  for (const Edge& e : g.edges()) {
    if (!removed.contains(e)) out.push_back(e);
  }
  for (const Edge& e : edits.inserted) out.push_back(make_edge(e.u, e.v));
  return g.with_edges(std::move(out));
}

NormalizedAdjacency normalize(const Graph& g, Normalization mode) {
  const Index n = g.num_nodes();
  const bool self_loop = mode == Normalization::with_self_loop;
  Vector inv_sqrt(n);
  for (Index i = 0; i < n; ++i) {
    const double d = static_cast<double>(g.degree(static_cast<NodeId>(i))) + (self_loop ? 1.0 : 0.0);
    inv_sqrt(i) = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * g.num_edges() + static_cast<std::size_t>(n));
  for (const Edge& e : g.edges()) {
    const double w = inv_sqrt(e.u) * inv_sqrt(e.v);
    triplets.emplace_back(e.u, e.v, w);
    triplets.emplace_back(e.v, e.u, w);
  }
  if (self_loop) {
    for (Index i = 0; i < n; ++i) triplets.emplace_back(i, i, inv_sqrt(i) * inv_sqrt(i));
  }
  auto m = std::make_shared<SparseMatrix>(n, n);
  m->setFromTriplets(triplets.begin(), triplets.end());
  return {mode, std::move(m)};
}

Matrix personalized_pagerank(const Graph& g, const PprOptions& options) {
  if (!(options.alpha > 0.0 && options.alpha <= 1.0)) throw ConfigError("PPR alpha must lie in (0, 1]");
  const Index n = g.num_nodes();
  const auto normalized = normalize(g, options.normalization).matrix;
  const SparseMatrix& a = *normalized;
  Matrix scores = options.alpha * Matrix::Identity(n, n);
  if (n == 0) return scores;
  double residual = 0.0;
  for (int it = 0; it < options.max_iterations; ++it) {
    Matrix next = (1.0 - options.alpha) * (scores * a);
    next.diagonal().array() += options.alpha;
    // Successive iterates differ by exactly the fixed-point residual of the old iterate.
    residual = (next - scores).cwiseAbs().rowwise().sum().maxCoeff();
    scores = std::move(next);
    if (residual < options.tolerance) {
      residual = ppr_residual(scores, a, options.alpha);
      if (residual < options.tolerance) return scores;
    }
  }
  throw ConvergenceError("personalized PageRank did not converge in " + std::to_string(options.max_iterations) +
                             " iterations",
                         residual);
}

Benchmark sbm_generate(const SbmConfig& c) {
  if (c.blocks < 1 || c.per_block < 1) throw ConfigError("SBM needs at least one block of one node");
  if (!(0.0 <= c.p_out && c.p_out < c.p_in && c.p_in <= 1.0)) throw ConfigError("SBM requires 0 <= p_out < p_in <= 1");
  if (c.feature_dim < c.blocks) throw ConfigError("SBM feature_dim must be >= blocks");
  if (c.feature_noise < 0.0) throw ConfigError("SBM feature_noise must be >= 0");

  Benchmark out;
  const Index n = c.blocks * c.per_block;
  Rng edge_rng(derive_seed(c.seed, 1));
  Rng feature_rng(derive_seed(c.seed, 2));
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  out.blocks.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) out.blocks[i] = static_cast<int>(i / c.per_block);

  std::vector<Edge> edges;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double p = out.blocks[i] == out.blocks[j] ? c.p_in : c.p_out;
      if (coin(edge_rng) < p) edges.push_back({static_cast<NodeId>(i), static_cast<NodeId>(j)});
    }
  }

  Matrix features(n, c.feature_dim);
  for (Index i = 0; i < n; ++i) {
    for (Index f = 0; f < c.feature_dim; ++f) {
      features(i, f) = (f == out.blocks[i] ? 1.0 : 0.0) + c.feature_noise * noise(feature_rng);
    }
  }

  const double expected_out_degree = c.p_out * static_cast<double>(c.per_block * (c.blocks - 1));
  const double expected_in_degree = c.p_in * static_cast<double>(c.per_block - 1);
  if (c.blocks > 1 && expected_out_degree < 1.0) {
    out.warnings.push_back("expected inter-block degree " + std::to_string(expected_out_degree) +
                           " < 1: blocks are likely isolated from each other");
  }
  if (expected_in_degree < 1.0) {
    out.warnings.push_back("expected intra-block degree " + std::to_string(expected_in_degree) +
                           " < 1: blocks are likely internally disconnected");
  }
  out.graph = Graph(n, std::move(edges), std::move(features));
  return out;
}

}  // namespace cdattack
