#pragma once

#include <compare>
#include <memory>
#include <string>
#include <vector>

#include "cdattack/types.hpp"

namespace cdattack {

/// Undirected edge stored as (min, max).
struct Edge {
  NodeId u = 0;
  NodeId v = 0;
  auto operator<=>(const Edge&) const = default;
};

/// Canonical edge for an unordered pair; throws on a self-loop.
Edge make_edge(NodeId a, NodeId b);

/// Immutable undirected graph with dense node features.
///
/// Edges are canonicalised to sorted (min, max) pairs; self-loops, duplicates
/// and out-of-range ids are rejected at construction.
class Graph {
 public:
  Graph() = default;
  Graph(Index num_nodes, std::vector<Edge> edges, Matrix features, std::vector<std::string> labels = {});

  Index num_nodes() const { return num_nodes_; }
  std::size_t num_edges() const { return edges_.size(); }
  Index feature_dim() const { return features_.cols(); }

  const std::vector<Edge>& edges() const { return edges_; }
  const Matrix& features() const { return features_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<std::vector<NodeId>>& neighbors() const { return neighbors_; }

  bool has_edge(NodeId a, NodeId b) const;
  Index degree(NodeId i) const { return static_cast<Index>(neighbors_[i].size()); }
  Vector degrees() const;

  const SparseMatrix& adjacency() const { return *adjacency_; }
  std::shared_ptr<const SparseMatrix> adjacency_ptr() const { return adjacency_; }

  /// Same node set and features, different edge set.
  Graph with_edges(std::vector<Edge> edges) const;

  friend bool operator==(const Graph& a, const Graph& b);

 private:
  Index num_nodes_ = 0;
  std::vector<Edge> edges_;
  Matrix features_;
  std::vector<std::string> labels_;
  std::vector<std::vector<NodeId>> neighbors_;
  std::shared_ptr<const SparseMatrix> adjacency_ = std::make_shared<SparseMatrix>();
};

/// Edge edits relative to a base graph.
struct EditSet {
  std::vector<Edge> deleted;
  std::vector<Edge> inserted;

  std::size_t size() const { return deleted.size() + inserted.size(); }
  bool empty() const { return deleted.empty() && inserted.empty(); }
};

/// Throws std::invalid_argument unless deletions are existing edges,
/// insertions are non-edges, and no pair repeats.
void validate_edits(const Graph& g, const EditSet& edits);
Graph apply_edits(const Graph& g, const EditSet& edits);

enum class Normalization {
  /// D̃^-1/2 (A + I) D̃^-1/2 with D̃ = D + I.
  with_self_loop,
  /// D^-1/2 A D^-1/2; isolated nodes get an all-zero row.
  decoupled,
};

struct NormalizedAdjacency {
  Normalization mode = Normalization::with_self_loop;
  std::shared_ptr<const SparseMatrix> matrix;
};

NormalizedAdjacency normalize(const Graph& g, Normalization mode);

struct PprOptions {
  double alpha = 0.1;
  double tolerance = 1e-8;
  int max_iterations = 1000;
  Normalization normalization = Normalization::with_self_loop;
};

/// Personalized PageRank for every start node by dense power iteration.
///
/// Row s of the result is the fixed point of π = α e_s + (1 − α) π Ā, so entry
/// (i, j) is the influence of node i on node j. Throws ConvergenceError with
/// the worst row residual if max_iterations is exhausted.
Matrix personalized_pagerank(const Graph& g, const PprOptions& options = {});

/// Largest per-row L1 residual of the PPR fixed-point equation.
template <typename Derived>
double ppr_residual(const Eigen::MatrixBase<Derived>& scores, const SparseMatrix& normalized, double alpha) {
  Matrix rhs = (1.0 - alpha) * (scores.template cast<double>() * normalized);
  rhs.diagonal().array() += alpha;
  return (scores.template cast<double>() - rhs).cwiseAbs().rowwise().sum().maxCoeff();
}

struct SbmConfig {
  Index blocks = 10;
  Index per_block = 50;
  double p_in = 0.3;
  double p_out = 0.01;
  /// Must be ≥ blocks; the first `blocks` columns carry the one-hot block id.
  Index feature_dim = 10;
  double feature_noise = 0.5;
  std::uint64_t seed = 0;
};

struct Benchmark {
  Graph graph;
  std::vector<int> blocks;
  std::vector<std::string> warnings;
};

/// Planted-partition graph; node i belongs to block i / per_block.
Benchmark sbm_generate(const SbmConfig& config);

}  // namespace cdattack
