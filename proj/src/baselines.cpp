#include "cdattack/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace cdattack {

namespace {

template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> pool, std::size_t k, Rng& rng) {
  k = std::min(k, pool.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  return pool;
}

std::vector<bool> target_mask(const Graph& g, std::span<const NodeId> targets) {
  std::vector<bool> mask(static_cast<std::size_t>(g.num_nodes()), false);
  for (NodeId t : targets) {
    if (t < 0 || t >= g.num_nodes()) throw std::invalid_argument("target id out of range");
    mask[t] = true;
  }
  return mask;
}

void require_budget(std::size_t budget) {
  if (budget < 1) throw BudgetError("baselines need a budget of at least 1");
}

}  // namespace

const char* to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::dice: return "DICE";
    case BaselineKind::mba: return "MBA";
    case BaselineKind::rta: return "RTA";
  }
  return "?";
}

BaselineKind parse_baseline(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "dice") return BaselineKind::dice;
  if (s == "mba") return BaselineKind::mba;
  if (s == "rta") return BaselineKind::rta;
  throw ConfigError("unknown baseline '" + name + "'");
}

double modularity(const Graph& g, std::span<const int> labels) {
  if (static_cast<Index>(labels.size()) != g.num_nodes()) throw DimensionError("modularity: one label per node");
  const double m = static_cast<double>(g.num_edges());
  if (m == 0.0) return 0.0;
  const int k = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<double> intra(static_cast<std::size_t>(k), 0.0), degree(static_cast<std::size_t>(k), 0.0);
  for (const Edge& e : g.edges()) {
    degree[labels[e.u]] += 1.0;
    degree[labels[e.v]] += 1.0;
    if (labels[e.u] == labels[e.v]) intra[labels[e.u]] += 1.0;
  }
  double q = 0.0;
  for (int c = 0; c < k; ++c) q += intra[c] / m - std::pow(degree[c] / (2.0 * m), 2);
  return q;
}

BaselineResult dice(const Graph& g, std::span<const NodeId> targets, std::size_t budget, std::uint64_t seed,
                    double delete_ratio) {
  require_budget(budget);
  if (delete_ratio < 0.0 || delete_ratio > 1.0) throw ConfigError("DICE delete ratio must lie in [0, 1]");
  const std::vector<bool> in_target = target_mask(g, targets);
  Rng rng(seed);

  std::vector<Edge> deletable;
  for (const Edge& e : g.edges()) {
    if (in_target[e.u] || in_target[e.v]) deletable.push_back(e);
  }
  std::vector<Edge> insertable;
  for (NodeId t : targets) {
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      if (!in_target[v] && !g.has_edge(t, v)) insertable.push_back(make_edge(t, v));
    }
  }
  if (deletable.empty() && insertable.empty()) throw BudgetError("DICE has no candidate edits around the targets");

  BaselineResult out;
  const auto wanted_deletions = static_cast<std::size_t>(std::floor(static_cast<double>(budget) * delete_ratio));
  out.edits.deleted = sample_without_replacement(deletable, wanted_deletions, rng);
  out.edits.inserted = sample_without_replacement(insertable, budget - out.edits.deleted.size(), rng);
  if (out.edits.size() < budget) {
    out.warnings.push_back("DICE ran out of candidates after " + std::to_string(out.edits.size()) + " edits");
  }
  return out;
}

BaselineResult mba(const Graph& g, std::span<const NodeId> targets, std::span<const int> partition,
                   std::size_t budget, std::uint64_t seed) {
  require_budget(budget);
  if (static_cast<Index>(partition.size()) != g.num_nodes()) throw DimensionError("MBA: one label per node");
  const std::vector<bool> in_target = target_mask(g, targets);
  Rng rng(seed);

  const int k = *std::max_element(partition.begin(), partition.end()) + 1;
  std::vector<double> degree(static_cast<std::size_t>(k), 0.0);
  double intra = 0.0;
  for (const Edge& e : g.edges()) {
    degree[partition[e.u]] += 1.0;
    degree[partition[e.v]] += 1.0;
    if (partition[e.u] == partition[e.v]) intra += 1.0;
  }
  double degree_sq = 0.0;
  for (double d : degree) degree_sq += d * d;
  double m = static_cast<double>(g.num_edges());

  auto q_of = [](double edges, double intra_edges, double sq) {
    return edges == 0.0 ? 0.0 : intra_edges / edges - sq / (4.0 * edges * edges);
  };

  std::set<Edge> deleted, inserted;
  BaselineResult out;
  for (std::size_t step = 0; step < budget; ++step) {
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::pair<Edge, bool>> ties;
    auto consider = [&](const Edge& e, bool is_delete, double q) {
      const double tol = ties.empty() ? 0.0 : 1e-12 * std::max(1.0, std::abs(best));
      if (ties.empty() || q < best - tol) {
        best = q;
        ties.assign(1, {e, is_delete});
      } else if (std::abs(q - best) <= tol) {
        ties.emplace_back(e, is_delete);
      }
    };
    for (const Edge& e : g.edges()) {
      if (!(in_target[e.u] || in_target[e.v]) || partition[e.u] != partition[e.v] || deleted.contains(e)) continue;
      const double d = degree[partition[e.u]];
      consider(e, true, q_of(m - 1.0, intra - 1.0, degree_sq - 4.0 * d + 4.0));
    }
    std::set<Edge> seen;
    for (NodeId t : targets) {
      for (NodeId v = 0; v < g.num_nodes(); ++v) {
        if (v == t || partition[v] == partition[t] || g.has_edge(t, v)) continue;
        const Edge e = make_edge(t, v);
        if (inserted.contains(e) || !seen.insert(e).second) continue;
        const double da = degree[partition[t]];
        const double db = degree[partition[v]];
        consider(e, false, q_of(m + 1.0, intra, degree_sq + 2.0 * da + 2.0 * db + 2.0));
      }
    }
    if (ties.empty()) {
      out.warnings.push_back("MBA ran out of candidates after " + std::to_string(step) + " edits");
      break;
    }
    std::uniform_int_distribution<std::size_t> pick(0, ties.size() - 1);
    const auto [edge, is_delete] = ties[pick(rng)];
    const int a = partition[edge.u];
    const int b = partition[edge.v];
    degree_sq -= degree[a] * degree[a] + (a != b ? degree[b] * degree[b] : 0.0);
    if (is_delete) {
      deleted.insert(edge);
      out.edits.deleted.push_back(edge);
      degree[a] -= 2.0;
      intra -= 1.0;
      m -= 1.0;
    } else {
      inserted.insert(edge);
      out.edits.inserted.push_back(edge);
      degree[a] += 1.0;
      degree[b] += 1.0;
      m += 1.0;
    }
    degree_sq += degree[a] * degree[a] + (a != b ? degree[b] * degree[b] : 0.0);
  }
  return out;
}

BaselineResult rta(const Graph& g, std::span<const NodeId> targets, std::size_t budget, std::uint64_t seed) {
  require_budget(budget);
  const std::vector<bool> in_target = target_mask(g, targets);
  std::vector<NodeId> others;
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    if (!in_target[v]) others.push_back(v);
  }
  if (others.empty() || targets.empty()) throw BudgetError("RTA needs both target and non-target nodes");
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick_node(0, others.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_target(0, targets.size() - 1);

  std::set<Edge> deleted, inserted;
  BaselineResult out;
  std::size_t failures = 0;
  while (out.edits.size() < budget) {
    if (failures >= 100 * budget) {
      out.warnings.push_back("RTA gave up after " + std::to_string(failures) + " failed draws");
      break;
    }
    const NodeId u = others[pick_node(rng)];
    std::vector<Edge> removable;
    bool adjacent = false;
    for (NodeId t : targets) {
      const Edge e = make_edge(u, t);
      const bool present = (g.has_edge(u, t) && !deleted.contains(e)) || inserted.contains(e);
      adjacent = adjacent || present;
      if (present && !inserted.contains(e)) removable.push_back(e);
    }
    if (adjacent) {
      if (removable.empty()) {
        ++failures;
        continue;
      }
      std::uniform_int_distribution<std::size_t> pick(0, removable.size() - 1);
      const Edge e = removable[pick(rng)];
      deleted.insert(e);
      out.edits.deleted.push_back(e);
    } else {
      const NodeId t = targets[pick_target(rng)];
      const Edge e = make_edge(u, t);
      if (deleted.contains(e)) {
        ++failures;
        continue;
      }
      inserted.insert(e);
      out.edits.inserted.push_back(e);
    }
  }
  return out;
}

}  // namespace cdattack
