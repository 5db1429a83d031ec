#pragma once

#include <span>
#include <string>
#include <vector>

#include "cdattack/graph.hpp"

namespace cdattack {

enum class BaselineKind { dice, mba, rta };

const char* to_string(BaselineKind kind);
BaselineKind parse_baseline(const std::string& name);

struct BaselineResult {
  EditSet edits;
  std::vector<std::string> warnings;
};

/// Newman modularity Σ_k (L_k/m − (D_k/2m)²) of a hard partition.
double modularity(const Graph& g, std::span<const int> labels);

/// Deletes ⌊Δ·delete_ratio⌋ random edges touching C⁺ (fewer if there are not
/// enough), then spends the rest on random non-edges between C⁺ and V∖C⁺.
BaselineResult dice(const Graph& g, std::span<const NodeId> targets, std::size_t budget, std::uint64_t seed,
                    double delete_ratio = 0.5);

/// Greedy modularity attack against a fixed partition: each step applies the
/// intra-community deletion or inter-community insertion touching C⁺ that
/// leaves the lowest modularity. Equal-gain candidates are broken at random.
BaselineResult mba(const Graph& g, std::span<const NodeId> targets, std::span<const int> partition,
                   std::size_t budget, std::uint64_t seed);

/// Δ steps of: draw a node u ∉ C⁺; if u is adjacent to C⁺ delete a random
/// such edge, otherwise connect u to a random target. Impossible draws are
/// retried, up to 100·Δ failures.
BaselineResult rta(const Graph& g, std::span<const NodeId> targets, std::size_t budget, std::uint64_t seed);

}  // namespace cdattack
