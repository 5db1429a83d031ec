#include "cdattack/perturb.hpp"

#include <algorithm>
#include <iterator>

namespace cdattack {

std::size_t budget_used(const Graph& g, const Graph& h) {
  if (g.num_nodes() != h.num_nodes()) throw DimensionError("budget_used: graphs have different node sets");
  std::vector<Edge> diff;
  std::set_symmetric_difference(g.edges().begin(), g.edges().end(), h.edges().begin(), h.edges().end(),
                                std::back_inserter(diff));
  return diff.size();
}

double perturb_loss(Detector& encoder, const Graph& g, const Graph& h) {
  return perturb_loss(encoder, encoder.encoding(make_context(g, encoder.config())), h);
}

double perturb_loss(Detector& encoder, const Matrix& clean_encoding, const Graph& h) {
  return row_kl_sum(clean_encoding, encoder.encoding(make_context(h, encoder.config())));
}

}  // namespace cdattack
