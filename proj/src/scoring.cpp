#include "knnmt/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace knnmt {

bool TokenDistribution::is_valid(double tol) const noexcept {
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) return false;
    sum += p;
  }
  return std::abs(sum - 1.0) <= tol;
}

void ScoreConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw InvalidInput("temperature must be positive, got " + std::to_string(temperature));
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw InvalidInput("lambda must lie in [0, 1], got " + std::to_string(lambda));
}

namespace {

enum class Pool { sum, max };

// Weights are exp(-(d - d_min) / tau); the common factor exp(-d_min / tau)
// cancels in the normalization and keeps the closest neighbor at weight 1.
std::optional<TokenDistribution> neighbor_softmax(const NeighborSet& ns, double temperature,
                                                  std::size_t vocab_size, Pool pool) {
  if (!(temperature > 0.0)) throw InvalidInput("temperature must be positive");
  if (ns.empty()) return std::nullopt;
  double d_min = ns.front().distance;
  for (const auto& n : ns) d_min = std::min(d_min, n.distance);

  TokenDistribution out(vocab_size);
  for (const auto& n : ns) {
    if (n.token >= vocab_size)
      throw InvalidInput("neighbor token " + std::to_string(n.token) + " outside vocabulary");
    const double w = std::exp(-(n.distance - d_min) / temperature);
    double& slot = out.probs[n.token];
    slot = pool == Pool::sum ? slot + w : std::max(slot, w);
  }
  double total = 0.0;
  for (double p : out.probs) total += p;
  for (double& p : out.probs) p /= total;
  return out;
}

}  // namespace

std::optional<TokenDistribution> knn_distribution(const NeighborSet& ns, double temperature,
                                                  std::size_t vocab_size) {
  return neighbor_softmax(ns, temperature, vocab_size, Pool::sum);
}

std::optional<TokenDistribution> uniquify_distribution(const NeighborSet& ns, double temperature,
                                                       std::size_t vocab_size) {
  return neighbor_softmax(ns, temperature, vocab_size, Pool::max);
}

Interpolated interpolate(const std::optional<TokenDistribution>& p_knn, const TokenDistribution& p_mt,
                         double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw InvalidInput("lambda must lie in [0, 1], got " + std::to_string(lambda));
  if (!p_knn) return {p_mt, true};
  if (p_knn->size() != p_mt.size())
    throw InvalidInput("interpolate: vocabulary sizes differ (" + std::to_string(p_knn->size()) +
                       " vs " + std::to_string(p_mt.size()) + ")");
  TokenDistribution out(p_mt.size());
  for (std::size_t v = 0; v < out.size(); ++v)
    out.probs[v] = lambda * p_knn->probs[v] + (1.0 - lambda) * p_mt.probs[v];
  return {std::move(out), false};
}

}  // namespace knnmt
