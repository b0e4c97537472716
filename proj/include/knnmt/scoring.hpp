#pragma once

// Next-token distributions from retrieved neighbors, and their mixture
// with the base model distribution.

#include <cstddef>
#include <optional>
#include <vector>

#include "knnmt/datastore.hpp"

namespace knnmt {

/// Dense probability vector over the target vocabulary.
struct TokenDistribution {
  std::vector<double> probs;

  TokenDistribution() = default;
  explicit TokenDistribution(std::size_t vocab_size) : probs(vocab_size, 0.0) {}
  explicit TokenDistribution(std::vector<double> p) : probs(std::move(p)) {}

  std::size_t size() const noexcept { return probs.size(); }
  double operator[](std::size_t v) const noexcept { return probs[v]; }

  /// Sum within `tol` of one, no negative or non-finite entries.
  bool is_valid(double tol = 1e-9) const noexcept;

  friend bool operator==(const TokenDistribution&, const TokenDistribution&) = default;
};

struct ScoreConfig {
  double temperature = 10.0;  // tau, in squared-distance units
  double lambda = 0.5;        // weight of the kNN distribution
  bool uniquify = false;

  void validate() const;
};

/// probs[v] proportional to the sum of exp(-d/tau) over neighbors with
/// token v. Returns nullopt for an empty neighbor set.
std::optional<TokenDistribution> knn_distribution(const NeighborSet& ns, double temperature,
                                                  std::size_t vocab_size);

/// As knn_distribution but each token contributes only its closest
/// neighbor (max instead of sum), then normalized.
std::optional<TokenDistribution> uniquify_distribution(const NeighborSet& ns, double temperature,
                                                       std::size_t vocab_size);

struct Interpolated {
  TokenDistribution dist;
  bool fallback = false;  // set when the kNN side was empty and p_mt was returned as-is
};

/// lambda * p_knn + (1 - lambda) * p_mt. A missing p_knn returns p_mt
/// unchanged with `fallback` set.
Interpolated interpolate(const std::optional<TokenDistribution>& p_knn, const TokenDistribution& p_mt,
                         double lambda);

}  // namespace knnmt
