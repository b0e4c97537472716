#pragma once

// Search-space perturbations: Gaussian-norm query noise (static or
// adaptive magnitude) and random subsampling of an enlarged neighbor set.
//
// Noise magnitudes are in the same units as neighbor distances, i.e.
// squared L2. The norm |a| with a ~ N(m, s^2) follows a folded normal, so
// for s comparable to m the noise can be much larger than m; it is not
// capped.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "knnmt/datastore.hpp"
#include "knnmt/rng.hpp"

namespace knnmt {

struct NoiseParams {
  double mean = 0.0;    // m
  double stddev = 0.0;  // s, >= 0
};

enum class PerturbKind { none, static_noise, adaptive_noise, randomize };

std::string to_string(PerturbKind kind);
PerturbKind parse_perturb_kind(const std::string& name);

struct PerturbConfig {
  PerturbKind kind = PerturbKind::none;
  // Static noise: used directly as (m, s).
  double h_m = 0.0;
  double h_s = 0.0;
  // Adaptive noise: m = h_m_adaptive * d_max, s = h_s_adaptive * d_std per query.
  double h_m_adaptive = 0.0;
  double h_s_adaptive = 0.0;
  // Randomize: retrieve floor(h * k), keep k. Must exceed 1; `allow_unit_h`
  // admits h == 1 for identity checks.
  double h = 2.0;
  bool allow_unit_h = false;
  std::uint64_t seed = 0;

  void validate() const;
};

/// floor(h * k), robust to decimal inputs such as h = 2.3 that are not
/// exactly representable.
std::size_t expanded_k(double h, std::size_t k);

/// Noise vector with direction uniform on the sphere and norm |a|,
/// a ~ N(m, s^2). Draw order: a first, then the `dim` direction components.
std::vector<float> sample_noise(std::size_t dim, const NoiseParams& params, RngStream& rng);

/// query + sample_noise(query.size(), params, rng).
std::vector<float> noised_query(std::span<const float> query, const NoiseParams& params,
                                RngStream& rng);

/// m = h_m * max distance, s = h_s * population std of distances.
NoiseParams adaptive_params(const NeighborSet& pre_search, double h_m, double h_s);

struct DistanceStats {
  double mean = 0.0;   // over every (query, neighbor) distance
  double std = 0.0;    // population std of the same samples
  double d_max = 0.0;  // mean over queries of the per-query maximum
  double d_std = 0.0;  // mean over queries of the per-query population std
};

/// Statistics of exact k-NN distances for a set of (validation) queries.
DistanceStats estimate_distance_stats(const Datastore& ds,
                                      std::span<const std::vector<float>> queries, std::size_t k);

/// Uniform sample without replacement of min(k, |candidates|) neighbors,
/// returned in neighbor order.
NeighborSet randomized_select(const NeighborSet& candidates, std::size_t k, RngStream& rng);

}  // namespace knnmt
