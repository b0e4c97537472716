#include "knnmt/perturb.hpp"

#include <algorithm>
#include <cmath>

namespace knnmt {

std::string to_string(PerturbKind kind) {
  switch (kind) {
    case PerturbKind::none: return "none";
    case PerturbKind::static_noise: return "static_noise";
    case PerturbKind::adaptive_noise: return "adaptive_noise";
    case PerturbKind::randomize: return "randomize";
  }
  return "none";
}

PerturbKind parse_perturb_kind(const std::string& name) {
  if (name == "none") return PerturbKind::none;
  if (name == "static_noise") return PerturbKind::static_noise;
  if (name == "adaptive_noise") return PerturbKind::adaptive_noise;
  if (name == "randomize") return PerturbKind::randomize;
  throw InvalidInput("unknown perturbation kind '" + name + "'");
}

void PerturbConfig::validate() const {
  auto finite = [](double x) { return std::isfinite(x); };
  if (!finite(h_m) || !finite(h_s) || !finite(h_m_adaptive) || !finite(h_s_adaptive) || !finite(h))
    throw InvalidInput("perturbation parameters must be finite");
  if (h_s < 0.0 || h_s_adaptive < 0.0) throw InvalidInput("noise std multipliers must be >= 0");
  if (kind == PerturbKind::randomize) {
    if (allow_unit_h ? h < 1.0 : h <= 1.0)
      throw InvalidInput("randomize requires h > 1, got " + std::to_string(h));
  }
}

std::size_t expanded_k(double h, std::size_t k) {
  return static_cast<std::size_t>(std::floor(h * static_cast<double>(k) + 1e-9));
}

std::vector<float> sample_noise(std::size_t dim, const NoiseParams& params, RngStream& rng) {
  const double a = params.mean + params.stddev * rng.normal();
  std::vector<double> g(dim);
  double norm2 = 0.0;
  for (auto& x : g) {
    x = rng.normal();
    norm2 += x * x;
  }
  std::vector<float> z(dim, 0.0f);
  const double magnitude = std::abs(a);
  if (norm2 == 0.0 || magnitude == 0.0) return z;
  const double scale = magnitude / std::sqrt(norm2);
  for (std::size_t d = 0; d < dim; ++d) z[d] = static_cast<float>(g[d] * scale);
  return z;
}

std::vector<float> noised_query(std::span<const float> query, const NoiseParams& params,
                                RngStream& rng) {
  std::vector<float> out(query.begin(), query.end());
  const auto z = sample_noise(query.size(), params, rng);
  for (std::size_t d = 0; d < out.size(); ++d) out[d] += z[d];
  return out;
}

namespace {

struct Moments {
  double mean = 0.0;
  double std = 0.0;
  double max = 0.0;
};

Moments moments(const NeighborSet& ns) {
  Moments m;
  for (const auto& n : ns) {
    m.mean += n.distance;
    m.max = std::max(m.max, n.distance);
  }
  m.mean /= static_cast<double>(ns.size());
  double var = 0.0;
  for (const auto& n : ns) var += (n.distance - m.mean) * (n.distance - m.mean);
  m.std = std::sqrt(var / static_cast<double>(ns.size()));
  return m;
}

}  // namespace

NoiseParams adaptive_params(const NeighborSet& pre_search, double h_m, double h_s) {
  if (pre_search.empty()) throw InvalidInput("adaptive noise needs a non-empty pre-search");
  const Moments m = moments(pre_search);
  return {h_m * m.max, h_s * m.std};
}

DistanceStats estimate_distance_stats(const Datastore& ds,
                                      std::span<const std::vector<float>> queries, std::size_t k) {
  if (queries.empty()) throw InvalidInput("distance statistics need at least one query");
  if (ds.empty()) throw InvalidInput("distance statistics need a non-empty datastore");
  double sum = 0.0;
  double sum_max = 0.0;
  double sum_std = 0.0;
  std::size_t count = 0;
  std::vector<double> samples;
  for (const auto& q : queries) {
    const NeighborSet ns = search_exact(ds, q, k);
    const Moments m = moments(ns);
    sum_max += m.max;
    sum_std += m.std;
    for (const auto& n : ns) {
      samples.push_back(n.distance);
      sum += n.distance;
      ++count;
    }
  }
  DistanceStats stats;
  stats.mean = sum / static_cast<double>(count);
  double var = 0.0;
  for (double d : samples) var += (d - stats.mean) * (d - stats.mean);
  stats.std = std::sqrt(var / static_cast<double>(count));
  stats.d_max = sum_max / static_cast<double>(queries.size());
  stats.d_std = sum_std / static_cast<double>(queries.size());
  return stats;
}

NeighborSet randomized_select(const NeighborSet& candidates, std::size_t k, RngStream& rng) {
  if (k == 0) throw InvalidInput("randomized_select: k must be >= 1");
  if (candidates.size() <= k) return candidates;
  // Partial Fisher-Yates over positions.
  std::vector<std::size_t> pos(candidates.size());
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(pos.size() - i));
    std::swap(pos[i], pos[j]);
  }
  NeighborSet out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(candidates[pos[i]]);
  std::sort(out.begin(), out.end(), neighbor_less);
  return out;
}

}  // namespace knnmt
