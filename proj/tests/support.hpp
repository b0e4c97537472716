#pragma once

// Fixtures and independent reference implementations shared by the tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "knnmt/corpus_gen.hpp"
#include "knnmt/datastore.hpp"
#include "knnmt/decode.hpp"
#include "knnmt/pipeline.hpp"
#include "knnmt/scoring.hpp"
#include "knnmt/table_model.hpp"

namespace knnmt::testing {

inline Datastore random_datastore(std::mt19937_64& gen, std::size_t n, std::size_t dim,
                                  std::size_t vocab, bool integer_grid = false) {
  std::uniform_real_distribution<float> real(-1.0f, 1.0f);
  std::uniform_int_distribution<int> grid(-3, 3);
  std::uniform_int_distribution<TokenId> tok(0, static_cast<TokenId>(vocab - 1));
  Datastore ds(dim, vocab);
  std::vector<float> key(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& x : key) x = integer_grid ? static_cast<float>(grid(gen)) : real(gen);
    ds.add(key, tok(gen));
  }
  return ds;
}

inline std::vector<float> random_vector(std::mt19937_64& gen, std::size_t dim, bool integer_grid = false) {
  std::uniform_real_distribution<float> real(-1.0f, 1.0f);
  std::uniform_int_distribution<int> grid(-3, 3);
  std::vector<float> v(dim);
  for (auto& x : v) x = integer_grid ? static_cast<float>(grid(gen)) : real(gen);
  return v;
}

/// O(n*k) selection: k passes, each picking the smallest unused
/// (distance, index) pair.
inline NeighborSet brute_force_knn(const Datastore& ds, const std::vector<float>& q, std::size_t k) {
  std::vector<double> dist(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    double s = 0.0;
    auto key = ds.key(i);
    for (std::size_t d = 0; d < q.size(); ++d) {
      const double diff = static_cast<double>(key[d]) - static_cast<double>(q[d]);
      s += diff * diff;
    }
    dist[i] = s;
  }
  std::vector<bool> used(ds.size(), false);
  NeighborSet out;
  for (std::size_t r = 0; r < std::min(k, ds.size()); ++r) {
    std::size_t best = ds.size();
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (used[i]) continue;
      if (best == ds.size() || dist[i] < dist[best]) best = i;
    }
    used[best] = true;
    out.push_back({dist[best], static_cast<std::uint32_t>(best), ds.value(best)});
  }
  return out;
}

/// softmax(-d / tau) aggregated per token, written directly from the
/// definition with a log-sum-exp shift.
inline std::vector<double> knn_oracle(const NeighborSet& ns, double tau, std::size_t vocab, bool use_max) {
  std::vector<double> out(vocab, 0.0);
  if (ns.empty()) return out;
  double lo = ns[0].distance;
  for (const auto& n : ns) lo = std::min(lo, n.distance);
  std::map<TokenId, double> agg;
  for (const auto& n : ns) {
    const double w = std::exp(-(n.distance - lo) / tau);
    if (use_max) {
      agg[n.token] = std::max(agg[n.token], w);
    } else {
      agg[n.token] += w;
    }
  }
  double z = 0.0;
  for (const auto& [t, w] : agg) z += w;
  for (const auto& [t, w] : agg) out[t] = w / z;
  return out;
}

inline double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

/// Small generated corpus with a trained model and its datastore.
struct ToySystem {
  GeneratedCorpus corpus;
  TableModel model;
  Datastore datastore;
  std::vector<std::vector<TokenId>> test_sources;
};

inline ToySystem toy_system(std::uint64_t seed, std::size_t n_train = 200, std::size_t n_test = 12) {
  CorpusSpec spec;
  spec.n_train = n_train;
  spec.n_valid = 10;
  spec.n_test = n_test;
  GeneratedCorpus corpus = generate_corpus(spec, seed);
  TableModelParams params;
  params.embed_seed = seed;
  TableModel model = TableModel::train(corpus.train, params);
  Datastore ds = build_model_datastore(model, corpus.train);
  std::vector<std::vector<TokenId>> sources;
  for (const auto& p : corpus.test) sources.push_back(model.encode_source(p.source));
  return {std::move(corpus), std::move(model), std::move(ds), std::move(sources)};
}

/// Next-token function over a vocabulary of `vocab` ids whose
/// distribution is a fixed pseudo-random function of the prefix. Ids 0
/// and 1 never receive mass; roughly a third of the rest are zero.
inline NextDistributionFn random_next_fn(std::uint64_t seed, std::size_t vocab) {
  return [seed, vocab](std::span<const TokenId> prefix, std::size_t, std::size_t) {
    std::uint64_t h = seed * 0x9E3779B97F4A7C15ULL + 1;
    for (TokenId t : prefix) h = (h ^ t) * 0x100000001B3ULL + 7;
    std::mt19937_64 gen(h);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(vocab, 0.0);
    double z = 0.0;
    for (std::size_t v = 2; v < vocab; ++v) {
      const double x = u(gen);
      p[v] = x < 0.33 && v != 2 ? 0.0 : x;
      z += p[v];
    }
    for (auto& x : p) x /= z;
    return TokenDistribution(std::move(p));
  };
}

/// Every sequence reachable under `next` within `max_len` generated tokens
/// (stopping at id 2, the end symbol), ranked best first.
inline std::vector<Hypothesis> enumerate_all(const NextDistributionFn& next, std::size_t max_len) {
  std::vector<Hypothesis> out;
  std::vector<Hypothesis> frontier{{{1}, 0.0, false}};
  for (std::size_t step = 0; step < max_len; ++step) {
    std::vector<Hypothesis> grown;
    for (const auto& h : frontier) {
      const auto dist = next(h.tokens, 0, step);
      for (std::size_t v = 0; v < dist.size(); ++v) {
        if (!(dist[v] > 0.0)) continue;
        Hypothesis c = h;
        c.tokens.push_back(static_cast<TokenId>(v));
        c.logprob += std::log(dist[v]);
        c.finished = v == 2 || step + 1 == max_len;
        (c.finished ? out : grown).push_back(std::move(c));
      }
    }
    frontier = std::move(grown);
  }
  std::sort(out.begin(), out.end(), [](const Hypothesis& a, const Hypothesis& b) {
    return a.logprob != b.logprob ? a.logprob > b.logprob : a.tokens < b.tokens;
  });
  return out;
}

/// Greedy argmax decoding (ties to the lower id).
inline Hypothesis greedy(const NextDistributionFn& next, std::size_t max_len) {
  Hypothesis h{{1}, 0.0, false};
  for (std::size_t step = 0; step < max_len && !h.finished; ++step) {
    const auto dist = next(h.tokens, 0, step);
    std::size_t best = 0;
    for (std::size_t v = 1; v < dist.size(); ++v)
      if (dist[v] > dist[best]) best = v;
    h.tokens.push_back(static_cast<TokenId>(best));
    h.logprob += std::log(dist[best]);
    h.finished = best == 2 || step + 1 == max_len;
  }
  return h;
}

}  // namespace knnmt::testing
