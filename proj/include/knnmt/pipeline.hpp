#pragma once

// Per-step composition: model -> (perturbed) retrieval -> kNN scoring ->
// interpolation with the model distribution.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "knnmt/datastore.hpp"
#include "knnmt/ivf.hpp"
#include "knnmt/perturb.hpp"
#include "knnmt/rng.hpp"
#include "knnmt/scoring.hpp"
#include "knnmt/table_model.hpp"

namespace knnmt {

struct SearchConfig {
  std::size_t k = 8;
  bool use_ivf = false;
  std::size_t n_probe = 8;
};

struct PipelineConfig {
  SearchConfig search;
  ScoreConfig score;
  PerturbConfig perturb;

  void validate() const;
};

/// What happened inside one next_distribution call.
struct StepTrace {
  std::vector<float> query;  // after noise, if any
  NoiseParams noise;
  NeighborSet retrieved;     // before random subsampling
  NeighborSet neighbors;     // the set that was scored
  bool fallback = false;     // kNN side empty, p_mt returned
};

/// One datastore entry per target token (including </s>) of every pair,
/// keyed by the model hidden state for that position.
Datastore build_model_datastore(const TableModel& model, const ParallelCorpus& corpus);

/// Hidden states along each reference target, teacher forced; the queries
/// used to estimate static noise statistics on held-out data.
std::vector<std::vector<float>> teacher_forced_queries(const TableModel& model,
                                                       const ParallelCorpus& corpus);

class Pipeline {
 public:
  /// `datastore` may be null (pure model). `index` is required when
  /// config.search.use_ivf is set. Referenced objects must outlive this.
  Pipeline(const TableModel& model, const Datastore* datastore, const IvfIndex* index,
           PipelineConfig config);

  /// Steps: hidden state; adaptive pre-search; add noise; search k (or
  /// floor(h*k) when randomizing); subsample; score (sum or max); mix.
  TokenDistribution next_distribution(std::span<const TokenId> source,
                                      std::span<const TokenId> prefix, RngStream rng,
                                      StepTrace* trace = nullptr) const;

  /// Stream for one (sentence, beam slot, time step) triple.
  RngStream step_stream(std::uint64_t sentence, std::uint64_t slot, std::uint64_t step) const;

  const TableModel& model() const noexcept { return model_; }
  const PipelineConfig& config() const noexcept { return config_; }
  std::size_t vocab_size() const noexcept { return model_.target_vocab().size(); }

 private:
  NeighborSet search(std::span<const float> query, std::size_t k) const;

  const TableModel& model_;
  const Datastore* datastore_;
  const IvfIndex* index_;
  PipelineConfig config_;
};

}  // namespace knnmt
