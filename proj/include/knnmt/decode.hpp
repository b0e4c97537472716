#pragma once

// Candidate generation: beam search, diverse beam search, nucleus
// sampling, and forced decoding. The decoders only see a callback that
// returns the next-token distribution for a prefix; `slot` identifies the
// beam or trajectory and `step` the time step, which is what keys the
// per-step random streams of the pipeline.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "knnmt/pipeline.hpp"
#include "knnmt/rng.hpp"
#include "knnmt/scoring.hpp"

namespace knnmt {

enum class DecoderKind { beam, dbs, nucleus };

std::string to_string(DecoderKind kind);
DecoderKind parse_decoder_kind(const std::string& name);

struct DecodeConfig {
  DecoderKind decoder = DecoderKind::dbs;
  std::size_t beam_size = 20;
  std::size_t groups = 20;
  double diversity_strength = 0.5;
  double nucleus_p = 0.9;
  std::size_t max_len = 32;  // generated tokens, </s> included
  std::uint64_t seed = 0;    // nucleus sampling streams

  void validate() const;
};

struct Hypothesis {
  std::vector<TokenId> tokens;  // <s> ... (</s> unless cut at max_len)
  double logprob = 0.0;
  bool finished = false;

  friend bool operator==(const Hypothesis&, const Hypothesis&) = default;
};

struct CandidateList {
  std::vector<TokenId> source;
  std::vector<Hypothesis> hypotheses;
  std::size_t padded = 0;  // trailing entries duplicated to reach beam_size

  friend bool operator==(const CandidateList&, const CandidateList&) = default;
};

using NextDistributionFn = std::function<TokenDistribution(std::span<const TokenId> prefix,
                                                           std::size_t slot, std::size_t step)>;

/// Best-first order used for final lists: logprob descending, then
/// token sequence ascending.
bool hypothesis_before(const Hypothesis& a, const Hypothesis& b);

/// Standard beam search, no length normalization. Finished hypotheses
/// are held aside and stop occupying beam slots. May return fewer than
/// `beam_size` hypotheses if the search space is exhausted.
std::vector<Hypothesis> beam_search(const NextDistributionFn& next, std::size_t beam_size,
                                    std::size_t max_len);

/// Groups of size floor(N/G) (the first N mod G get one more) advance in
/// order at every step; a group scores token v as
/// log p(v) - strength * (times v was chosen at this step by earlier groups).
/// Stored logprobs are the unpenalized sums. Output is the concatenation
/// of the groups, each sorted best-first.
std::vector<Hypothesis> diverse_beam_search(const NextDistributionFn& next, std::size_t beam_size,
                                            std::size_t groups, double strength,
                                            std::size_t max_len);

/// `n` independent trajectories; each step samples from the smallest
/// probability-sorted prefix whose mass reaches `p`. Sampling uses
/// sampler.child({trajectory, step}). Returned best-first; duplicates kept.
std::vector<Hypothesis> nucleus_sample(const NextDistributionFn& next, std::size_t n, double p,
                                       std::size_t max_len, const RngStream& sampler);

/// Index set of the nucleus of `dist`, in sampling order.
std::vector<TokenId> nucleus_tokens(const TokenDistribution& dist, double p);

struct ForcedResult {
  double logprob = 0.0;          // -inf when some target token had probability 0
  bool zero_probability = false;
};

/// Sum of log p(target[t] | target[<t]) for t >= 1. target[0] must be <s>.
ForcedResult forced_decode(const NextDistributionFn& next, std::span<const TokenId> target);

/// Binds a pipeline and source sentence to the decoder callback.
NextDistributionFn bind_pipeline(const Pipeline& pipeline, std::span<const TokenId> source,
                                 std::uint64_t sentence_index);

/// Runs the configured decoder and pads to exactly beam_size hypotheses.
CandidateList decode_sentence(const Pipeline& pipeline, const DecodeConfig& config,
                              std::span<const TokenId> source, std::uint64_t sentence_index);

ForcedResult forced_decode(const Pipeline& pipeline, std::span<const TokenId> source,
                           std::span<const TokenId> target, std::uint64_t sentence_index);

/// Decodes every source; the result does not depend on `threads`.
std::vector<CandidateList> decode_corpus(const Pipeline& pipeline, const DecodeConfig& config,
                                         const std::vector<std::vector<TokenId>>& sources,
                                         std::size_t threads = 1);

}  // namespace knnmt
