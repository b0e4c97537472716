#pragma once

// Quality and diversity measures over N-best candidate lists.
//
// BLEU follows the sacrebleu conventions on pre-tokenized input: corpus
// BLEU pools clipped n-gram counts with no smoothing; sentence BLEU uses
// add-k smoothing on orders 2..max_n and is 0 when no unigram matches.
// All scores are in [0, 1]; scaling by 100 happens in the report layer.

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "knnmt/error.hpp"

namespace knnmt::metrics {

using Sentence = std::vector<TokenId>;
/// lists[source][rank]
using NBestLists = std::vector<std::vector<Sentence>>;

struct NgramKey {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;
  friend auto operator<=>(const NgramKey&, const NgramKey&) = default;
};

/// Sorted n-gram counts of one sentence for orders 1..max_n.
class NgramProfile {
 public:
  explicit NgramProfile(std::span<const TokenId> sentence, int max_n = 4);

  int max_n() const noexcept { return static_cast<int>(orders_.size()); }
  std::size_t length() const noexcept { return length_; }
  const std::vector<std::pair<NgramKey, std::uint32_t>>& order(int n) const { return orders_[n - 1]; }

 private:
  std::size_t length_ = 0;
  std::vector<std::vector<std::pair<NgramKey, std::uint32_t>>> orders_;
};

struct BleuStats {
  std::vector<double> matches;  // clipped, per order
  std::vector<double> totals;   // hypothesis n-grams, per order
  double hyp_len = 0.0;
  double ref_len = 0.0;

  explicit BleuStats(int max_n = 4) : matches(max_n, 0.0), totals(max_n, 0.0) {}
  BleuStats& operator+=(const BleuStats& o);
};

BleuStats bleu_stats(const NgramProfile& hyp, const NgramProfile& ref);
double brevity_penalty(double hyp_len, double ref_len);
/// Unsmoothed BLEU from pooled statistics.
double corpus_bleu_from_stats(const BleuStats& stats);
double sentence_bleu_from_stats(BleuStats stats, double add_k);

double sentence_bleu(std::span<const TokenId> hyp, std::span<const TokenId> ref, int max_n = 4,
                     double add_k = 1.0);
double corpus_bleu(std::span<const Sentence> hyps, std::span<const Sentence> refs, int max_n = 4);

/// Per source, the rank (< n_select) with the highest sentence BLEU, ties
/// to the lowest rank.
std::vector<std::size_t> oracle_picks(const NBestLists& lists, std::span<const Sentence> refs,
                                      std::size_t n_select);
/// Per source, the median-BLEU rank; for even counts the better of the
/// two middle candidates.
std::vector<std::size_t> median_picks(const NBestLists& lists, std::span<const Sentence> refs,
                                      std::size_t n_select);

double bleu_at_n(const NBestLists& lists, std::span<const Sentence> refs, std::size_t n_select);
double med_bleu_at_n(const NBestLists& lists, std::span<const Sentence> refs, std::size_t n_select);
/// BLEU@(N_a + N_b) over per-source concatenations a ++ b.
double merged_bleu(const NBestLists& a, const NBestLists& b, std::span<const Sentence> refs);
/// Mean over ranks of the corpus BLEU of that rank's hypotheses.
double ref_bleu(const NBestLists& lists, std::span<const Sentence> refs);
/// Mean over ordered rank pairs (r != r') of 1 - corpus BLEU of slice r
/// against slice r'. Requires N >= 2 and rectangular lists.
double dp(const NBestLists& lists);
/// -(dp_base - dp_sys) / (refbleu_base - refbleu_sys); nullopt if the
/// RefBLEU values are equal.
std::optional<double> deq(double dp_sys, double dp_base, double refbleu_sys, double refbleu_base);
/// Distinct n-grams over total n-grams, pooled over every candidate.
double distinct_ngram_ratio(const NBestLists& lists, int n);
/// Mean |a_i - b_i|. Non-finite pairs are not allowed here; filter them first.
double madll(std::span<const double> loglik_a, std::span<const double> loglik_b);

class FluencyScorer {
 public:
  virtual ~FluencyScorer() = default;
  /// PLL-like score for a sentence; must be deterministic.
  virtual double score(std::span<const TokenId> sentence) const = 0;
};

/// Scores every sentence as -length. Normalized score is always -1.
class LengthMockScorer final : public FluencyScorer {
 public:
  double score(std::span<const TokenId> sentence) const override {
    return -static_cast<double>(sentence.size());
  }
};

enum class SpllStat { max, min, mean };

struct SpllResult {
  double value = 0.0;
  std::size_t skipped_empty = 0;  // empty candidates left out
};

/// Mean over sources of stat over candidates of score / |candidate|.
SpllResult spll(const NBestLists& lists, const FluencyScorer& scorer, SpllStat stat);
/// Same aggregation with precomputed scores[source][rank].
SpllResult spll_from_scores(const NBestLists& lists, const std::vector<std::vector<double>>& scores,
                            SpllStat stat);

}  // namespace knnmt::metrics
