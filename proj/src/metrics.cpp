#include "knnmt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

namespace knnmt::metrics {

namespace {

NgramKey make_key(std::span<const TokenId> gram) {
  std::uint64_t parts[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < gram.size(); ++i) parts[i] = std::uint64_t{gram[i]} + 1;
  return {(parts[0] << 32) | parts[1], (parts[2] << 32) | parts[3]};
}

void check_max_n(int max_n) {
  if (max_n < 1 || max_n > 4) throw InvalidInput("n-gram order must be in [1, 4]");
}

void check_aligned(const NBestLists& lists, std::span<const Sentence> refs) {
  if (lists.size() != refs.size())
    throw InvalidInput("candidate lists (" + std::to_string(lists.size()) + ") and references (" +
                       std::to_string(refs.size()) + ") are not aligned");
  if (lists.empty()) throw InvalidInput("no sources to evaluate");
}

std::size_t rectangular_width(const NBestLists& lists) {
  if (lists.empty()) throw InvalidInput("no sources to evaluate");
  const std::size_t n = lists.front().size();
  for (std::size_t i = 0; i < lists.size(); ++i)
    if (lists[i].size() != n)
      throw InvalidInput("ragged candidate lists: source " + std::to_string(i) + " has " +
                         std::to_string(lists[i].size()) + " candidates, expected " + std::to_string(n));
  return n;
}

std::vector<double> sentence_scores(const std::vector<Sentence>& cands, const Sentence& ref,
                                    std::size_t n_select) {
  const NgramProfile ref_profile(ref);
  std::vector<double> out(n_select);
  for (std::size_t r = 0; r < n_select; ++r)
    out[r] = sentence_bleu_from_stats(bleu_stats(NgramProfile(cands[r]), ref_profile), 1.0);
  return out;
}

void check_selectable(const NBestLists& lists, std::size_t n_select) {
  if (n_select == 0) throw InvalidInput("n_select must be >= 1");
  for (std::size_t i = 0; i < lists.size(); ++i)
    if (lists[i].size() < n_select)
      throw InvalidInput("source " + std::to_string(i) + " has " + std::to_string(lists[i].size()) +
                         " candidates, fewer than " + std::to_string(n_select));
}

double corpus_bleu_of_picks(const NBestLists& lists, std::span<const Sentence> refs,
                            const std::vector<std::size_t>& picks) {
  std::vector<Sentence> hyps;
  hyps.reserve(lists.size());
  for (std::size_t i = 0; i < lists.size(); ++i) hyps.push_back(lists[i][picks[i]]);
  return corpus_bleu(hyps, refs);
}

}  // namespace

NgramProfile::NgramProfile(std::span<const TokenId> sentence, int max_n) : length_(sentence.size()) {
  check_max_n(max_n);
  orders_.resize(max_n);
  for (int n = 1; n <= max_n; ++n) {
    auto& grams = orders_[n - 1];
    if (sentence.size() < static_cast<std::size_t>(n)) continue;
    std::vector<NgramKey> keys;
    keys.reserve(sentence.size() - n + 1);
    for (std::size_t i = 0; i + n <= sentence.size(); ++i) keys.push_back(make_key(sentence.subspan(i, n)));
    std::sort(keys.begin(), keys.end());
    for (const auto& k : keys) {
      if (!grams.empty() && grams.back().first == k)
        ++grams.back().second;
      else
        grams.emplace_back(k, 1);
    }
  }
}

BleuStats& BleuStats::operator+=(const BleuStats& o) {
  for (std::size_t n = 0; n < matches.size(); ++n) {
    matches[n] += o.matches[n];
    totals[n] += o.totals[n];
  }
  hyp_len += o.hyp_len;
  ref_len += o.ref_len;
  return *this;
}

BleuStats bleu_stats(const NgramProfile& hyp, const NgramProfile& ref) {
  const int max_n = std::min(hyp.max_n(), ref.max_n());
  BleuStats s(max_n);
  s.hyp_len = static_cast<double>(hyp.length());
  s.ref_len = static_cast<double>(ref.length());
  for (int n = 1; n <= max_n; ++n) {
    const auto& h = hyp.order(n);
    const auto& r = ref.order(n);
    double total = 0.0;
    double match = 0.0;
    std::size_t j = 0;
    for (const auto& [key, count] : h) {
      total += count;
      while (j < r.size() && r[j].first < key) ++j;
      if (j < r.size() && r[j].first == key) match += std::min(count, r[j].second);
    }
    s.totals[n - 1] = total;
    s.matches[n - 1] = match;
  }
  return s;
}

double brevity_penalty(double hyp_len, double ref_len) {
  if (hyp_len >= ref_len) return 1.0;
  if (hyp_len <= 0.0) return 0.0;
  return std::exp(1.0 - ref_len / hyp_len);
}

double corpus_bleu_from_stats(const BleuStats& s) {
  double log_sum = 0.0;
  for (std::size_t n = 0; n < s.matches.size(); ++n) {
    if (s.totals[n] <= 0.0 || s.matches[n] <= 0.0) return 0.0;
    log_sum += std::log(s.matches[n] / s.totals[n]);
  }
  return brevity_penalty(s.hyp_len, s.ref_len) *
         std::exp(log_sum / static_cast<double>(s.matches.size()));
}

double sentence_bleu_from_stats(BleuStats s, double add_k) {
  if (s.hyp_len <= 0.0) return 0.0;
  if (s.matches[0] <= 0.0) return 0.0;
  for (std::size_t n = 1; n < s.matches.size(); ++n) {
    s.matches[n] += add_k;
    s.totals[n] += add_k;
  }
  return corpus_bleu_from_stats(s);
}

double sentence_bleu(std::span<const TokenId> hyp, std::span<const TokenId> ref, int max_n,
                     double add_k) {
  return sentence_bleu_from_stats(bleu_stats(NgramProfile(hyp, max_n), NgramProfile(ref, max_n)),
                                  add_k);
}

double corpus_bleu(std::span<const Sentence> hyps, std::span<const Sentence> refs, int max_n) {
  if (hyps.size() != refs.size())
    throw InvalidInput("corpus_bleu: " + std::to_string(hyps.size()) + " hypotheses vs " +
                       std::to_string(refs.size()) + " references");
  if (hyps.empty()) throw InvalidInput("corpus_bleu: empty corpus");
  BleuStats total(max_n);
  for (std::size_t i = 0; i < hyps.size(); ++i)
    total += bleu_stats(NgramProfile(hyps[i], max_n), NgramProfile(refs[i], max_n));
  return corpus_bleu_from_stats(total);
}

std::vector<std::size_t> oracle_picks(const NBestLists& lists, std::span<const Sentence> refs,
                                      std::size_t n_select) {
  check_aligned(lists, refs);
  check_selectable(lists, n_select);
  std::vector<std::size_t> picks(lists.size());
  for (std::size_t i = 0; i < lists.size(); ++i) {
    const auto scores = sentence_scores(lists[i], refs[i], n_select);
    picks[i] = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
  }
  return picks;
}

std::vector<std::size_t> median_picks(const NBestLists& lists, std::span<const Sentence> refs,
                                      std::size_t n_select) {
  check_aligned(lists, refs);
  check_selectable(lists, n_select);
  std::vector<std::size_t> picks(lists.size());
  for (std::size_t i = 0; i < lists.size(); ++i) {
    const auto scores = sentence_scores(lists[i], refs[i], n_select);
    std::vector<std::size_t> order(n_select);
    for (std::size_t r = 0; r < n_select; ++r) order[r] = r;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    if (n_select % 2 == 1) {
      picks[i] = order[n_select / 2];
    } else {
      const std::size_t lo = order[n_select / 2 - 1];
      const std::size_t hi = order[n_select / 2];
      picks[i] = scores[hi] > scores[lo] ? hi : std::min(lo, hi);
    }
  }
  return picks;
}

double bleu_at_n(const NBestLists& lists, std::span<const Sentence> refs, std::size_t n_select) {
  return corpus_bleu_of_picks(lists, refs, oracle_picks(lists, refs, n_select));
}

double med_bleu_at_n(const NBestLists& lists, std::span<const Sentence> refs, std::size_t n_select) {
  return corpus_bleu_of_picks(lists, refs, median_picks(lists, refs, n_select));
}

double merged_bleu(const NBestLists& a, const NBestLists& b, std::span<const Sentence> refs) {
  if (a.size() != b.size())
    throw InvalidInput("merged BLEU: systems cover " + std::to_string(a.size()) + " and " +
                       std::to_string(b.size()) + " sources");
  check_aligned(a, refs);
  NBestLists merged(a.size());
  std::size_t width = std::numeric_limits<std::size_t>::max();
  for (std::size_t i = 0; i < a.size(); ++i) {
    merged[i] = a[i];
    merged[i].insert(merged[i].end(), b[i].begin(), b[i].end());
    width = std::min(width, merged[i].size());
  }
  return bleu_at_n(merged, refs, width);
}

double ref_bleu(const NBestLists& lists, std::span<const Sentence> refs) {
  check_aligned(lists, refs);
  const std::size_t n = rectangular_width(lists);
  if (n == 0) throw InvalidInput("RefBLEU needs at least one candidate per source");
  double sum = 0.0;
  std::vector<Sentence> slice(lists.size());
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < lists.size(); ++i) slice[i] = lists[i][r];
    sum += corpus_bleu(slice, refs);
  }
  return sum / static_cast<double>(n);
}

double dp(const NBestLists& lists) {
  const std::size_t n = rectangular_width(lists);
  if (n < 2) throw InvalidInput("DP needs at least two candidates per source");
  // profiles[i][r]
  std::vector<std::vector<NgramProfile>> profiles(lists.size());
  for (std::size_t i = 0; i < lists.size(); ++i) {
    profiles[i].reserve(n);
    for (const auto& s : lists[i]) profiles[i].emplace_back(s);
  }
  double sum = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t q = 0; q < n; ++q) {
      if (r == q) continue;
      BleuStats total;
      for (std::size_t i = 0; i < lists.size(); ++i) total += bleu_stats(profiles[i][r], profiles[i][q]);
      sum += 1.0 - corpus_bleu_from_stats(total);
    }
  }
  return sum / static_cast<double>(n * (n - 1));
}

std::optional<double> deq(double dp_sys, double dp_base, double refbleu_sys, double refbleu_base) {
  const double denom = refbleu_base - refbleu_sys;
  if (denom == 0.0) return std::nullopt;
  return -(dp_base - dp_sys) / denom;
}

double distinct_ngram_ratio(const NBestLists& lists, int n) {
  check_max_n(n);
  std::set<NgramKey> distinct;
  std::size_t total = 0;
  for (const auto& cands : lists) {
    for (const auto& s : cands) {
      for (std::size_t i = 0; i + n <= s.size(); ++i) {
        distinct.insert(make_key(std::span<const TokenId>(s).subspan(i, n)));
        ++total;
      }
    }
  }
  if (total == 0)
    throw InvalidInput("distinct " + std::to_string(n) + "-gram ratio: every candidate is shorter than n");
  return static_cast<double>(distinct.size()) / static_cast<double>(total);
}

double madll(std::span<const double> loglik_a, std::span<const double> loglik_b) {
  if (loglik_a.size() != loglik_b.size())
    throw InvalidInput("MADLL: " + std::to_string(loglik_a.size()) + " vs " +
                       std::to_string(loglik_b.size()) + " log-likelihoods");
  if (loglik_a.empty()) throw InvalidInput("MADLL: no sentences");
  double sum = 0.0;
  for (std::size_t i = 0; i < loglik_a.size(); ++i) {
    if (!std::isfinite(loglik_a[i]) || !std::isfinite(loglik_b[i]))
      throw InvalidInput("MADLL: non-finite log-likelihood at sentence " + std::to_string(i));
    sum += std::abs(loglik_a[i] - loglik_b[i]);
  }
  return sum / static_cast<double>(loglik_a.size());
}

SpllResult spll_from_scores(const NBestLists& lists, const std::vector<std::vector<double>>& scores,
                            SpllStat stat) {
  if (scores.size() != lists.size()) throw InvalidInput("SPLL: scores not aligned with sources");
  SpllResult out;
  double sum = 0.0;
  std::size_t sources = 0;
  for (std::size_t i = 0; i < lists.size(); ++i) {
    if (scores[i].size() != lists[i].size())
      throw InvalidInput("SPLL: source " + std::to_string(i) + " has a score count mismatch");
    std::vector<double> normalized;
    for (std::size_t r = 0; r < lists[i].size(); ++r) {
      if (lists[i][r].empty()) {
        ++out.skipped_empty;
        continue;
      }
      normalized.push_back(scores[i][r] / static_cast<double>(lists[i][r].size()));
    }
    if (normalized.empty()) continue;
    double v = 0.0;
    switch (stat) {
      case SpllStat::max: v = *std::max_element(normalized.begin(), normalized.end()); break;
      case SpllStat::min: v = *std::min_element(normalized.begin(), normalized.end()); break;
      case SpllStat::mean:
        for (double x : normalized) v += x;
        v /= static_cast<double>(normalized.size());
        break;
    }
    sum += v;
    ++sources;
  }
  if (sources == 0) throw InvalidInput("SPLL: no non-empty candidates");
  out.value = sum / static_cast<double>(sources);
  return out;
}

SpllResult spll(const NBestLists& lists, const FluencyScorer& scorer, SpllStat stat) {
  std::vector<std::vector<double>> scores(lists.size());
  for (std::size_t i = 0; i < lists.size(); ++i)
    for (const auto& s : lists[i]) scores[i].push_back(scorer.score(s));
  return spll_from_scores(lists, scores, stat);
}

}  // namespace knnmt::metrics
