#include "knnmt/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "knnmt/parallel.hpp"
#include "knnmt/vocab.hpp"

namespace knnmt {

namespace {
constexpr std::uint64_t kSampleDomain = 0x73616D706C653031ULL;
}

std::string to_string(DecoderKind kind) {
  switch (kind) {
    case DecoderKind::beam: return "beam";
    case DecoderKind::dbs: return "dbs";
    case DecoderKind::nucleus: return "nucleus";
  }
  return "beam";
}

DecoderKind parse_decoder_kind(const std::string& name) {
  if (name == "beam") return DecoderKind::beam;
  if (name == "dbs") return DecoderKind::dbs;
  if (name == "nucleus") return DecoderKind::nucleus;
  throw InvalidInput("unknown decoder '" + name + "'");
}

void DecodeConfig::validate() const {
  if (beam_size == 0) throw InvalidInput("beam_size must be >= 1");
  if (max_len == 0) throw InvalidInput("max_len must be >= 1");
  if (decoder == DecoderKind::dbs) {
    if (groups == 0 || groups > beam_size) throw InvalidInput("dbs groups must be in [1, beam_size]");
    if (!(diversity_strength >= 0.0) || !std::isfinite(diversity_strength))
      throw InvalidInput("diversity_strength must be finite and >= 0");
  }
  if (decoder == DecoderKind::nucleus && !(nucleus_p > 0.0 && nucleus_p <= 1.0))
    throw InvalidInput("nucleus_p must lie in (0, 1]");
}

bool hypothesis_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.logprob != b.logprob) return a.logprob > b.logprob;
  return a.tokens < b.tokens;
}

namespace {

struct Group {
  std::size_t size = 0;
  std::size_t slot_offset = 0;
  std::vector<Hypothesis> live;
  std::vector<Hypothesis> finished;
};

struct Expansion {
  double score;
  TokenId token;
  std::size_t parent;
  double token_logprob;
};

bool expansion_before(const Expansion& a, const Expansion& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.token != b.token) return a.token < b.token;
  return a.parent < b.parent;
}

// Advances one group by one step. `penalty` holds per-token selection
// counts of earlier groups (empty for plain beam search). Tokens chosen
// here are appended to `chosen`.
void advance(Group& g, const NextDistributionFn& next, std::size_t step, std::size_t max_len,
             double strength, std::span<const double> penalty, std::vector<TokenId>& chosen) {
  const std::size_t slots = g.size - g.finished.size();
  std::vector<Expansion> cands;
  for (std::size_t i = 0; i < g.live.size(); ++i) {
    const TokenDistribution dist = next(g.live[i].tokens, g.slot_offset + i, step);
    for (std::size_t v = 0; v < dist.size(); ++v) {
      const double p = dist[v];
      if (!(p > 0.0)) continue;
      const double lp = std::log(p);
      double score = g.live[i].logprob + lp;
      if (!penalty.empty() && v < penalty.size()) score -= strength * penalty[v];
      cands.push_back({score, static_cast<TokenId>(v), i, lp});
    }
  }
  const std::size_t take = std::min(slots, cands.size());
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(take), cands.end(),
                    expansion_before);
  std::vector<Hypothesis> live;
  for (std::size_t j = 0; j < take; ++j) {
    const Expansion& e = cands[j];
    Hypothesis h;
    h.tokens = g.live[e.parent].tokens;
    h.tokens.push_back(e.token);
    h.logprob = g.live[e.parent].logprob + e.token_logprob;
    h.finished = e.token == Vocab::kEos || step + 1 >= max_len;
    chosen.push_back(e.token);
    (h.finished ? g.finished : live).push_back(std::move(h));
  }
  g.live = std::move(live);
}

std::vector<Group> make_groups(std::size_t beam_size, std::size_t groups) {
  std::vector<Group> out(groups);
  std::size_t offset = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    out[g].size = beam_size / groups + (g < beam_size % groups ? 1 : 0);
    out[g].slot_offset = offset;
    offset += out[g].size;
    out[g].live.push_back({{Vocab::kBos}, 0.0, false});
  }
  return out;
}

std::vector<Hypothesis> run_groups(const NextDistributionFn& next, std::vector<Group> groups,
                                   double strength, std::size_t max_len, bool diverse) {
  std::vector<double> counts;
  std::vector<TokenId> chosen;
  for (std::size_t step = 0; step < max_len; ++step) {
    bool any = false;
    std::fill(counts.begin(), counts.end(), 0.0);
    for (auto& g : groups) {
      if (g.live.empty()) continue;
      any = true;
      chosen.clear();
      advance(g, next, step, max_len, strength, diverse ? std::span<const double>(counts) : std::span<const double>{},
              chosen);
      if (diverse) {
        for (TokenId t : chosen) {
          if (t >= counts.size()) counts.resize(t + 1, 0.0);
          counts[t] += 1.0;
        }
      }
    }
    if (!any) break;
  }
  std::vector<Hypothesis> out;
  for (auto& g : groups) {
    std::sort(g.finished.begin(), g.finished.end(), hypothesis_before);
    out.insert(out.end(), g.finished.begin(), g.finished.end());
  }
  return out;
}

}  // namespace

std::vector<Hypothesis> beam_search(const NextDistributionFn& next, std::size_t beam_size,
                                    std::size_t max_len) {
  if (beam_size == 0) throw InvalidInput("beam_size must be >= 1");
  return run_groups(next, make_groups(beam_size, 1), 0.0, max_len, false);
}

std::vector<Hypothesis> diverse_beam_search(const NextDistributionFn& next, std::size_t beam_size,
                                            std::size_t groups, double strength,
                                            std::size_t max_len) {
  if (groups == 0 || groups > beam_size) throw InvalidInput("dbs groups must be in [1, beam_size]");
  return run_groups(next, make_groups(beam_size, groups), strength, max_len, true);
}

std::vector<TokenId> nucleus_tokens(const TokenDistribution& dist, double p) {
  std::vector<TokenId> order;
  for (std::size_t v = 0; v < dist.size(); ++v)
    if (dist[v] > 0.0) order.push_back(static_cast<TokenId>(v));
  std::sort(order.begin(), order.end(), [&](TokenId a, TokenId b) {
    if (dist[a] != dist[b]) return dist[a] > dist[b];
    return a < b;
  });
  double mass = 0.0;
  std::size_t n = 0;
  while (n < order.size()) {
    mass += dist[order[n]];
    ++n;
    if (mass >= p - 1e-12) break;
  }
  order.resize(n);
  return order;
}

std::vector<Hypothesis> nucleus_sample(const NextDistributionFn& next, std::size_t n, double p,
                                       std::size_t max_len, const RngStream& sampler) {
  if (n == 0) throw InvalidInput("number of samples must be >= 1");
  if (!(p > 0.0 && p <= 1.0)) throw InvalidInput("nucleus_p must lie in (0, 1]");
  std::vector<Hypothesis> out;
  out.reserve(n);
  for (std::size_t traj = 0; traj < n; ++traj) {
    Hypothesis h{{Vocab::kBos}, 0.0, false};
    for (std::size_t step = 0; step < max_len; ++step) {
      const TokenDistribution dist = next(h.tokens, traj, step);
      const auto nucleus = nucleus_tokens(dist, p);
      if (nucleus.empty()) break;
      double mass = 0.0;
      for (TokenId t : nucleus) mass += dist[t];
      RngStream rng = sampler.child({traj, step});
      double u = rng.uniform() * mass;
      TokenId pick = nucleus.back();
      for (TokenId t : nucleus) {
        if (u < dist[t]) {
          pick = t;
          break;
        }
        u -= dist[t];
      }
      h.tokens.push_back(pick);
      h.logprob += std::log(dist[pick]);
      if (pick == Vocab::kEos) break;
    }
    h.finished = true;
    out.push_back(std::move(h));
  }
  std::stable_sort(out.begin(), out.end(), hypothesis_before);
  return out;
}

ForcedResult forced_decode(const NextDistributionFn& next, std::span<const TokenId> target) {
  if (target.empty() || target.front() != Vocab::kBos)
    throw InvalidInput("forced decoding target must begin with <s>");
  ForcedResult r;
  for (std::size_t t = 1; t < target.size(); ++t) {
    const TokenDistribution dist = next(target.first(t), 0, t - 1);
    const double p = target[t] < dist.size() ? dist[target[t]] : 0.0;
    if (!(p > 0.0)) {
      r.zero_probability = true;
      r.logprob = -std::numeric_limits<double>::infinity();
      return r;
    }
    r.logprob += std::log(p);
  }
  return r;
}

NextDistributionFn bind_pipeline(const Pipeline& pipeline, std::span<const TokenId> source,
                                 std::uint64_t sentence_index) {
  return [&pipeline, source, sentence_index](std::span<const TokenId> prefix, std::size_t slot,
                                             std::size_t step) {
    return pipeline.next_distribution(source, prefix,
                                      pipeline.step_stream(sentence_index, slot, step));
  };
}

CandidateList decode_sentence(const Pipeline& pipeline, const DecodeConfig& config,
                              std::span<const TokenId> source, std::uint64_t sentence_index) {
  config.validate();
  const NextDistributionFn next = bind_pipeline(pipeline, source, sentence_index);
  CandidateList out;
  out.source.assign(source.begin(), source.end());
  switch (config.decoder) {
    case DecoderKind::beam:
      out.hypotheses = beam_search(next, config.beam_size, config.max_len);
      break;
    case DecoderKind::dbs:
      out.hypotheses = diverse_beam_search(next, config.beam_size, config.groups,
                                           config.diversity_strength, config.max_len);
      break;
    case DecoderKind::nucleus:
      out.hypotheses = nucleus_sample(next, config.beam_size, config.nucleus_p, config.max_len,
                                      RngStream(config.seed).child({kSampleDomain, sentence_index}));
      break;
  }
  if (out.hypotheses.empty()) throw InvariantViolation("decoder produced no hypotheses");
  while (out.hypotheses.size() < config.beam_size) {
    out.hypotheses.push_back(out.hypotheses.back());
    ++out.padded;
  }
  return out;
}

ForcedResult forced_decode(const Pipeline& pipeline, std::span<const TokenId> source,
                           std::span<const TokenId> target, std::uint64_t sentence_index) {
  return forced_decode(bind_pipeline(pipeline, source, sentence_index), target);
}

std::vector<CandidateList> decode_corpus(const Pipeline& pipeline, const DecodeConfig& config,
                                         const std::vector<std::vector<TokenId>>& sources,
                                         std::size_t threads) {
  std::vector<CandidateList> out(sources.size());
  parallel_for(sources.size(), threads,
               [&](std::size_t i) { out[i] = decode_sentence(pipeline, config, sources[i], i); });
  return out;
}

}  // namespace knnmt
