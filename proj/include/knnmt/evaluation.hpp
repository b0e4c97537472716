#pragma once

// Text-level artifacts exchanged between `decode` and `eval`, and the
// metric report built from them.
//
// Every JSON-lines file starts with one {"header": {...}} record carrying
// the producing version and resolved configuration; readers skip it.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "knnmt/corpus.hpp"
#include "knnmt/metrics.hpp"

namespace knnmt {

using Json = nlohmann::json;
using Words = std::vector<std::string>;

struct CandidateRecord {
  std::uint64_t id = 0;
  Words source;
  std::vector<Words> hyps;       // rank order
  std::vector<double> logprobs;  // parallel to hyps

  friend bool operator==(const CandidateRecord&, const CandidateRecord&) = default;
};

struct CandidateFile {
  Json header = Json::object();
  std::vector<CandidateRecord> records;
};

void write_candidates(const CandidateFile& file, const std::string& path);
CandidateFile read_candidates(const std::string& path);

/// Forced-decoding log-likelihoods of the two references; nullopt marks a
/// reference that received probability zero.
struct LoglikRecord {
  std::uint64_t id = 0;
  std::optional<double> ref_a;
  std::optional<double> ref_b;
};

struct LoglikFile {
  Json header = Json::object();
  std::vector<LoglikRecord> records;
};

void write_loglik(const LoglikFile& file, const std::string& path);
LoglikFile read_loglik(const std::string& path);

/// {"id", "rank", "score"} lines into scores[id][rank]; every (id, rank)
/// of `shape` must be covered exactly once.
std::vector<std::vector<double>> read_scores(const std::string& path,
                                             const std::vector<CandidateRecord>& shape);

/// Maps words to dense ids for the metric functions.
class WordInterner {
 public:
  TokenId intern(const std::string& word);
  metrics::Sentence encode(const Words& words);

 private:
  std::unordered_map<std::string, TokenId> ids_;
};

/// Throws FormatError naming the offending ids unless the records have ids
/// 0..n-1 in order with `n_best` hypotheses each.
void check_alignment(const std::vector<CandidateRecord>& records, std::size_t n_refs,
                     const std::string& what);

/// Headline numbers, all in [0, 1].
struct CoreMetrics {
  double dp = 0.0;
  double bleu_1 = 0.0;
  double bleu_n = 0.0;
  double med_bleu_n = 0.0;
  double ref_bleu = 0.0;
  std::size_t n_best = 0;
};

CoreMetrics core_metrics(const std::vector<CandidateRecord>& records, const std::vector<Words>& refs);

struct EvalInputs {
  const CandidateFile* candidates = nullptr;    // required
  const CandidateFile* candidates_b = nullptr;  // MergedBLEU
  const CandidateFile* base = nullptr;          // DEQ
  std::vector<Words> refs;
  const LoglikFile* loglik = nullptr;           // MADLL
  const std::vector<std::vector<double>>* fluency_scores = nullptr;
  bool mock_fluency = false;
};

/// Full report. BLEU-family values and DP are scaled to [0, 100]; a DEQ
/// with zero denominator is reported as the string "undefined". Throws
/// InvariantViolation if BLEU@N < BLEU@1.
Json make_report(const EvalInputs& inputs);

/// Target sides of a corpus file.
std::vector<Words> read_references(const std::string& path);

}  // namespace knnmt
