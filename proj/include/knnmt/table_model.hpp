#pragma once

// Count-based stand-in for a neural translation model. It provides the
// two things retrieval-augmented decoding needs from the base model at
// every step: a next-token distribution p_mt and a hidden-state vector
// used as a datastore key and as the search query.
//
// p_mt(v | x, y<i) pools add-alpha smoothed counts of v following the
// last two target tokens, over the hash buckets of the distinct source
// words. The hidden state is a fixed random projection of
// [mean source embedding ; mean embedding of the last two prefix tokens],
// so contexts that share their last two tokens and most source words land
// close together and retrieve duplicate tokens.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "knnmt/corpus.hpp"
#include "knnmt/scoring.hpp"
#include "knnmt/vocab.hpp"

namespace knnmt {

struct TableModelParams {
  double alpha = 0.1;
  std::size_t embed_dim = 32;
  std::uint64_t embed_seed = 0;
  std::size_t n_buckets = 1024;

  void validate() const;
  friend bool operator==(const TableModelParams&, const TableModelParams&) = default;
};

struct StepOutput {
  TokenDistribution p_mt;
  std::vector<float> hidden;
};

/// Unit-norm pseudo-random vector keyed by (seed, id).
std::vector<float> token_embedding(TokenId id, std::size_t dim, std::uint64_t seed);

/// Bucket of a source word; depends only on the string.
std::uint32_t source_bucket(const std::string& word, std::size_t n_buckets);

class TableModel {
 public:
  /// Builds both vocabularies from the corpus and accumulates counts.
  /// Throws InvalidInput on an empty corpus or an empty side.
  static TableModel train(const ParallelCorpus& corpus, const TableModelParams& params);

  const Vocab& source_vocab() const noexcept { return source_vocab_; }
  const Vocab& target_vocab() const noexcept { return target_vocab_; }
  const TableModelParams& params() const noexcept { return params_; }
  std::size_t embed_dim() const noexcept { return params_.embed_dim; }

  std::vector<TokenId> encode_source(std::span<const std::string> words) const;
  /// <s> w1 ... wn </s>
  std::vector<TokenId> encode_target(std::span<const std::string> words) const;

  /// Requires a non-empty source and a prefix starting with <s>.
  std::vector<float> hidden_state(std::span<const TokenId> source,
                                  std::span<const TokenId> prefix) const;
  TokenDistribution p_mt(std::span<const TokenId> source, std::span<const TokenId> prefix) const;
  StepOutput step(std::span<const TokenId> source, std::span<const TokenId> prefix) const;

  /// Raw count of `next` after the context, pooled over the source buckets.
  std::uint64_t pooled_count(std::span<const TokenId> source, std::span<const TokenId> prefix,
                             TokenId next) const;

  std::string serialize() const;
  static TableModel deserialize(const std::string& text);
  void save(const std::string& path) const;
  static TableModel load(const std::string& path);

  friend bool operator==(const TableModel& a, const TableModel& b);

 private:
  struct Row {
    std::vector<std::pair<TokenId, std::uint64_t>> counts;  // sorted by token
    std::uint64_t total = 0;
  };

  void init_tables();
  std::vector<std::uint32_t> buckets_of(std::span<const TokenId> source) const;
  static std::uint64_t row_key(std::uint32_t bucket, TokenId prev2, TokenId prev1);
  void check_inputs(std::span<const TokenId> source, std::span<const TokenId> prefix) const;

  TableModelParams params_;
  Vocab source_vocab_;
  Vocab target_vocab_;
  std::unordered_map<std::uint64_t, Row> rows_;

  // Derived from params and vocabularies.
  std::vector<float> source_embed_;     // |source vocab| x dim
  std::vector<float> target_embed_;     // |target vocab| x dim
  std::vector<double> projection_;      // dim x 2*dim, row-major
  std::vector<std::uint32_t> source_buckets_;  // bucket of each source id
};

}  // namespace knnmt
