#pragma once

// Seeded template grammar producing synthetic parallel data with
// controlled lexical variation. Each slot of a template is filled with a
// concept; the source side names the concept with one word, the target
// side with one of its 2-4 synonyms, drawn with Zipf-like weights.

#include <cstddef>
#include <cstdint>
#include <string>

#include "knnmt/corpus.hpp"

namespace knnmt {

struct CorpusSpec {
  std::size_t n_train = 600;
  std::size_t n_valid = 100;
  std::size_t n_test = 100;
  /// Synonym of rank r is drawn with weight 1 / (r + 1)^skew.
  double synonym_skew = 1.0;
  /// Concepts used per slot class (capped at what the grammar defines).
  std::size_t concepts_per_class = 6;

  void validate() const;
};

struct GeneratedCorpus {
  ParallelCorpus train;
  ParallelCorpus valid;
  ParallelCorpus test;         // source with reference A
  ParallelCorpus test_ref_b;   // same sources, paraphrased reference B
};

/// Deterministic in (spec, seed). Reference B always differs from A in at
/// least one synonym choice.
GeneratedCorpus generate_corpus(const CorpusSpec& spec, std::uint64_t seed);

}  // namespace knnmt
