#pragma once

// Parallel corpus text format: one pair per line, source and target
// separated by a single tab, tokens separated by single spaces.

#include <string>
#include <string_view>
#include <vector>

namespace knnmt {

struct SentencePair {
  std::vector<std::string> source;
  std::vector<std::string> target;

  friend bool operator==(const SentencePair&, const SentencePair&) = default;
};

using ParallelCorpus = std::vector<SentencePair>;

std::vector<std::string> split_tokens(std::string_view text);
std::string join_tokens(const std::vector<std::string>& tokens);

/// Parses one line; `line_no` is reported in FormatError offsets.
SentencePair parse_corpus_line(std::string_view line, std::size_t line_no);
std::string format_corpus_line(const SentencePair& pair);

ParallelCorpus read_corpus(const std::string& path);
void write_corpus(const ParallelCorpus& corpus, const std::string& path);

}  // namespace knnmt
