#include "knnmt/corpus.hpp"

#include <fstream>

#include "knnmt/error.hpp"

namespace knnmt {

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ') ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

SentencePair parse_corpus_line(std::string_view line, std::size_t line_no) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const auto tab = line.find('\t');
  if (tab == std::string_view::npos) throw FormatError("corpus line has no tab separator", line_no, FormatError::line);
  if (line.find('\t', tab + 1) != std::string_view::npos)
    throw FormatError("corpus line has more than one tab", line_no, FormatError::line);
  SentencePair pair{split_tokens(line.substr(0, tab)), split_tokens(line.substr(tab + 1))};
  if (pair.source.empty()) throw FormatError("empty source sentence", line_no, FormatError::line);
  if (pair.target.empty()) throw FormatError("empty target sentence", line_no, FormatError::line);
  return pair;
}

std::string format_corpus_line(const SentencePair& pair) {
  return join_tokens(pair.source) + '\t' + join_tokens(pair.target);
}

ParallelCorpus read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus " + path);
  ParallelCorpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    corpus.push_back(parse_corpus_line(line, line_no));
  }
  return corpus;
}

void write_corpus(const ParallelCorpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const auto& pair : corpus) out << format_corpus_line(pair) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace knnmt
