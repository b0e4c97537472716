#include "knnmt/vocab.hpp"

namespace knnmt {

Vocab::Vocab() {
  for (const char* t : {"<pad>", "<s>", "</s>", "<unk>"}) add(t);
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  Vocab v;
  if (tokens.size() < kReserved) throw InvalidInput("vocabulary lacks reserved symbols");
  for (std::size_t i = 0; i < kReserved; ++i)
    if (tokens[i] != v.tokens_[i])
      throw InvalidInput("vocabulary reserved symbol " + std::to_string(i) + " is '" + tokens[i] + "'");
  for (std::size_t i = kReserved; i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) throw InvalidInput("duplicate vocabulary entry '" + tokens[i] + "'");
    v.add(tokens[i]);
  }
  return v;
}

TokenId Vocab::add(const std::string& token) {
  auto [it, inserted] = ids_.try_emplace(token, static_cast<TokenId>(tokens_.size()));
  if (inserted) tokens_.push_back(token);
  return it->second;
}

TokenId Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id >= tokens_.size()) throw InvalidInput("token id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

std::vector<TokenId> Vocab::encode(std::span<const std::string> words) const {
  std::vector<TokenId> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(id(w));
  return out;
}

std::vector<std::string> Vocab::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> out;
  for (TokenId t : ids)
    if (t != kPad && t != kBos && t != kEos) out.push_back(token(t));
  return out;
}

}  // namespace knnmt
