#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "knnmt/error.hpp"

namespace knnmt {

/// Token <-> id bijection with fixed reserved ids.
class Vocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr std::size_t kReserved = 4;

  Vocab();
  /// Rebuilds from a full ordered token list whose first four entries are
  /// the reserved symbols.
  static Vocab from_tokens(std::vector<std::string> tokens);

  /// Id of `token`, inserting it if absent.
  TokenId add(const std::string& token);
  /// Id of `token`, or kUnk if absent.
  TokenId id(const std::string& token) const;
  bool contains(const std::string& token) const { return ids_.contains(token); }
  const std::string& token(TokenId id) const;
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  std::vector<TokenId> encode(std::span<const std::string> words) const;
  /// Surface tokens with bos/eos/pad dropped.
  std::vector<std::string> decode(std::span<const TokenId> ids) const;

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

}  // namespace knnmt
