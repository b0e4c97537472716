#pragma once

// Key-value store of decoder hidden states and the target tokens that
// followed them, plus exact k-nearest-neighbor search.
//
// All distances are squared L2 and are never square-rooted. Anything
// derived from them (noise magnitudes, temperature) is therefore in
// squared-distance units as well.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "knnmt/error.hpp"

namespace knnmt {

/// Sum of squared component differences, accumulated in double.
/// Throws InvalidInput if the lengths differ.
double squared_l2(std::span<const float> a, std::span<const float> b);

struct Neighbor {
  double distance = 0.0;
  std::uint32_t key_index = 0;
  TokenId token = 0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Total order used for every neighbor list: distance, then key index.
inline bool neighbor_less(const Neighbor& a, const Neighbor& b) noexcept {
  if (a.distance != b.distance) return a.distance < b.distance;
  return a.key_index < b.key_index;
}

/// Neighbors of one query, sorted by `neighbor_less`, no repeated key index.
using NeighborSet = std::vector<Neighbor>;

class Datastore {
 public:
  Datastore() = default;
  Datastore(std::size_t dim, std::size_t vocab_size);

  /// Appends one (key, value) pair. Enforces dimension, finiteness and
  /// value < vocab_size.
  void add(std::span<const float> key, TokenId value);
  void reserve(std::size_t n);

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }

  std::span<const float> key(std::size_t i) const noexcept {
    return {keys_.data() + i * dim_, dim_};
  }
  TokenId value(std::size_t i) const noexcept { return values_[i]; }

  std::span<const float> keys() const noexcept { return keys_; }
  std::span<const TokenId> values() const noexcept { return values_; }

  friend bool operator==(const Datastore&, const Datastore&) = default;

 private:
  std::size_t dim_ = 0;
  std::size_t vocab_size_ = 0;
  std::vector<float> keys_;  // row-major, size() x dim()
  std::vector<TokenId> values_;
};

struct KeyValue {
  std::vector<float> key;
  TokenId value = 0;
};

/// Insertion order is preserved. An empty `pairs` yields an empty store.
Datastore build_datastore(std::span<const KeyValue> pairs, std::size_t dim,
                          std::size_t vocab_size);

/// The min(k, size) globally closest keys. Empty store gives an empty set.
NeighborSet search_exact(const Datastore& ds, std::span<const float> query, std::size_t k);

/// Exact search restricted to the given candidate key indices (any order,
/// no duplicates). Shared by the clustered searcher.
NeighborSet search_subset(const Datastore& ds, std::span<const float> query,
                          std::span<const std::uint32_t> candidates, std::size_t k);

// Binary format (little endian):
//   "KNND" u32 version=1 u32 dim u32 vocab_size u64 count
//   count*dim f32 keys, count u32 values
std::vector<std::uint8_t> save_datastore(const Datastore& ds);
Datastore load_datastore(std::span<const std::uint8_t> bytes);

void write_datastore_file(const Datastore& ds, const std::string& path);
Datastore read_datastore_file(const std::string& path);

}  // namespace knnmt
