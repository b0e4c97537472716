#include "knnmt/datastore.hpp"

#include <algorithm>
#include <cmath>

#include "knnmt/binio.hpp"

namespace knnmt {

namespace {
constexpr std::uint32_t kDatastoreVersion = 1;
}

double squared_l2(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size())
    throw InvalidInput("squared_l2: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                       std::to_string(b.size()) + ")");
  double sum = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = static_cast<double>(a[d]) - static_cast<double>(b[d]);
    sum += diff * diff;
  }
  return sum;
}

Datastore::Datastore(std::size_t dim, std::size_t vocab_size) : dim_(dim), vocab_size_(vocab_size) {
  if (dim == 0) throw InvalidInput("datastore dim must be positive");
  if (vocab_size == 0) throw InvalidInput("datastore vocab_size must be positive");
}

void Datastore::add(std::span<const float> key, TokenId value) {
  if (key.size() != dim_)
    throw InvalidInput("datastore key has " + std::to_string(key.size()) + " components, expected " +
                       std::to_string(dim_));
  if (value >= vocab_size_)
    throw InvalidInput("datastore value " + std::to_string(value) + " >= vocab_size " +
                       std::to_string(vocab_size_));
  for (float c : key)
    if (!std::isfinite(c)) throw InvalidInput("datastore key has a non-finite component");
  keys_.insert(keys_.end(), key.begin(), key.end());
  values_.push_back(value);
}

void Datastore::reserve(std::size_t n) {
  keys_.reserve(n * dim_);
  values_.reserve(n);
}

Datastore build_datastore(std::span<const KeyValue> pairs, std::size_t dim, std::size_t vocab_size) {
  Datastore ds(dim, vocab_size);
  ds.reserve(pairs.size());
  for (const auto& kv : pairs) ds.add(kv.key, kv.value);
  return ds;
}

namespace {

NeighborSet take_top_k(NeighborSet all, std::size_t k) {
  const std::size_t n = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(),
                    neighbor_less);
  all.resize(n);
  return all;
}

}  // namespace

NeighborSet search_exact(const Datastore& ds, std::span<const float> query, std::size_t k) {
  if (k == 0) throw InvalidInput("search: k must be >= 1");
  if (ds.empty()) return {};
  if (query.size() != ds.dim())
    throw InvalidInput("search: query has " + std::to_string(query.size()) +
                       " components, datastore dim is " + std::to_string(ds.dim()));
  NeighborSet all;
  all.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    all.push_back({squared_l2(ds.key(i), query), static_cast<std::uint32_t>(i), ds.value(i)});
  return take_top_k(std::move(all), k);
}

NeighborSet search_subset(const Datastore& ds, std::span<const float> query,
                          std::span<const std::uint32_t> candidates, std::size_t k) {
  if (k == 0) throw InvalidInput("search: k must be >= 1");
  if (ds.empty() || candidates.empty()) return {};
  if (query.size() != ds.dim())
    throw InvalidInput("search: query has " + std::to_string(query.size()) +
                       " components, datastore dim is " + std::to_string(ds.dim()));
  NeighborSet all;
  all.reserve(candidates.size());
  for (std::uint32_t i : candidates) {
    if (i >= ds.size()) throw InvalidInput("search: candidate index out of range");
    all.push_back({squared_l2(ds.key(i), query), i, ds.value(i)});
  }
  return take_top_k(std::move(all), k);
}

std::vector<std::uint8_t> save_datastore(const Datastore& ds) {
  binio::Writer w;
  w.magic("KNND");
  w.u32(kDatastoreVersion);
  w.u32(static_cast<std::uint32_t>(ds.dim()));
  w.u32(static_cast<std::uint32_t>(ds.vocab_size()));
  w.u64(ds.size());
  w.f32s(ds.keys());
  w.u32s(ds.values());
  return std::move(w).take();
}

Datastore load_datastore(std::span<const std::uint8_t> bytes) {
  binio::Reader r(bytes);
  r.expect_magic("KNND");
  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kDatastoreVersion)
    throw FormatError("unsupported datastore version " + std::to_string(version), version_at);
  const std::size_t header_at = r.offset();
  const std::uint32_t dim = r.u32("dim");
  const std::uint32_t vocab = r.u32("vocab_size");
  const std::uint64_t count = r.u64("count");
  if (dim == 0 || vocab == 0) throw FormatError("zero dim or vocab_size", header_at);
  // Guard the allocation against a corrupted count.
  const std::uint64_t needed = count * (static_cast<std::uint64_t>(dim) + 1) * 4;
  if (count > (std::uint64_t{1} << 40) || needed > r.remaining())
    throw FormatError("truncated datastore body (count " + std::to_string(count) + ")", r.offset());

  std::vector<float> keys(count * dim);
  std::vector<std::uint32_t> values(count);
  r.f32s(keys, "keys");
  const std::size_t values_at = r.offset();
  r.u32s(values, "values");
  r.expect_end();

  Datastore ds(dim, vocab);
  ds.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    try {
      ds.add(std::span<const float>(keys.data() + i * dim, dim), values[i]);
    } catch (const InvalidInput& e) {
      throw FormatError(std::string("invalid entry: ") + e.what(), values_at + i * 4);
    }
  }
  return ds;
}

void write_datastore_file(const Datastore& ds, const std::string& path) {
  binio::write_file(path, save_datastore(ds));
}

Datastore read_datastore_file(const std::string& path) {
  return load_datastore(binio::read_file(path));
}

}  // namespace knnmt
