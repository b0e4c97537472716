#pragma once

// Inverted-file index: k-means partition of the datastore keys, searched by
// scanning only the posting lists of the clusters nearest to the query.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "knnmt/datastore.hpp"

namespace knnmt {

class IvfIndex {
 public:
  IvfIndex() = default;

  std::size_t n_clusters() const noexcept { return n_clusters_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const float> centroid(std::size_t c) const noexcept {
    return {centroids_.data() + c * dim_, dim_};
  }
  std::span<const float> centroids() const noexcept { return centroids_; }
  std::span<const std::uint32_t> assignments() const noexcept { return assignments_; }
  std::span<const std::uint32_t> posting_list(std::size_t c) const noexcept {
    return posting_lists_[c];
  }

  /// Cluster ids ordered by centroid distance to `query` (ties: lower id),
  /// truncated to `n_probe`.
  std::vector<std::uint32_t> nearest_clusters(std::span<const float> query,
                                              std::size_t n_probe) const;

  friend bool operator==(const IvfIndex&, const IvfIndex&) = default;

  /// Rebuilds posting lists from centroids and assignments. Used by
  /// build_ivf and the file loader.
  static IvfIndex from_parts(std::size_t dim, std::vector<float> centroids,
                             std::vector<std::uint32_t> assignments);

 private:
  std::size_t n_clusters_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> centroids_;
  std::vector<std::uint32_t> assignments_;
  std::vector<std::vector<std::uint32_t>> posting_lists_;
};

/// Lloyd's k-means. Initialization: the first centroid is the key at
/// `seed % size`, each further centroid is the key farthest (squared L2)
/// from its nearest chosen centroid, ties to the lowest key index.
/// Empty clusters keep their previous centroid. The returned assignments
/// are always the argmin over the returned centroids.
IvfIndex build_ivf(const Datastore& ds, std::size_t n_clusters, std::size_t max_iters,
                   std::uint64_t seed);

/// Exact search over the union of the `n_probe` closest posting lists.
NeighborSet search_ivf(const Datastore& ds, const IvfIndex& index, std::span<const float> query,
                       std::size_t k, std::size_t n_probe);

// "KNNI" u32 version=1 u32 n_clusters u32 dim u64 count
// n_clusters*dim f32 centroids, count u32 assignments
std::vector<std::uint8_t> save_ivf(const IvfIndex& index);
IvfIndex load_ivf(std::span<const std::uint8_t> bytes);

void write_ivf_file(const IvfIndex& index, const std::string& path);
IvfIndex read_ivf_file(const std::string& path);

}  // namespace knnmt
