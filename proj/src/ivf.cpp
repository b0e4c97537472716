#include "knnmt/ivf.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "knnmt/binio.hpp"

namespace knnmt {

namespace {

constexpr std::uint32_t kIvfVersion = 1;

std::uint32_t closest_centroid(std::span<const float> key, std::span<const float> centroids,
                               std::size_t dim) {
  const std::size_t n = centroids.size() / dim;
  std::uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < n; ++c) {
    const double d = squared_l2(key, centroids.subspan(c * dim, dim));
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::uint32_t>(c);
    }
  }
  return best;
}

// Returns true if any assignment changed.
bool assign_all(const Datastore& ds, std::span<const float> centroids,
                std::vector<std::uint32_t>& assignments) {
  bool changed = false;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::uint32_t c = closest_centroid(ds.key(i), centroids, ds.dim());
    if (assignments[i] != c) {
      assignments[i] = c;
      changed = true;
    }
  }
  return changed;
}

std::vector<float> farthest_point_init(const Datastore& ds, std::size_t n_clusters,
                                       std::uint64_t seed) {
  const std::size_t n = ds.size();
  const std::size_t dim = ds.dim();
  std::vector<float> centroids;
  centroids.reserve(n_clusters * dim);

  std::size_t pick = static_cast<std::size_t>(seed % n);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < n_clusters; ++c) {
    const auto key = ds.key(pick);
    centroids.insert(centroids.end(), key.begin(), key.end());
    std::size_t next = 0;
    double next_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_l2(ds.key(i), key));
      if (nearest[i] > next_d) {
        next_d = nearest[i];
        next = i;
      }
    }
    pick = next;
  }
  return centroids;
}

}  // namespace

IvfIndex IvfIndex::from_parts(std::size_t dim, std::vector<float> centroids,
                              std::vector<std::uint32_t> assignments) {
  if (dim == 0 || centroids.empty() || centroids.size() % dim != 0)
    throw InvalidInput("ivf: centroid buffer does not match dim");
  IvfIndex index;
  index.dim_ = dim;
  index.n_clusters_ = centroids.size() / dim;
  index.centroids_ = std::move(centroids);
  index.assignments_ = std::move(assignments);
  index.posting_lists_.assign(index.n_clusters_, {});
  for (std::size_t i = 0; i < index.assignments_.size(); ++i) {
    const std::uint32_t c = index.assignments_[i];
    if (c >= index.n_clusters_) throw InvalidInput("ivf: assignment out of range");
    index.posting_lists_[c].push_back(static_cast<std::uint32_t>(i));
  }
  return index;
}

std::vector<std::uint32_t> IvfIndex::nearest_clusters(std::span<const float> query,
                                                      std::size_t n_probe) const {
  if (query.size() != dim_)
    throw InvalidInput("ivf: query has " + std::to_string(query.size()) + " components, index dim is " +
                       std::to_string(dim_));
  std::vector<std::pair<double, std::uint32_t>> order(n_clusters_);
  for (std::size_t c = 0; c < n_clusters_; ++c)
    order[c] = {squared_l2(centroid(c), query), static_cast<std::uint32_t>(c)};
  const std::size_t n = std::min(n_probe, n_clusters_);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end());
  std::vector<std::uint32_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = order[i].second;
  return out;
}

IvfIndex build_ivf(const Datastore& ds, std::size_t n_clusters, std::size_t max_iters,
                   std::uint64_t seed) {
  if (n_clusters == 0) throw InvalidInput("ivf: n_clusters must be >= 1");
  if (n_clusters > ds.size())
    throw InvalidInput("ivf: n_clusters (" + std::to_string(n_clusters) + ") exceeds datastore size (" +
                       std::to_string(ds.size()) + ")");
  const std::size_t dim = ds.dim();
  std::vector<float> centroids = farthest_point_init(ds, n_clusters, seed);
  std::vector<std::uint32_t> assignments(ds.size(), std::numeric_limits<std::uint32_t>::max());

  std::vector<double> sums(n_clusters * dim);
  std::vector<std::size_t> counts(n_clusters);
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    if (!assign_all(ds, centroids, assignments)) break;
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto key = ds.key(i);
      double* row = sums.data() + assignments[i] * dim;
      for (std::size_t d = 0; d < dim; ++d) row[d] += key[d];
      ++counts[assignments[i]];
    }
    for (std::size_t c = 0; c < n_clusters; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t d = 0; d < dim; ++d)
        centroids[c * dim + d] = static_cast<float>(sums[c * dim + d] / static_cast<double>(counts[c]));
    }
  }
  // Final pass so assignments are consistent with the stored centroids
  // even when the iteration budget ran out.
  assign_all(ds, centroids, assignments);
  return IvfIndex::from_parts(dim, std::move(centroids), std::move(assignments));
}

NeighborSet search_ivf(const Datastore& ds, const IvfIndex& index, std::span<const float> query,
                       std::size_t k, std::size_t n_probe) {
  if (k == 0) throw InvalidInput("search: k must be >= 1");
  if (ds.empty()) return {};
  if (n_probe == 0 || n_probe > index.n_clusters())
    throw InvalidInput("ivf: n_probe must be in [1, n_clusters]");
  if (index.assignments().size() != ds.size())
    throw InvalidInput("ivf: index was built for a different datastore");
  std::vector<std::uint32_t> candidates;
  for (std::uint32_t c : index.nearest_clusters(query, n_probe)) {
    const auto list = index.posting_list(c);
    candidates.insert(candidates.end(), list.begin(), list.end());
  }
  return search_subset(ds, query, candidates, k);
}

std::vector<std::uint8_t> save_ivf(const IvfIndex& index) {
  binio::Writer w;
  w.magic("KNNI");
  w.u32(kIvfVersion);
  w.u32(static_cast<std::uint32_t>(index.n_clusters()));
  w.u32(static_cast<std::uint32_t>(index.dim()));
  w.u64(index.assignments().size());
  w.f32s(index.centroids());
  w.u32s(index.assignments());
  return std::move(w).take();
}

IvfIndex load_ivf(std::span<const std::uint8_t> bytes) {
  binio::Reader r(bytes);
  r.expect_magic("KNNI");
  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kIvfVersion)
    throw FormatError("unsupported index version " + std::to_string(version), version_at);
  const std::size_t header_at = r.offset();
  const std::uint32_t n_clusters = r.u32("n_clusters");
  const std::uint32_t dim = r.u32("dim");
  const std::uint64_t count = r.u64("count");
  if (n_clusters == 0 || dim == 0) throw FormatError("zero n_clusters or dim", header_at);
  const std::uint64_t needed =
      (static_cast<std::uint64_t>(n_clusters) * dim + count) * 4;
  if (count > (std::uint64_t{1} << 40) || needed > r.remaining())
    throw FormatError("truncated index body", r.offset());
  std::vector<float> centroids(static_cast<std::size_t>(n_clusters) * dim);
  std::vector<std::uint32_t> assignments(count);
  r.f32s(centroids, "centroids");
  const std::size_t assign_at = r.offset();
  r.u32s(assignments, "assignments");
  r.expect_end();
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] >= n_clusters)
      throw FormatError("assignment out of range", assign_at + i * 4);
  return IvfIndex::from_parts(dim, std::move(centroids), std::move(assignments));
}

void write_ivf_file(const IvfIndex& index, const std::string& path) {
  binio::write_file(path, save_ivf(index));
}

IvfIndex read_ivf_file(const std::string& path) { return load_ivf(binio::read_file(path)); }

}  // namespace knnmt
