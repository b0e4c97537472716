#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "knnmt/perturb.hpp"
#include "support.hpp"

using namespace knnmt;

namespace {

double phi(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Mean and std of |a| for a ~ N(m, s^2).
std::pair<double, double> folded_normal(double m, double s) {
  const double mean =
      s * std::sqrt(2.0 / std::numbers::pi) * std::exp(-m * m / (2 * s * s)) + m * (1 - 2 * phi(-m / s));
  return {mean, std::sqrt(m * m + s * s - mean * mean)};
}

double norm(const std::vector<float>& v) {
  double s = 0.0;
  for (float x : v) s += double(x) * double(x);
  return std::sqrt(s);
}

NeighborSet with_distances(std::vector<double> d) {
  NeighborSet ns;
  for (std::size_t i = 0; i < d.size(); ++i) ns.push_back({d[i], static_cast<std::uint32_t>(i), 0});
  return ns;
}

}  // namespace

TEST_CASE("zero noise is the zero vector and leaves the query unchanged") {
  RngStream rng(1);
  const auto z = sample_noise(16, {0.0, 0.0}, rng);
  CHECK(z == std::vector<float>(16, 0.0f));
  const std::vector<float> q{1.0f, -2.0f, 3.5f};
  RngStream rng2(2);
  CHECK(noised_query(q, {0.0, 0.0}, rng2) == q);
}

TEST_CASE("noise norm equals |a| drawn first from the same stream") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const NoiseParams p{3.0, 2.0};
    RngStream rng(seed);
    RngStream replay(seed);
    const double a = p.mean + p.stddev * replay.normal();
    const auto z = sample_noise(24, p, rng);
    CHECK(std::fabs(norm(z) - std::fabs(a)) <= 1e-5 * std::max(1.0, std::fabs(a)));
  }
}

TEST_CASE("noised query adds the sampled noise") {
  const std::vector<float> q{1.0f, 0.0f};
  RngStream a(5), b(5);
  const auto z = sample_noise(2, {1.0, 0.5}, a);
  const auto nq = noised_query(q, {1.0, 0.5}, b);
  CHECK(nq[0] == q[0] + z[0]);
  CHECK(nq[1] == q[1] + z[1]);
}

TEST_CASE("noise norms follow the folded normal") {
  for (auto [m, s] : {std::pair{5.0, 1.0}, std::pair{1.0, 1.0}, std::pair{0.0, 2.0}}) {
    const auto [mean, sd] = folded_normal(m, s);
    RngStream root(99);
    const int n = 10000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      RngStream rng = root.child(i);
      const double r = norm(sample_noise(8, {m, s}, rng));
      sum += r;
      sum2 += r * r;
    }
    const double got_mean = sum / n;
    const double got_sd = std::sqrt(sum2 / n - got_mean * got_mean);
    CHECK(std::fabs(got_mean - mean) < 0.05 * std::max(1.0, s));
    CHECK(std::fabs(got_sd - sd) < 0.05 * std::max(1.0, s));
  }
}

TEST_CASE("adaptive params worked examples") {
  const auto a = adaptive_params(with_distances({1, 1, 1}), 0.1, 0.8);
  CHECK(a.mean == doctest::Approx(0.1));
  CHECK(a.stddev == 0.0);
  const auto b = adaptive_params(with_distances({0, 2}), 0.5, 1.0);
  CHECK(b.mean == 1.0);
  CHECK(b.stddev == 1.0);
  const auto c = adaptive_params(with_distances({3, 7}), 0.0, 0.0);
  CHECK(c.mean == 0.0);
  CHECK(c.stddev == 0.0);
  CHECK_THROWS_AS(adaptive_params({}, 1.0, 1.0), InvalidInput);
}

TEST_CASE("distance statistics") {
  Datastore ds(1, 4);
  ds.add(std::vector<float>{3}, 1);
  const std::vector<std::vector<float>> one{{0.0f}};
  const auto s = estimate_distance_stats(ds, one, 1);
  CHECK(s.mean == 9.0);
  CHECK(s.std == 0.0);
  const std::vector<std::vector<float>> twice{{0.0f}, {0.0f}};
  const auto s2 = estimate_distance_stats(ds, twice, 1);
  CHECK(s2.mean == 9.0);
  CHECK(s2.std == 0.0);
  CHECK_THROWS_AS(estimate_distance_stats(ds, {}, 1), InvalidInput);
}

TEST_CASE("distance statistics match a flat recomputation") {
  std::mt19937_64 gen(3);
  const Datastore ds = testing::random_datastore(gen, 300, 6, 10);
  std::vector<std::vector<float>> queries;
  for (int i = 0; i < 40; ++i) queries.push_back(testing::random_vector(gen, 6));
  const auto s = estimate_distance_stats(ds, queries, 7);

  std::vector<double> flat;
  double max_sum = 0.0, std_sum = 0.0;
  for (const auto& q : queries) {
    const auto ns = testing::brute_force_knn(ds, q, 7);
    double mx = 0.0, mu = 0.0;
    for (const auto& n : ns) flat.push_back(n.distance), mx = std::max(mx, n.distance), mu += n.distance;
    mu /= ns.size();
    double v = 0.0;
    for (const auto& n : ns) v += (n.distance - mu) * (n.distance - mu);
    max_sum += mx;
    std_sum += std::sqrt(v / ns.size());
  }
  double mean = 0.0;
  for (double d : flat) mean += d;
  mean /= flat.size();
  double var = 0.0;
  for (double d : flat) var += (d - mean) * (d - mean);
  CHECK(s.mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(s.std == doctest::Approx(std::sqrt(var / flat.size())).epsilon(1e-12));
  CHECK(s.d_max == doctest::Approx(max_sum / queries.size()).epsilon(1e-12));
  CHECK(s.d_std == doctest::Approx(std_sum / queries.size()).epsilon(1e-12));
}

TEST_CASE("expanded k") {
  CHECK(expanded_k(2.0, 3) == 6);
  CHECK(expanded_k(1.0, 8) == 8);
  CHECK(expanded_k(2.3, 10) == 23);  // 2.3 * 10 is 22.999... in binary
  CHECK(expanded_k(1.5, 8) == 12);
  CHECK(expanded_k(1.6, 8) == 12);
  CHECK(expanded_k(4.0, 8) == 32);
}

TEST_CASE("randomized select keeps k distinct sorted candidates") {
  NeighborSet six;
  for (std::uint32_t i = 0; i < 6; ++i) six.push_back({double(i), i, i});
  RngStream rng(4);
  const auto three = randomized_select(six, 3, rng);  // k = 3, h = 2
  CHECK(three.size() == 3);
  CHECK(std::is_sorted(three.begin(), three.end(), neighbor_less));
  std::set<std::uint32_t> ids;
  for (const auto& n : three) ids.insert(n.key_index);
  CHECK(ids.size() == 3);

  RngStream rng2(4);
  CHECK(randomized_select(six, 6, rng2) == six);
  CHECK(randomized_select(six, 10, rng2) == six);
  CHECK_THROWS_AS(randomized_select(six, 0, rng2), InvalidInput);
}

TEST_CASE("randomized select inclusion is uniform") {
  NeighborSet six;
  for (std::uint32_t i = 0; i < 6; ++i) six.push_back({double(i), i, i});
  std::vector<int> hits(6, 0);
  const RngStream root(17);
  const int n = 20000;
  for (int t = 0; t < n; ++t) {
    RngStream rng = root.child(t);
    for (const auto& nb : randomized_select(six, 3, rng)) ++hits[nb.key_index];
  }
  for (int h : hits) CHECK(std::fabs(double(h) / n - 0.5) <= 0.02);
}

TEST_CASE("randomize requires h above one") {
  PerturbConfig c;
  c.kind = PerturbKind::randomize;
  c.h = 1.0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c.allow_unit_h = true;
  CHECK_NOTHROW(c.validate());
  c.h = 1.1;
  c.allow_unit_h = false;
  CHECK_NOTHROW(c.validate());
  c.kind = PerturbKind::static_noise;
  c.h_s = -1.0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  CHECK(parse_perturb_kind(to_string(PerturbKind::adaptive_noise)) == PerturbKind::adaptive_noise);
  CHECK_THROWS_AS(parse_perturb_kind("gaussian"), InvalidInput);
}
