#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "faceret/error.hpp"
#include "faceret/similarity.hpp"

using namespace faceret;

namespace {

std::vector<float> vec(std::initializer_list<float> v) { return v; }

std::vector<float> random_nonneg(std::mt19937_64& rng, std::size_t n, bool sparse) {
  std::uniform_real_distribution<float> u(0.0f, 3.0f);
  std::bernoulli_distribution zero(sparse ? 0.4 : 0.0);
  std::vector<float> out(n);
  for (float& v : out) v = zero(rng) ? 0.0f : u(rng);
  return out;
}

}  // namespace

TEST_CASE("distance hand values") {
  CHECK(distance(DistanceKind::ChiSquare, vec({1, 0}), vec({0, 1})) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::abs(distance(DistanceKind::D1, vec({1, 2}), vec({3, 5})) - 0.775) <= 1e-9);
  CHECK(distance(DistanceKind::Euclidean, vec({3, 4}), vec({0, 0})) == 5.0);
  CHECK(distance(DistanceKind::Cosine, vec({1, 0}), vec({0, 1})) == 1.0);
  CHECK(distance(DistanceKind::L1, vec({1, -2}), vec({0, 1})) == 4.0);
  CHECK(distance(DistanceKind::Cosine, vec({0, 0}), vec({0, 1})) == 1.0);
  CHECK(distance(DistanceKind::Cosine, vec({1, 1}), vec({-1, -1})) == doctest::Approx(2.0));
  CHECK(distance(DistanceKind::ChiSquare, vec({0, 0}), vec({0, 0})) == 0.0);
}

TEST_CASE("distance errors") {
  CHECK_THROWS_AS(distance(DistanceKind::L1, vec({1}), vec({1, 2})), Error);
  CHECK_THROWS_AS(distance(DistanceKind::L1, std::vector<float>{}, std::vector<float>{}), Error);
  for (DistanceKind k : {DistanceKind::ChiSquare, DistanceKind::D1}) {
    try {
      distance(k, vec({1, -0.5f}), vec({1, 1}));
      FAIL("accepted");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Domain);
    }
  }
  CHECK_NOTHROW(distance(DistanceKind::L1, vec({1, -0.5f}), vec({1, 1})));
}

TEST_CASE("distance names") {
  for (DistanceKind k : kAllDistances) CHECK(parse_distance(to_string(k)) == k);
  CHECK(to_string(DistanceKind::ChiSquare) == "chisq");
  CHECK_THROWS_AS(parse_distance("emd"), Error);
}

TEST_CASE("metric axioms on random non-negative pairs") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t n = 1 + trial % 64;
    const auto x = random_nonneg(rng, n, trial % 2 == 0);
    const auto y = random_nonneg(rng, n, trial % 3 == 0);
    for (DistanceKind k : kAllDistances) {
      const double dxy = distance(k, x, y);
      const double dyx = distance(k, y, x);
      CHECK(dxy >= 0.0);
      CHECK(std::abs(dxy - dyx) <= 1e-6 * std::max(1e-300, std::max(dxy, dyx)));
      const double self = distance(k, x, x);
      if (k == DistanceKind::Cosine) {
        const bool zero = std::all_of(x.begin(), x.end(), [](float v) { return v == 0.0f; });
        if (!zero) CHECK(self <= 1e-6);
      } else {
        CHECK(self == 0.0);
      }
    }
  }
}

TEST_CASE("distances agree with direct formulas") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = random_nonneg(rng, 37, true);
    const auto y = random_nonneg(rng, 37, true);
    double e = 0, l1 = 0, chi = 0, d1 = 0, dot = 0, nx = 0, ny = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double a = x[i], b = y[i];
      e += (a - b) * (a - b);
      l1 += std::abs(a - b);
      if (a + b > 0) chi += (a - b) * (a - b) / (a + b);
      d1 += std::abs(a - b) / (1 + a + b);
      dot += a * b;
      nx += a * a;
      ny += b * b;
    }
    CHECK(distance(DistanceKind::Euclidean, x, y) == doctest::Approx(std::sqrt(e)).epsilon(1e-12));
    CHECK(distance(DistanceKind::L1, x, y) == doctest::Approx(l1).epsilon(1e-12));
    CHECK(distance(DistanceKind::ChiSquare, x, y) == doctest::Approx(chi).epsilon(1e-12));
    CHECK(distance(DistanceKind::D1, x, y) == doctest::Approx(d1).epsilon(1e-12));
    CHECK(distance(DistanceKind::Cosine, x, y) ==
          doctest::Approx(1 - dot / std::sqrt(nx * ny)).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("rank_gallery examples") {
  FeatureMatrix g(4, 2, {10, 10, 20, 20, 1, 2, 30, 30});
  CHECK(rank_gallery(DistanceKind::L1, vec({1, 2}), g).front() == 2);
  CHECK(rank_gallery(DistanceKind::L1, vec({1, 2}), FeatureMatrix(1, 2, {5, 5})) == std::vector<std::size_t>{0});
  FeatureMatrix line(3, 1, {0.3f, 0.1f, 0.2f});
  CHECK(rank_gallery(DistanceKind::L1, vec({0}), line) == std::vector<std::size_t>{1, 2, 0});
  FeatureMatrix ties(3, 1, {1, 1, 1});
  CHECK(rank_gallery(DistanceKind::Euclidean, vec({0}), ties) == std::vector<std::size_t>{0, 1, 2});
  CHECK_THROWS_AS(rank_gallery(DistanceKind::L1, vec({0}), FeatureMatrix()), Error);
}

TEST_CASE("rank_gallery matches a full-sort oracle") {
  std::mt19937_64 rng(3);
  for (std::size_t n : {2u, 17u, 250u, 1000u}) {
    FeatureMatrix g(n, 8);
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = random_nonneg(rng, 8, false);
      std::copy(v.begin(), v.end(), g.row(i).begin());
      if (i % 7 == 3) std::copy(g.row(0).begin(), g.row(0).end(), g.row(i).begin());  // ties
    }
    const auto probe = random_nonneg(rng, 8, false);
    for (DistanceKind k : kAllDistances) {
      std::vector<std::pair<double, std::size_t>> ref;
      for (std::size_t i = 0; i < n; ++i) ref.emplace_back(distance(k, probe, g.row(i)), i);
      std::sort(ref.begin(), ref.end());
      const auto got = rank_gallery(k, probe, g);
      REQUIRE(got.size() == n);
      for (std::size_t r = 0; r < n; ++r) CHECK(got[r] == ref[r].second);
    }
    // Euclidean and squared Euclidean order the gallery the same way.
    std::vector<std::size_t> sq(n);
    std::iota(sq.begin(), sq.end(), 0);
    auto d2 = [&](std::size_t i) {
      double s = 0;
      for (std::size_t c = 0; c < 8; ++c) s += double(probe[c] - g.row(i)[c]) * double(probe[c] - g.row(i)[c]);
      return s;
    };
    std::stable_sort(sq.begin(), sq.end(), [&](std::size_t a, std::size_t b) { return d2(a) < d2(b); });
    CHECK(rank_gallery(DistanceKind::Euclidean, probe, g) == sq);
  }
}

TEST_CASE("feature matrix conversions") {
  const FeatureMatrix m(2, 3, {1, 2, 3, 4, 5, 6});
  const Tensor t = m.to_tensor();
  CHECK(t.shape() == Shape{2, 3});
  const FeatureMatrix back = FeatureMatrix::from_tensor(t);
  CHECK(back.rows() == 2);
  CHECK(back.row(1)[2] == 6.0f);
  CHECK_THROWS_AS(FeatureMatrix::from_tensor(Tensor(Shape{6})), Error);
  CHECK_THROWS_AS(FeatureMatrix(2, 3, {1, 2}), Error);
  std::vector<Descriptor> ds{{Tensor(Shape{2}, {1, 2}), "v", "a"}, {Tensor(Shape{3}, {1, 2, 3}), "v", "b"}};
  CHECK_THROWS_AS(FeatureMatrix::from_descriptors(ds), Error);
  ds[1].values = Tensor(Shape{2}, {3, 4});
  const FeatureMatrix fm = FeatureMatrix::from_descriptors(ds);
  CHECK(fm.row(1)[0] == 3.0f);
  CHECK(rank_gallery(DistanceKind::L1, ds[1], ds) == std::vector<std::size_t>{1, 0});
}
