#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>

#include "faceret/binary_io.hpp"
#include "faceret/error.hpp"
#include "faceret/synthetic.hpp"
#include "faceret/tensor.hpp"

using namespace faceret;

TEST_CASE("shape rejects empty and zero extents") {
  CHECK_THROWS_AS(Shape({2, 0}), Error);
  CHECK(Shape({2, 3}).numel() == 6);
  CHECK(Shape({2, 3}).to_string() == "(2,3)");
  CHECK(Shape() .numel() == 0);
}

TEST_CASE("tensor construction checks data length") {
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, {1, 2, 3}), Error);
  Tensor t(Shape{2, 3});
  CHECK(t.size() == 6);
  CHECK(std::all_of(t.values().begin(), t.values().end(), [](float v) { return v == 0.0f; }));
}

TEST_CASE("mean_volume examples") {
  CHECK(mean_volume(Tensor(Shape{3}, {1, -1, 2})) == doctest::Approx(2.0 / 3.0).epsilon(1e-7));
  CHECK(mean_volume(Tensor(Shape{4, 5, 6})) == 0.0f);
  CHECK(mean_volume(Tensor::filled(Shape{3, 7}, 2.5f)) == 2.5f);
  CHECK_THROWS_AS(mean_volume(Tensor()), Error);
}

TEST_CASE("mean_volume is linear under shift and scale") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Tensor t = random_tensor(Shape{4, 5, 3}, seed, 3.0f);
    const double m = mean_volume(t);
    for (float c : {-7.5f, 0.25f, 12.0f}) {
      const Tensor shifted = map_values(t, [c](float v) { return v + c; });
      CHECK(mean_volume(shifted) == doctest::Approx(m + c).epsilon(1e-5).scale(1.0));
    }
    for (float s : {0.5f, 4.0f}) {
      const Tensor scaled = map_values(t, [s](float v) { return v * s; });
      CHECK(mean_volume(scaled) == doctest::Approx(m * s).epsilon(1e-5).scale(1.0));
    }
  }
}

TEST_CASE("map_elementwise examples") {
  const Tensor t(Shape{2}, {1, -2});
  CHECK(map_elementwise(t, [](float v) { return -v; }) == Tensor(Shape{2}, {-1, 2}));
  CHECK(map_elementwise(t, [](float v) { return v; }) == t);
  CHECK(map_elementwise(Tensor(Shape{2}, {3, -3}), [](float v) { return std::max(v, 0.0f); }) ==
        Tensor(Shape{2}, {3, 0}));
}

TEST_CASE("flatten keeps row-major order") {
  const Tensor t(Shape{2, 2}, {1, 2, 3, 4});
  CHECK(flatten(t) == Tensor(Shape{4}, {1, 2, 3, 4}));
  const Tensor v = random_tensor(Shape{1, 1, 4096}, 3);
  const Tensor f = flatten(v);
  CHECK(f.shape() == Shape{4096});
  CHECK(std::equal(f.values().begin(), f.values().end(), v.values().begin()));
  const Tensor one(Shape{5}, {5, 4, 3, 2, 1});
  CHECK(flatten(one) == one);
}

TEST_CASE("offset indexes (H, W, C)") {
  Tensor t(Shape{2, 3, 4});
  CHECK(t.offset(1, 2, 3) == 23);
  CHECK(t.offset(0, 1, 0) == 4);
}

TEST_CASE("vgt encoding is byte exact") {
  const Tensor t(Shape{2, 1}, {1.0f, -2.0f});
  const auto bytes = encode_vgt(t);
  const std::vector<std::uint8_t> expected{'V', 'G', 'T', '1', 2, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0,
                                           0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0};
  CHECK(bytes == expected);
  CHECK(decode_vgt(bytes) == t);
}

TEST_CASE("vgt decode rejects corrupt input") {
  const auto bytes = encode_vgt(random_tensor(Shape{3, 4}, 1));
  for (std::size_t n = 0; n < bytes.size(); n += 5) {
    std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + n);
    CHECK_THROWS_AS(decode_vgt(cut), Error);
  }
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_vgt(bad), Error);
  auto extra = bytes;
  extra.push_back(0);
  CHECK_THROWS_AS(decode_vgt(extra), Error);
}

TEST_CASE("vgt file round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "faceret_test_tensor";
  std::filesystem::create_directories(dir);
  const Tensor t = random_tensor(Shape{3, 2, 5}, 11);
  write_vgt(dir / "t.vgt", t);
  CHECK(read_vgt(dir / "t.vgt") == t);
  CHECK_THROWS_AS(read_vgt(dir / "missing.vgt"), Error);
  std::filesystem::remove_all(dir);
}
