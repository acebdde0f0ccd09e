#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faceret/descriptor.hpp"

namespace faceret {

enum class DistanceKind { Euclidean, Cosine, L1, D1, ChiSquare };

inline constexpr std::array<DistanceKind, 5> kAllDistances{DistanceKind::Euclidean, DistanceKind::Cosine,
                                                          DistanceKind::L1, DistanceKind::D1,
                                                          DistanceKind::ChiSquare};

// "euclidean", "cosine", "l1", "d1", "chisq".
std::string_view to_string(DistanceKind kind);
DistanceKind parse_distance(std::string_view name);

// Lower is more similar.
//   euclidean  sqrt(sum (x-y)^2)
//   l1         sum |x-y|
//   cosine     1 - x.y / (|x| |y|), 1 when either norm is 0
//   chisq      sum over x+y > 0 of (x-y)^2 / (x+y)
//   d1         sum |x-y| / (1 + x + y)
// chisq and d1 require non-negative components.
double distance(DistanceKind kind, std::span<const float> x, std::span<const float> y);

// Row-major stack of equal-length feature vectors.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols);
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<float> data);
  static FeatureMatrix from_descriptors(std::span<const Descriptor> descriptors);
  // A 2-D (rows, cols) tensor, e.g. a descriptor dump.
  static FeatureMatrix from_tensor(const Tensor& t);
  Tensor to_tensor() const;

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const float> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<float> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const float> data() const noexcept { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

// Gallery indices by ascending distance to the probe; ties go to the lower
// gallery index.
std::vector<std::size_t> rank_gallery(DistanceKind kind, std::span<const float> probe,
                                      const FeatureMatrix& gallery);
std::vector<std::size_t> rank_gallery(DistanceKind kind, const Descriptor& probe,
                                      std::span<const Descriptor> gallery);

}  // namespace faceret
