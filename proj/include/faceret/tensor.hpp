#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace faceret {

// Ordered list of positive extents. Dimension-wise equality.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims);
  explicit Shape(std::vector<std::size_t> dims);

  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t operator[](std::size_t axis) const { return dims_.at(axis); }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }

  // Product of all extents; 0 for the rank-0 (empty) shape.
  std::size_t numel() const noexcept;

  std::string to_string() const;

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  std::vector<std::size_t> dims_;
};

// Dense row-major float32 volume (last dimension fastest).
//
// A default-constructed Tensor is empty (rank 0, no data). Every other
// Tensor has rank >= 1, all extents >= 1, and numel() values.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor filled(Shape shape, float value);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.rank(); }
  std::size_t dim(std::size_t axis) const { return shape_[axis]; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const float> values() const noexcept { return data_; }
  std::span<float> values() noexcept { return data_; }
  const float* data() const noexcept { return data_.data(); }
  float* data() noexcept { return data_.data(); }

  float operator[](std::size_t i) const { return data_[i]; }
  float& operator[](std::size_t i) { return data_[i]; }

  // Row-major offset for 3-D (H, W, C) volumes.
  std::size_t offset(std::size_t i, std::size_t j, std::size_t c) const noexcept {
    return (i * shape_[1] + j) * shape_[2] + c;
  }

  // Same values, new shape with equal element count.
  Tensor reshaped(Shape shape) const&;
  Tensor reshaped(Shape shape) &&;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

// Full-volume average: sum of all elements / numel, accumulated in double.
float mean_volume(const Tensor& t);

Tensor map_elementwise(const Tensor& t, const std::function<float(float)>& f);

template <typename F>
Tensor map_values(const Tensor& t, F&& f) {
  Tensor out = t;
  for (float& v : out.values()) v = f(v);
  return out;
}

// 1-D view of the row-major element order.
Tensor flatten(const Tensor& t);

// ".vgt" raw tensor file: "VGT1", u32 ndims, ndims x u32 extents,
// numel x float32, all little-endian.
void write_vgt(const std::filesystem::path& path, const Tensor& t);
Tensor read_vgt(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_vgt(const Tensor& t);
Tensor decode_vgt(std::span<const std::uint8_t> bytes);

}  // namespace faceret
