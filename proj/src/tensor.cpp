#include "faceret/tensor.hpp"

#include <fstream>
#include <numeric>
#include <sstream>

#include "faceret/binary_io.hpp"
#include "faceret/error.hpp"

namespace faceret {

namespace {

void check_dims(const std::vector<std::size_t>& dims) {
  if (dims.empty()) throw Error(ErrorKind::Shape, "shape must have at least one dimension");
  for (std::size_t d : dims) {
    if (d == 0) throw Error(ErrorKind::Shape, "shape extents must be >= 1");
  }
}

}  // namespace

Shape::Shape(std::initializer_list<std::size_t> dims) : dims_(dims) { check_dims(dims_); }

Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) { check_dims(dims_); }

std::size_t Shape::numel() const noexcept {
  if (dims_.empty()) return 0;
  return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1}, std::multiplies<>());
}

std::string Shape::to_string() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) os << ',';
    os << dims_[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_.numel(), 0.0f) {}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw Error(ErrorKind::Shape, "tensor data length " + std::to_string(data_.size()) +
                                      " does not match shape " + shape_.to_string());
  }
}

Tensor Tensor::filled(Shape shape, float value) {
  std::vector<float> data(shape.numel(), value);
  return Tensor(std::move(shape), std::move(data));
}

Tensor Tensor::reshaped(Shape shape) const& {
  Tensor copy = *this;
  return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
  if (shape.numel() != data_.size()) {
    throw Error(ErrorKind::Shape,
                "cannot reshape " + shape_.to_string() + " to " + shape.to_string());
  }
  return Tensor(std::move(shape), std::move(data_));
}

float mean_volume(const Tensor& t) {
  if (t.empty()) throw Error(ErrorKind::InvalidArgument, "mean_volume of an empty tensor");
  double sum = 0.0;
  for (float v : t.values()) sum += v;
  return static_cast<float>(sum / static_cast<double>(t.size()));
}

Tensor map_elementwise(const Tensor& t, const std::function<float(float)>& f) {
  return map_values(t, f);
}

Tensor flatten(const Tensor& t) {
  if (t.empty()) return t;
  return t.reshaped(Shape{t.size()});
}

std::vector<std::uint8_t> encode_vgt(const Tensor& t) {
  if (t.empty()) throw Error(ErrorKind::InvalidArgument, "cannot encode an empty tensor");
  std::vector<std::uint8_t> out;
  out.reserve(8 + 4 * t.rank() + 4 * t.size());
  io::put_bytes(out, "VGT1");
  io::put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape().dims()) io::put_u32(out, static_cast<std::uint32_t>(d));
  io::put_floats(out, t.values());
  return out;
}

Tensor decode_vgt(std::span<const std::uint8_t> bytes) {
  io::Reader in(bytes, "vgt");
  in.expect_magic("VGT1");
  const std::uint32_t ndims = in.u32();
  if (ndims == 0) throw Error(ErrorKind::Format, "vgt: zero dimensions");
  std::vector<std::size_t> dims(ndims);
  for (auto& d : dims) {
    d = in.u32();
    if (d == 0) throw Error(ErrorKind::Format, "vgt: zero-sized dimension");
  }
  Shape shape(std::move(dims));
  if (shape.numel() * sizeof(float) != in.remaining()) {
    throw Error(ErrorKind::Format, "vgt: payload has " + std::to_string(in.remaining()) +
                                       " bytes, shape " + shape.to_string() + " needs " +
                                       std::to_string(shape.numel() * sizeof(float)));
  }
  Tensor t(std::move(shape));
  in.floats(t.values());
  return t;
}

void write_vgt(const std::filesystem::path& path, const Tensor& t) {
  io::write_file(path, encode_vgt(t));
}

Tensor read_vgt(const std::filesystem::path& path) {
  auto bytes = io::read_file(path);
  try {
    return decode_vgt(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

namespace io {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Format, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  // Write-then-rename so a failed write never leaves a partial file behind.
  auto tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Format, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      std::filesystem::remove(tmp);
      throw Error(ErrorKind::Format, "short write to " + path.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace io

}  // namespace faceret
