#pragma once

// Little-endian primitives shared by the .vgt and .vgfm codecs.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faceret/error.hpp"

namespace faceret::io {

static_assert(std::endian::native == std::endian::little,
              "binary codecs assume a little-endian host");

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_bytes(std::vector<std::uint8_t>& out, std::string_view s) {
  out.insert(out.end(), s.begin(), s.end());
}

inline void put_floats(std::vector<std::uint8_t>& out, std::span<const float> values) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
  out.insert(out.end(), p, p + values.size_bytes());
}

// Bounds-checked forward reader; running off the end is a format error that
// reports the offset it failed at.
class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::string what)
      : bytes_(bytes), what_(std::move(what)) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > remaining()) {
      throw Error(ErrorKind::Format,
                  what_ + ": truncated at offset " + std::to_string(pos_) + " (needed " +
                      std::to_string(n) + " bytes, " + std::to_string(remaining()) +
                      " available)");
    }
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::uint32_t u32() {
    auto s = take(4);
    return static_cast<std::uint32_t>(s[0]) | (static_cast<std::uint32_t>(s[1]) << 8) |
           (static_cast<std::uint32_t>(s[2]) << 16) | (static_cast<std::uint32_t>(s[3]) << 24);
  }

  void floats(std::span<float> out) {
    auto s = take(out.size_bytes());
    std::memcpy(out.data(), s.data(), s.size());
  }

  void expect_magic(std::string_view magic) {
    auto s = take(magic.size());
    if (std::memcmp(s.data(), magic.data(), magic.size()) != 0) {
      throw Error(ErrorKind::Format, what_ + ": bad magic, expected \"" + std::string(magic) + "\"");
    }
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace faceret::io
