#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <memory>

#include "faceret/binary_io.hpp"
#include "faceret/descriptor.hpp"
#include "faceret/error.hpp"

namespace faceret {

namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

Tensor load_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw Error(ErrorKind::Format, path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    std::string message = image.message;
    png_image_free(&image);
    throw Error(ErrorKind::Format, path.string() + ": " + message);
  }
  Tensor out(Shape{image.height, image.width, 3});
  std::transform(pixels.begin(), pixels.end(), out.values().begin(),
                 [](png_byte b) { return static_cast<float>(b); });
  return out;
}

// Binary netpbm: P6 (RGB) or P5 (gray, replicated to RGB), maxval <= 255.
Tensor load_netpbm(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  std::size_t pos = 0;
  auto fail = [&](const std::string& why) -> Error {
    return Error(ErrorKind::Format, path.string() + ": " + why);
  };
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') t.push_back(static_cast<char>(bytes[pos++]));
    if (t.empty()) throw fail("truncated netpbm header");
    return t;
  };
  auto number = [&]() {
    const std::string t = token();
    if (!std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c); })) {
      throw fail("bad netpbm header field \"" + t + "\"");
    }
    return static_cast<std::size_t>(std::stoul(t));
  };

  const std::string magic = token();
  if (magic != "P6" && magic != "P5") throw fail("unsupported netpbm type " + magic + " (need P5 or P6)");
  const std::size_t width = number();
  const std::size_t height = number();
  const std::size_t maxval = number();
  if (width == 0 || height == 0) throw fail("empty image");
  if (maxval == 0 || maxval > 255) throw fail("only 8-bit netpbm is supported");
  ++pos;  // single whitespace byte before the raster

  const std::size_t channels = magic == "P6" ? 3 : 1;
  const std::size_t needed = width * height * channels;
  if (pos > bytes.size() || bytes.size() - pos < needed) throw fail("truncated raster");

  Tensor out(Shape{height, width, 3});
  const double scale = 255.0 / static_cast<double>(maxval);
  for (std::size_t p = 0; p < width * height; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      const std::uint8_t raw = bytes[pos + p * channels + (channels == 3 ? c : 0)];
      out[p * 3 + c] = static_cast<float>(raw * scale);
    }
  }
  return out;
}

}  // namespace

Tensor load_image(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".vgt") return read_vgt(path);
  if (ext == ".png") return load_png(path);
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return load_netpbm(path);
  throw Error(ErrorKind::Format, path.string() + ": unsupported image type \"" + ext + "\" (use .vgt, .png, .ppm, .pgm)");
}

}  // namespace faceret
