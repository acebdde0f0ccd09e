#include "faceret/descriptor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <regex>

#include "faceret/error.hpp"
#include "faceret/parallel.hpp"

namespace faceret {

namespace {

std::size_t parse_index(const std::string& digits, std::string_view name) {
  std::size_t value = 0;
  auto res = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (res.ec != std::errc() || res.ptr != digits.data() + digits.size()) {
    throw Error(ErrorKind::Parse, "variant \"" + std::string(name) + "\": bad layer index " + digits);
  }
  return value;
}

[[noreturn]] void bad_variant(std::string_view name, const std::string& why) {
  throw Error(ErrorKind::Parse,
              "unknown descriptor variant \"" + std::string(name) + "\" (" + why +
                  "); expected <tap>R, <tap>AR[alpha], <layer>AR[alpha]_<tap>, or <layer>,<tap>AR[alpha], "
                  "e.g. 35R, 35AR2, 30AR_35, 33,35AR");
}

}  // namespace

DescriptorVariant parse_variant(std::string_view name) {
  static const std::regex pattern(R"(^(\d+(?:,\d+)*)(R|AR(\d+(?:\.\d+)?)?)(?:_(\d+))?$)");
  const std::string text(name);
  std::smatch m;
  if (!std::regex_match(text, m, pattern)) bad_variant(name, "does not match the grammar");

  std::vector<std::size_t> layers;
  {
    const std::string list = m[1].str();
    std::size_t start = 0;
    while (start <= list.size()) {
      const std::size_t comma = std::min(list.find(',', start), list.size());
      layers.push_back(parse_index(list.substr(start, comma - start), name));
      start = comma + 1;
    }
  }
  const bool biased = m[2].str() != "R";
  const bool has_suffix = m[4].matched;

  DescriptorVariant variant;
  variant.name = text;
  if (!biased) {
    if (layers.size() != 1 || has_suffix) bad_variant(name, "plain R takes exactly one layer");
    variant.tap_layer = layers.front();
    return variant;
  }

  float alpha = 1.0f;
  if (m[3].matched) {
    const std::string digits = m[3].str();
    auto res = std::from_chars(digits.data(), digits.data() + digits.size(), alpha);
    if (res.ec != std::errc() || !std::isfinite(alpha)) bad_variant(name, "bad alpha");
  }
  for (std::size_t i = 1; i < layers.size(); ++i) {
    if (layers[i] <= layers[i - 1]) bad_variant(name, "layer list must be strictly increasing");
  }
  if (has_suffix && layers.size() != 1) bad_variant(name, "_<tap> takes a single AB-ReLU layer");

  variant.tap_layer = has_suffix ? parse_index(m[4].str(), name) : layers.back();
  if (variant.tap_layer < layers.back()) bad_variant(name, "tap must not precede an overridden layer");
  if (has_suffix && variant.tap_layer == layers.back()) bad_variant(name, "_<tap> must name a later layer");
  for (std::size_t layer : layers) variant.overrides.emplace(layer, ActivationKind::ab_relu(alpha));
  return variant;
}

const std::vector<std::string>& standard_variant_names() {
  static const std::vector<std::string> names{"35R",  "35AR",  "35AR2", "35AR5",   "33R",    "33AR",
                                              "33AR2", "33AR5", "33AR_35", "33,35AR", "30AR_35", "30AR"};
  return names;
}

Tensor resize_bilinear(const Tensor& image, std::size_t out_height, std::size_t out_width) {
  if (image.rank() != 3) {
    throw Error(ErrorKind::Format, "resize expects an (H,W,C) image, got " + image.shape().to_string());
  }
  if (out_height == 0 || out_width == 0) throw Error(ErrorKind::InvalidArgument, "resize target must be non-empty");
  const std::size_t in_h = image.dim(0), in_w = image.dim(1), channels = image.dim(2);
  if (in_h == out_height && in_w == out_width) return image;

  struct Tap {
    std::size_t lo, hi;
    double frac;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
      double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const auto lo = static_cast<std::size_t>(std::floor(src));
      t[o] = Tap{lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
    }
    return t;
  };
  const auto rows = taps(in_h, out_height);
  const auto cols = taps(in_w, out_width);

  Tensor out(Shape{out_height, out_width, channels});
  for (std::size_t i = 0; i < out_height; ++i) {
    const Tap& r = rows[i];
    for (std::size_t j = 0; j < out_width; ++j) {
      const Tap& c = cols[j];
      for (std::size_t ch = 0; ch < channels; ++ch) {
        const double top = (1.0 - c.frac) * image[image.offset(r.lo, c.lo, ch)] + c.frac * image[image.offset(r.lo, c.hi, ch)];
        const double bottom = (1.0 - c.frac) * image[image.offset(r.hi, c.lo, ch)] + c.frac * image[image.offset(r.hi, c.hi, ch)];
        out[out.offset(i, j, ch)] = static_cast<float>((1.0 - r.frac) * top + r.frac * bottom);
      }
    }
  }
  return out;
}

Tensor preprocess(const Tensor& image, const Shape& target, std::span<const float> mean) {
  if (image.rank() != 3 || image.dim(2) != 3) {
    throw Error(ErrorKind::Format, "expected a 3-channel (H,W,3) image, got " + image.shape().to_string());
  }
  if (target.rank() < 2 || (target.rank() == 3 && target[2] != 3)) {
    throw Error(ErrorKind::InvalidArgument, "preprocess target must be (H,W) or (H,W,3), got " + target.to_string());
  }
  if (!mean.empty() && mean.size() != 3) {
    throw Error(ErrorKind::InvalidArgument, "normalization mean must have 3 entries");
  }
  Tensor out = resize_bilinear(image, target[0], target[1]);
  if (!mean.empty()) {
    auto v = out.values();
    for (std::size_t k = 0; k < v.size(); ++k) v[k] -= mean[k % 3];
  }
  return out;
}

std::size_t descriptor_length(const NetworkSpec& spec, const DescriptorVariant& variant) {
  const auto shapes = spec.infer_shapes();
  if (variant.tap_layer >= shapes.size()) {
    throw Error(ErrorKind::Config, "variant " + variant.name + ": tap layer " + std::to_string(variant.tap_layer) +
                                       " is beyond the network");
  }
  return shapes[variant.tap_layer].numel();
}

namespace {

void check_tap_is_rectifier(const NetworkSpec& spec, const DescriptorVariant& variant) {
  const LayerSpec& layer = spec.layer(variant.tap_layer);
  if (layer.type() != LayerType::Activation) {
    throw Error(ErrorKind::Config, "variant " + variant.name + ": tap layer " + std::to_string(layer.index) + " (" +
                                       layer.name + ") is not a rectifier");
  }
}

}  // namespace

Descriptor extract(const NetworkSpec& spec, const WeightStore& weights, const DescriptorVariant& variant,
                   const Tensor& image, std::string source) {
  check_tap_is_rectifier(spec, variant);
  return Descriptor{flatten(forward(spec, weights, image, variant.tap_layer, variant.overrides)), variant.name,
                    std::move(source)};
}

std::vector<Descriptor> extract_variants(const NetworkSpec& spec, const WeightStore& weights,
                                         std::span<const DescriptorVariant> variants, const Tensor& image,
                                         const std::string& source) {
  for (const auto& v : variants) check_tap_is_rectifier(spec, v);
  std::vector<Descriptor> out(variants.size());
  std::vector<bool> done(variants.size(), false);
  for (std::size_t first = 0; first < variants.size(); ++first) {
    if (done[first]) continue;
    std::vector<std::size_t> group;
    std::vector<std::size_t> taps;
    for (std::size_t k = first; k < variants.size(); ++k) {
      if (!done[k] && variants[k].overrides == variants[first].overrides) {
        group.push_back(k);
        taps.push_back(variants[k].tap_layer);
        done[k] = true;
      }
    }
    auto outputs = forward_taps(spec, weights, image, taps, variants[first].overrides);
    for (std::size_t g = 0; g < group.size(); ++g) {
      out[group[g]] = Descriptor{flatten(outputs[g]), variants[group[g]].name, source};
    }
  }
  return out;
}

ExtractionResult extract_images(const NetworkSpec& spec, const WeightStore& weights,
                                std::span<const DescriptorVariant> variants,
                                std::span<const std::filesystem::path> images, std::size_t threads,
                                bool skip_errors) {
  ExtractionResult result;
  result.per_variant.assign(variants.size(), std::vector<std::optional<Descriptor>>(images.size()));
  std::vector<std::string> errors(images.size());

  parallel_for(images.size(), threads, [&](std::size_t i) {
    try {
      const Tensor input = preprocess(load_image(images[i]), spec.input_shape, spec.normalization_mean);
      auto descriptors = extract_variants(spec, weights, variants, input, images[i].string());
      for (std::size_t v = 0; v < variants.size(); ++v) result.per_variant[v][i] = std::move(descriptors[v]);
    } catch (const std::exception& e) {
      if (!skip_errors) throw;
      errors[i] = images[i].string() + ": " + e.what();
    }
  });

  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!errors[i].empty()) result.failures.emplace_back(i, std::move(errors[i]));
  }
  return result;
}

}  // namespace faceret
