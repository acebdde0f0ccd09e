#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faceret/network.hpp"
#include "faceret/tensor.hpp"

namespace faceret {

// Named recipe for a descriptor: which layer's output is the feature and
// which rectifiers become average-biased.
//
// Grammar (indices are network layer numbers, alpha defaults to 1):
//   <tap>R             tap only, no overrides                 e.g. 35R
//   <tap>AR[alpha]     override the tap layer                 e.g. 35AR2
//   <a>AR[alpha]_<tap> override layer a, read out at tap > a  e.g. 30AR_35
//   <a>,<b>,...AR[alpha] override every listed layer, read out at the last
//                                                             e.g. 33,35AR
struct DescriptorVariant {
  std::string name;
  std::size_t tap_layer = 0;
  ActivationOverrides overrides;

  friend bool operator==(const DescriptorVariant&, const DescriptorVariant&) = default;
};

DescriptorVariant parse_variant(std::string_view name);

// The twelve descriptors evaluated with the 16-layer face network.
const std::vector<std::string>& standard_variant_names();

struct Descriptor {
  Tensor values;  // 1-D, non-negative
  std::string variant;
  std::string source;
};

// Bilinear resize with half-pixel centers and edge clamping; channels are
// resampled independently.
Tensor resize_bilinear(const Tensor& image, std::size_t out_height, std::size_t out_width);

// Resize an (H, W, 3) image to the target (H', W', 3) volume, then subtract
// mean[c] from channel c (an empty mean skips the subtraction).
Tensor preprocess(const Tensor& image, const Shape& target, std::span<const float> mean);

// Decodes .vgt, 8-bit .png, or binary .ppm/.pgm into an (H, W, 3) float
// volume in [0, 255] (gray inputs are replicated across channels; alpha is
// dropped). .vgt tensors are returned as stored.
Tensor load_image(const std::filesystem::path& path);

// Descriptor length a variant produces on `spec`, from shape inference only.
std::size_t descriptor_length(const NetworkSpec& spec, const DescriptorVariant& variant);

// flatten(forward(...)) for a preprocessed image.
Descriptor extract(const NetworkSpec& spec, const WeightStore& weights, const DescriptorVariant& variant,
                   const Tensor& image, std::string source = {});

// All variants for one preprocessed image. Variants with identical
// overrides share a single forward pass read out at each of their taps.
std::vector<Descriptor> extract_variants(const NetworkSpec& spec, const WeightStore& weights,
                                         std::span<const DescriptorVariant> variants, const Tensor& image,
                                         const std::string& source = {});

struct ExtractionResult {
  // per_variant[v][i] is the descriptor of input i under variants[v], or
  // empty when input i failed.
  std::vector<std::vector<std::optional<Descriptor>>> per_variant;
  // (input index, message) for every failed input, ascending.
  std::vector<std::pair<std::size_t, std::string>> failures;
};

// Loads, preprocesses, and describes every image on a worker pool. Output
// order follows `images` regardless of completion order. With
// skip_errors=false the first failure (lowest index) is rethrown.
ExtractionResult extract_images(const NetworkSpec& spec, const WeightStore& weights,
                                std::span<const DescriptorVariant> variants,
                                std::span<const std::filesystem::path> images, std::size_t threads,
                                bool skip_errors);

}  // namespace faceret
