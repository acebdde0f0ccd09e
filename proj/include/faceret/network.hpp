#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "faceret/activations.hpp"
#include "faceret/tensor.hpp"

namespace faceret {

struct InputParams {
  friend bool operator==(const InputParams&, const InputParams&) = default;
};

// Square filters. Fully-connected layers are expressed as a Conv whose
// filter covers the whole input plane with no padding.
struct ConvParams {
  std::size_t filter = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;
  friend bool operator==(const ConvParams&, const ConvParams&) = default;
};

struct PoolParams {
  std::size_t window = 2;
  std::size_t stride = 2;
  std::size_t pad = 0;
  friend bool operator==(const PoolParams&, const PoolParams&) = default;
};

enum class LayerType { Input, Conv, Pool, Activation };

const char* to_string(LayerType type);

struct LayerSpec {
  std::size_t index = 0;
  std::string name;
  std::variant<InputParams, ConvParams, PoolParams, ActivationKind> params;

  LayerType type() const noexcept { return static_cast<LayerType>(params.index()); }
  const ConvParams& conv() const { return std::get<ConvParams>(params); }
  const PoolParams& pool() const { return std::get<PoolParams>(params); }
  const ActivationKind& activation() const { return std::get<ActivationKind>(params); }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Declarative feed-forward schedule. layers[0] is the Input layer; index
// equals position. Volumes are (H, W, C).
struct NetworkSpec {
  std::vector<LayerSpec> layers;
  Shape input_shape;
  std::vector<float> normalization_mean;

  // Output volume of every layer, indexed like `layers`. Throws Shape or
  // Validation errors naming the first offending layer.
  std::vector<Shape> infer_shapes() const;

  // Structural checks plus a full shape-chain pass.
  void validate() const;

  const LayerSpec& layer(std::size_t index) const;
  std::size_t last_index() const { return layers.size() - 1; }

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

// The 16-layer VGG face schedule truncated after relu7 (layers 0..35).
// `width_divisor` scales every channel count down and `input_size` the
// input plane (must be a multiple of 32) so the same topology can run at
// desk scale; the defaults give the full-size network.
struct VggScale {
  std::size_t input_size = 224;
  std::size_t width_divisor = 1;
};

NetworkSpec vgg_face_spec(VggScale scale = {});

// Output extent of a conv/pool window along one axis:
// floor((D + 2p - f) / s) + 1, or nullopt when the window does not fit.
std::optional<std::size_t> window_output_extent(std::size_t extent, std::size_t filter,
                                                std::size_t stride, std::size_t pad);

struct ConvWeights {
  Tensor weight;  // (out_channels, in_channels, f, f)
  std::vector<float> bias;
  friend bool operator==(const ConvWeights&, const ConvWeights&) = default;
};

// Per-Conv-layer parameters keyed by layer index. Immutable once a network
// is loaded; shared read-only across forward passes.
class WeightStore {
 public:
  void set(std::size_t layer_index, Tensor weight, std::vector<float> bias);
  const ConvWeights* find(std::size_t layer_index) const;
  const ConvWeights& at(std::size_t layer_index) const;
  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<std::size_t, ConvWeights>& entries() const noexcept { return entries_; }

  // Every Conv layer of `spec` has a matching-shape entry; throws Weight or
  // Validation errors naming the layer otherwise.
  void validate_against(const NetworkSpec& spec) const;

  friend bool operator==(const WeightStore&, const WeightStore&) = default;

 private:
  std::map<std::size_t, ConvWeights> entries_;
};

// Seeded N(0, std) weights with He-style scaling and small biases, for
// desk-scale networks and tests.
WeightStore random_weights(const NetworkSpec& spec, std::uint64_t seed);

// x: (H, W, Cin); weight: (Cout, Cin, f, f). Zero padding. Sums accumulate
// in double. `layer` only labels error messages.
Tensor conv2d_forward(const Tensor& x, const Tensor& weight, std::span<const float> bias,
                      std::size_t stride, std::size_t pad, std::string_view layer = "conv");

// Per-channel max over each window; padded cells never win.
Tensor maxpool_forward(const Tensor& x, std::size_t window, std::size_t stride, std::size_t pad,
                       std::string_view layer = "pool");

using ActivationOverrides = std::map<std::size_t, ActivationKind>;

// Runs layers 1..tap on a single (H, W, C) volume, substituting overridden
// activations, and returns the tap layer's output. Layers after the tap are
// never executed.
Tensor forward(const NetworkSpec& spec, const WeightStore& weights, const Tensor& input,
               std::size_t tap, const ActivationOverrides& overrides = {});

// One pass read out at several taps; result[k] is the output of taps[k].
std::vector<Tensor> forward_taps(const NetworkSpec& spec, const WeightStore& weights, const Tensor& input,
                                 std::span<const std::size_t> taps, const ActivationOverrides& overrides = {});

// ".vgfm" container: "VGFM", u32 version (1), u32 header length, UTF-8 JSON
// header, then for each blob listed in the header its float32 payload.
struct Model {
  NetworkSpec spec;
  WeightStore weights;
};

std::vector<std::uint8_t> encode_model(const NetworkSpec& spec, const WeightStore& weights);
Model decode_model(std::span<const std::uint8_t> bytes);
void save_weights(const std::filesystem::path& path, const NetworkSpec& spec,
                  const WeightStore& weights);
Model load_weights(const std::filesystem::path& path);

// Spec-only JSON (the container header's layer schema) for inspection.
std::string spec_to_json(const NetworkSpec& spec);

}  // namespace faceret
