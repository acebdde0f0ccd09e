#include "faceret/network.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

#include "faceret/error.hpp"

namespace faceret {

const char* to_string(LayerType type) {
  switch (type) {
    case LayerType::Input: return "Input";
    case LayerType::Conv: return "Conv";
    case LayerType::Pool: return "Pool";
    case LayerType::Activation: return "Activation";
  }
  return "?";
}

std::optional<std::size_t> window_output_extent(std::size_t extent, std::size_t filter,
                                                std::size_t stride, std::size_t pad) {
  if (filter == 0 || stride == 0) return std::nullopt;
  const std::size_t padded = extent + 2 * pad;
  if (padded < filter) return std::nullopt;
  return (padded - filter) / stride + 1;
}

namespace {

std::string layer_label(const LayerSpec& layer) {
  return "layer " + std::to_string(layer.index) + " (" + layer.name + ")";
}

Shape volume(std::size_t h, std::size_t w, std::size_t c) { return Shape{h, w, c}; }

void require_volume(const Shape& s, std::string_view label) {
  if (s.rank() != 3) {
    throw Error(ErrorKind::Shape,
                std::string(label) + ": expected an (H,W,C) volume, got " + s.to_string());
  }
}

}  // namespace

const LayerSpec& NetworkSpec::layer(std::size_t index) const {
  if (index >= layers.size()) {
    throw Error(ErrorKind::Config, "layer index " + std::to_string(index) + " out of range (network has " +
                                       std::to_string(layers.size()) + " layers)");
  }
  return layers[index];
}

std::vector<Shape> NetworkSpec::infer_shapes() const {
  if (layers.empty() || layers.front().type() != LayerType::Input) {
    throw Error(ErrorKind::Validation, "network must start with an Input layer");
  }
  require_volume(input_shape, "input");

  std::vector<Shape> shapes;
  shapes.reserve(layers.size());
  shapes.push_back(input_shape);
  for (std::size_t i = 1; i < layers.size(); ++i) {
    const LayerSpec& layer = layers[i];
    const Shape& in = shapes.back();
    const std::string label = layer_label(layer);
    switch (layer.type()) {
      case LayerType::Input:
        throw Error(ErrorKind::Validation, label + ": Input layer may only appear first");
      case LayerType::Activation:
        shapes.push_back(in);
        break;
      case LayerType::Conv: {
        const ConvParams& p = layer.conv();
        if (p.filter == 0 || p.stride == 0 || p.in_channels == 0 || p.out_channels == 0) {
          throw Error(ErrorKind::Validation, label + ": conv parameters must be positive");
        }
        if (in[2] != p.in_channels) {
          throw Error(ErrorKind::Shape, label + ": expects " + std::to_string(p.in_channels) +
                                            " input channels, previous volume is " + in.to_string());
        }
        auto h = window_output_extent(in[0], p.filter, p.stride, p.pad);
        auto w = window_output_extent(in[1], p.filter, p.stride, p.pad);
        if (!h || !w) {
          throw Error(ErrorKind::Shape, label + ": filter " + std::to_string(p.filter) +
                                            " does not fit input " + in.to_string());
        }
        shapes.push_back(volume(*h, *w, p.out_channels));
        break;
      }
      case LayerType::Pool: {
        const PoolParams& p = layer.pool();
        if (p.window == 0 || p.stride == 0) {
          throw Error(ErrorKind::Validation, label + ": pool parameters must be positive");
        }
        if (p.pad >= p.window) {
          throw Error(ErrorKind::Validation, label + ": pool padding must be smaller than the window");
        }
        auto h = window_output_extent(in[0], p.window, p.stride, p.pad);
        auto w = window_output_extent(in[1], p.window, p.stride, p.pad);
        if (!h || !w) {
          throw Error(ErrorKind::Shape, label + ": window " + std::to_string(p.window) +
                                            " does not fit input " + in.to_string());
        }
        shapes.push_back(volume(*h, *w, in[2]));
        break;
      }
    }
  }
  return shapes;
}

void NetworkSpec::validate() const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].index != i) {
      throw Error(ErrorKind::Validation, "layer \"" + layers[i].name + "\" has index " +
                                             std::to_string(layers[i].index) + ", expected " +
                                             std::to_string(i) + " (indices must be contiguous)");
    }
  }
  (void)infer_shapes();
  if (!normalization_mean.empty() && normalization_mean.size() != input_shape[2]) {
    throw Error(ErrorKind::Validation, "normalization mean has " +
                                           std::to_string(normalization_mean.size()) +
                                           " entries, input has " + std::to_string(input_shape[2]) +
                                           " channels");
  }
}

NetworkSpec vgg_face_spec(VggScale scale) {
  if (scale.input_size == 0 || scale.input_size % 32 != 0) {
    throw Error(ErrorKind::InvalidArgument, "VGG input size must be a positive multiple of 32");
  }
  if (scale.width_divisor == 0 || 64 % scale.width_divisor != 0) {
    throw Error(ErrorKind::InvalidArgument, "VGG width divisor must divide 64");
  }
  const std::size_t k = scale.width_divisor;

  NetworkSpec spec;
  spec.input_shape = Shape{scale.input_size, scale.input_size, 3};
  // Release-specific means travel with converted weights; the bare
  // schedule carries none.
  spec.normalization_mean = {0.0f, 0.0f, 0.0f};

  auto add = [&](std::string name, auto params) {
    spec.layers.push_back(LayerSpec{spec.layers.size(), std::move(name), params});
  };
  add("input", InputParams{});

  struct Block {
    int stage;
    int convs;
    std::size_t channels;
  };
  constexpr std::array<Block, 5> blocks{{{1, 2, 64}, {2, 2, 128}, {3, 3, 256}, {4, 3, 512}, {5, 3, 512}}};
  std::size_t channels = 3;
  for (const Block& b : blocks) {
    for (int c = 1; c <= b.convs; ++c) {
      const std::string suffix = std::to_string(b.stage) + "_" + std::to_string(c);
      add("conv" + suffix, ConvParams{3, channels, b.channels / k, 1, 1});
      channels = b.channels / k;
      add("relu" + suffix, ActivationKind::relu());
    }
    add("pool" + std::to_string(b.stage), PoolParams{2, 2, 0});
  }
  const std::size_t fc = 4096 / k;
  add("fc6", ConvParams{scale.input_size / 32, channels, fc, 1, 0});
  add("relu6", ActivationKind::relu());
  add("fc7", ConvParams{1, fc, fc, 1, 0});
  add("relu7", ActivationKind::relu());
  return spec;
}

void WeightStore::set(std::size_t layer_index, Tensor weight, std::vector<float> bias) {
  if (weight.rank() != 4) {
    throw Error(ErrorKind::Weight, "conv weight for layer " + std::to_string(layer_index) +
                                       " must be 4-D (out,in,h,w), got " + weight.shape().to_string());
  }
  if (bias.size() != weight.dim(0)) {
    throw Error(ErrorKind::Weight, "bias for layer " + std::to_string(layer_index) + " has " +
                                       std::to_string(bias.size()) + " entries, expected " +
                                       std::to_string(weight.dim(0)));
  }
  entries_[layer_index] = ConvWeights{std::move(weight), std::move(bias)};
}

const ConvWeights* WeightStore::find(std::size_t layer_index) const {
  auto it = entries_.find(layer_index);
  return it == entries_.end() ? nullptr : &it->second;
}

const ConvWeights& WeightStore::at(std::size_t layer_index) const {
  if (const auto* w = find(layer_index)) return *w;
  throw Error(ErrorKind::Weight, "no weights for layer " + std::to_string(layer_index));
}

void WeightStore::validate_against(const NetworkSpec& spec) const {
  for (const LayerSpec& layer : spec.layers) {
    if (layer.type() != LayerType::Conv) continue;
    const ConvWeights* w = find(layer.index);
    if (!w) throw Error(ErrorKind::Weight, layer_label(layer) + ": missing weights");
    const ConvParams& p = layer.conv();
    const Shape expected{p.out_channels, p.in_channels, p.filter, p.filter};
    if (w->weight.shape() != expected) {
      throw Error(ErrorKind::Validation, layer_label(layer) + ": weight shape expected " +
                                             expected.to_string() + ", found " +
                                             w->weight.shape().to_string());
    }
    if (w->bias.size() != p.out_channels) {
      throw Error(ErrorKind::Validation, layer_label(layer) + ": bias length expected " +
                                             std::to_string(p.out_channels) + ", found " +
                                             std::to_string(w->bias.size()));
    }
  }
  for (const auto& [index, w] : entries_) {
    if (index >= spec.layers.size() || spec.layers[index].type() != LayerType::Conv) {
      throw Error(ErrorKind::Validation,
                  "weights present for layer " + std::to_string(index) + ", which is not a Conv layer");
    }
  }
}

WeightStore random_weights(const NetworkSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  WeightStore store;
  for (const LayerSpec& layer : spec.layers) {
    if (layer.type() != LayerType::Conv) continue;
    const ConvParams& p = layer.conv();
    const double fan_in = static_cast<double>(p.in_channels * p.filter * p.filter);
    std::normal_distribution<float> w_dist(0.0f, static_cast<float>(std::sqrt(2.0 / fan_in)));
    std::normal_distribution<float> b_dist(0.0f, 0.01f);
    Tensor w(Shape{p.out_channels, p.in_channels, p.filter, p.filter});
    for (float& v : w.values()) v = w_dist(rng);
    std::vector<float> b(p.out_channels);
    for (float& v : b) v = b_dist(rng);
    store.set(layer.index, std::move(w), std::move(b));
  }
  return store;
}

Tensor conv2d_forward(const Tensor& x, const Tensor& weight, std::span<const float> bias,
                      std::size_t stride, std::size_t pad, std::string_view layer) {
  const std::string label(layer);
  require_volume(x.shape(), label);
  if (weight.rank() != 4 || weight.dim(2) != weight.dim(3)) {
    throw Error(ErrorKind::Shape, label + ": weight must be (out,in,f,f), got " + weight.shape().to_string());
  }
  const std::size_t height = x.dim(0), width = x.dim(1), cin = x.dim(2);
  const std::size_t cout = weight.dim(0), f = weight.dim(2);
  if (weight.dim(1) != cin) {
    throw Error(ErrorKind::Shape, label + ": weight expects " + std::to_string(weight.dim(1)) +
                                      " input channels, input " + x.shape().to_string());
  }
  if (bias.size() != cout) {
    throw Error(ErrorKind::Shape, label + ": bias length " + std::to_string(bias.size()) +
                                      " != output channels " + std::to_string(cout));
  }
  if (stride == 0) throw Error(ErrorKind::Shape, label + ": stride must be >= 1");
  auto out_h = window_output_extent(height, f, stride, pad);
  auto out_w = window_output_extent(width, f, stride, pad);
  if (!out_h || !out_w) {
    throw Error(ErrorKind::Shape, label + ": filter " + std::to_string(f) + " does not fit input " +
                                      x.shape().to_string());
  }

  Tensor out(Shape{*out_h, *out_w, cout});
  // Patch laid out (ci, u, v) to match one contiguous row of the
  // (out, in, h, w) weight tensor.
  const std::size_t patch_len = cin * f * f;
  std::vector<float> patch(patch_len);
  const float* in = x.data();
  const float* w = weight.data();
  float* o = out.data();
  constexpr std::size_t kLanes = 8;

  for (std::size_t i = 0; i < *out_h; ++i) {
    for (std::size_t j = 0; j < *out_w; ++j) {
      for (std::size_t u = 0; u < f; ++u) {
        const std::ptrdiff_t row = static_cast<std::ptrdiff_t>(i * stride + u) - static_cast<std::ptrdiff_t>(pad);
        for (std::size_t v = 0; v < f; ++v) {
          const std::ptrdiff_t col = static_cast<std::ptrdiff_t>(j * stride + v) - static_cast<std::ptrdiff_t>(pad);
          const bool inside = row >= 0 && col >= 0 && row < static_cast<std::ptrdiff_t>(height) &&
                              col < static_cast<std::ptrdiff_t>(width);
          const float* src = inside ? in + (static_cast<std::size_t>(row) * width + static_cast<std::size_t>(col)) * cin
                                    : nullptr;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            patch[(ci * f + u) * f + v] = inside ? src[ci] : 0.0f;
          }
        }
      }
      float* dst = o + (i * *out_w + j) * cout;
      for (std::size_t oc = 0; oc < cout; ++oc) {
        const float* wr = w + oc * patch_len;
        std::array<double, kLanes> acc{};
        std::size_t k = 0;
        for (; k + kLanes <= patch_len; k += kLanes) {
          for (std::size_t l = 0; l < kLanes; ++l) {
            acc[l] += static_cast<double>(patch[k + l]) * static_cast<double>(wr[k + l]);
          }
        }
        double sum = 0.0;
        for (; k < patch_len; ++k) sum += static_cast<double>(patch[k]) * static_cast<double>(wr[k]);
        for (double a : acc) sum += a;
        dst[oc] = static_cast<float>(sum + static_cast<double>(bias[oc]));
      }
    }
  }
  return out;
}

Tensor maxpool_forward(const Tensor& x, std::size_t window, std::size_t stride, std::size_t pad,
                       std::string_view layer) {
  const std::string label(layer);
  require_volume(x.shape(), label);
  if (window == 0 || stride == 0) throw Error(ErrorKind::Shape, label + ": window and stride must be >= 1");
  if (pad >= window) throw Error(ErrorKind::Shape, label + ": padding must be smaller than the window");
  const std::size_t height = x.dim(0), width = x.dim(1), channels = x.dim(2);
  auto out_h = window_output_extent(height, window, stride, pad);
  auto out_w = window_output_extent(width, window, stride, pad);
  if (!out_h || !out_w) {
    throw Error(ErrorKind::Shape, label + ": window " + std::to_string(window) + " does not fit input " +
                                      x.shape().to_string());
  }
  Tensor out = Tensor::filled(Shape{*out_h, *out_w, channels}, -std::numeric_limits<float>::infinity());
  for (std::size_t i = 0; i < *out_h; ++i) {
    for (std::size_t j = 0; j < *out_w; ++j) {
      float* dst = out.data() + out.offset(i, j, 0);
      for (std::size_t u = 0; u < window; ++u) {
        const std::ptrdiff_t row = static_cast<std::ptrdiff_t>(i * stride + u) - static_cast<std::ptrdiff_t>(pad);
        if (row < 0 || row >= static_cast<std::ptrdiff_t>(height)) continue;
        for (std::size_t v = 0; v < window; ++v) {
          const std::ptrdiff_t col = static_cast<std::ptrdiff_t>(j * stride + v) - static_cast<std::ptrdiff_t>(pad);
          if (col < 0 || col >= static_cast<std::ptrdiff_t>(width)) continue;
          const float* src = x.data() + x.offset(static_cast<std::size_t>(row), static_cast<std::size_t>(col), 0);
          for (std::size_t c = 0; c < channels; ++c) dst[c] = std::max(dst[c], src[c]);
        }
      }
    }
  }
  // A window that only covered padding has no valid cell; that cannot
  // happen with pad < window, but keep the output finite regardless.
  for (float& v : out.values()) {
    if (std::isinf(v)) v = 0.0f;
  }
  return out;
}

Tensor forward(const NetworkSpec& spec, const WeightStore& weights, const Tensor& input,
               std::size_t tap, const ActivationOverrides& overrides) {
  const std::size_t taps[] = {tap};
  return std::move(forward_taps(spec, weights, input, taps, overrides).front());
}

std::vector<Tensor> forward_taps(const NetworkSpec& spec, const WeightStore& weights, const Tensor& input,
                                 std::span<const std::size_t> taps, const ActivationOverrides& overrides) {
  if (taps.empty()) return {};
  for (std::size_t tap : taps) {
    if (tap >= spec.layers.size()) {
      throw Error(ErrorKind::Config, "tap layer " + std::to_string(tap) + " out of range (last layer is " +
                                         std::to_string(spec.last_index()) + ")");
    }
  }
  for (const auto& [index, kind] : overrides) {
    const LayerSpec& layer = spec.layer(index);
    if (layer.type() != LayerType::Activation) {
      throw Error(ErrorKind::Config, "activation override on " + layer_label(layer) + ", which is a " +
                                         to_string(layer.type()) + " layer");
    }
  }
  if (input.shape() != spec.input_shape) {
    throw Error(ErrorKind::Shape, "input volume " + input.shape().to_string() + " does not match network input " +
                                      spec.input_shape.to_string());
  }

  std::vector<Tensor> outputs(taps.size());
  auto capture = [&](std::size_t layer_index, const Tensor& x) {
    for (std::size_t k = 0; k < taps.size(); ++k) {
      if (taps[k] == layer_index) outputs[k] = x;
    }
  };
  const std::size_t last = *std::max_element(taps.begin(), taps.end());

  Tensor x = input;
  capture(0, x);
  for (std::size_t i = 1; i <= last; ++i) {
    const LayerSpec& layer = spec.layers[i];
    switch (layer.type()) {
      case LayerType::Input:
        throw Error(ErrorKind::Validation, layer_label(layer) + ": unexpected Input layer");
      case LayerType::Conv: {
        const ConvParams& p = layer.conv();
        const ConvWeights* w = weights.find(i);
        if (!w) throw Error(ErrorKind::Weight, layer_label(layer) + ": missing weights");
        x = conv2d_forward(x, w->weight, w->bias, p.stride, p.pad, layer.name);
        break;
      }
      case LayerType::Pool: {
        const PoolParams& p = layer.pool();
        x = maxpool_forward(x, p.window, p.stride, p.pad, layer.name);
        break;
      }
      case LayerType::Activation: {
        auto it = overrides.find(i);
        const ActivationKind& kind = it != overrides.end() ? it->second : layer.activation();
        if (kind.is_ab_relu()) {
          ab_relu_inplace(x, kind.alpha());
        } else {
          relu_inplace(x);
        }
        break;
      }
    }
    capture(i, x);
  }
  return outputs;
}

}  // namespace faceret
