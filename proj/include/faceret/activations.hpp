#pragma once

#include <string>
#include <string_view>

#include "faceret/tensor.hpp"

namespace faceret {

// Plain rectifier, or the average-biased rectifier with non-negative alpha.
class ActivationKind {
 public:
  enum class Type { ReLU, ABReLU };

  static ActivationKind relu() { return ActivationKind(Type::ReLU, 0.0f); }
  // Throws InvalidArgument for negative or non-finite alpha.
  static ActivationKind ab_relu(float alpha = 1.0f);

  Type type() const noexcept { return type_; }
  float alpha() const noexcept { return alpha_; }
  bool is_ab_relu() const noexcept { return type_ == Type::ABReLU; }

  // "relu" or "abrelu:<alpha>".
  std::string to_string() const;
  static ActivationKind parse(std::string_view text);

  friend bool operator==(const ActivationKind&, const ActivationKind&) = default;

 private:
  ActivationKind(Type type, float alpha) : type_(type), alpha_(alpha) {}

  Type type_;
  float alpha_;
};

// out = x if x > 0 else 0.
Tensor relu(const Tensor& x);

// Thresholds at beta = alpha * mean_volume(x), computed over the whole input
// volume: out = x - beta if x - beta > 0 else 0. alpha = 0 reproduces relu
// bit-for-bit.
Tensor ab_relu(const Tensor& x, float alpha);

Tensor apply_activation(const ActivationKind& kind, const Tensor& x);

// In-place variants used by the forward pass.
void relu_inplace(Tensor& x);
void ab_relu_inplace(Tensor& x, float alpha);

// Shortest round-trip decimal form ("2", "0.5").
std::string format_scalar(float value);

}  // namespace faceret
