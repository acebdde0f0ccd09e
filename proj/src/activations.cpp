#include "faceret/activations.hpp"

#include <charconv>
#include <cmath>

#include "faceret/error.hpp"

namespace faceret {

namespace {

void check_alpha(float alpha) {
  if (!std::isfinite(alpha) || alpha < 0.0f) {
    throw Error(ErrorKind::InvalidArgument,
                "AB-ReLU alpha must be finite and >= 0, got " + std::to_string(alpha));
  }
}

}  // namespace

std::string format_scalar(float value) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

ActivationKind ActivationKind::ab_relu(float alpha) {
  check_alpha(alpha);
  return ActivationKind(Type::ABReLU, alpha);
}

std::string ActivationKind::to_string() const {
  if (type_ == Type::ReLU) return "relu";
  return "abrelu:" + format_scalar(alpha_);
}

ActivationKind ActivationKind::parse(std::string_view text) {
  if (text == "relu") return relu();
  if (text == "abrelu") return ab_relu(1.0f);
  constexpr std::string_view prefix = "abrelu:";
  if (text.starts_with(prefix)) {
    auto digits = text.substr(prefix.size());
    float alpha = 0.0f;
    auto res = std::from_chars(digits.data(), digits.data() + digits.size(), alpha);
    if (res.ec == std::errc() && res.ptr == digits.data() + digits.size() && !digits.empty()) {
      if (!std::isfinite(alpha) || alpha < 0.0f) {
        throw Error(ErrorKind::Parse, "activation alpha must be finite and >= 0: " + std::string(text));
      }
      return ab_relu(alpha);
    }
  }
  throw Error(ErrorKind::Parse,
              "unknown activation \"" + std::string(text) + "\" (expected relu or abrelu:<alpha>)");
}

void relu_inplace(Tensor& x) {
  for (float& v : x.values()) v = v > 0.0f ? v : 0.0f;
}

void ab_relu_inplace(Tensor& x, float alpha) {
  check_alpha(alpha);
  const double beta = static_cast<double>(alpha) * static_cast<double>(mean_volume(x));
  for (float& v : x.values()) {
    const double shifted = static_cast<double>(v) - beta;
    v = shifted > 0.0 ? static_cast<float>(shifted) : 0.0f;
  }
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  relu_inplace(out);
  return out;
}

Tensor ab_relu(const Tensor& x, float alpha) {
  Tensor out = x;
  ab_relu_inplace(out, alpha);
  return out;
}

Tensor apply_activation(const ActivationKind& kind, const Tensor& x) {
  return kind.is_ab_relu() ? ab_relu(x, kind.alpha()) : relu(x);
}

}  // namespace faceret
