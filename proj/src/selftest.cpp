#include "faceret/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "faceret/activations.hpp"
#include "faceret/evaluation.hpp"
#include "faceret/network.hpp"
#include "faceret/similarity.hpp"
#include "faceret/synthetic.hpp"

namespace faceret {

namespace {

using Rng = std::mt19937_64;

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Tensor random_volume(Rng& rng, std::size_t max_hw, std::size_t max_c) {
  const Shape shape{pick(rng, 1, max_hw), pick(rng, 1, max_hw), pick(rng, 1, max_c)};
  const float offset = std::uniform_real_distribution<float>(-2.0f, 2.0f)(rng);
  return random_tensor(shape, rng(), 1.0f, offset);
}

float max_abs(const Tensor& t) {
  float m = 0.0f;
  for (float v : t.values()) m = std::max(m, std::abs(v));
  return m;
}

class Suite {
 public:
  explicit Suite(std::vector<CheckResult>& out) : out_(out) {}

  template <typename Fn>
  void check(const std::string& name, Fn&& fn) {
    CheckResult r{name, true, {}};
    try {
      std::string failure = fn();
      if (!failure.empty()) {
        r.passed = false;
        r.detail = std::move(failure);
      }
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("threw: ") + e.what();
    }
    out_.push_back(std::move(r));
  }

 private:
  std::vector<CheckResult>& out_;
};

// Straight nested loops over the (out, in, h, w) weight layout.
Tensor conv_oracle(const Tensor& x, const Tensor& w, const std::vector<float>& b, std::size_t s, std::size_t p) {
  const std::size_t h = x.dim(0), wd = x.dim(1), ci = x.dim(2), co = w.dim(0), f = w.dim(2);
  const std::size_t oh = (h + 2 * p - f) / s + 1, ow = (wd + 2 * p - f) / s + 1;
  Tensor out(Shape{oh, ow, co});
  for (std::size_t i = 0; i < oh; ++i)
    for (std::size_t j = 0; j < ow; ++j)
      for (std::size_t o = 0; o < co; ++o) {
        double acc = b[o];
        for (std::size_t c = 0; c < ci; ++c)
          for (std::size_t u = 0; u < f; ++u)
            for (std::size_t v = 0; v < f; ++v) {
              const long r = static_cast<long>(i * s + u) - static_cast<long>(p);
              const long q = static_cast<long>(j * s + v) - static_cast<long>(p);
              if (r < 0 || q < 0 || r >= static_cast<long>(h) || q >= static_cast<long>(wd)) continue;
              acc += static_cast<double>(x[(static_cast<std::size_t>(r) * wd + static_cast<std::size_t>(q)) * ci + c]) *
                     w[((o * ci + c) * f + u) * f + v];
            }
        out[(i * ow + j) * co + o] = static_cast<float>(acc);
      }
  return out;
}

}  // namespace

std::vector<CheckResult> run_selftest(const SelfTestOptions& options) {
  const auto abrelu = options.ab_relu_impl ? options.ab_relu_impl
                                           : std::function<Tensor(const Tensor&, float)>(
                                                 [](const Tensor& x, float a) { return ab_relu(x, a); });
  std::vector<CheckResult> results;
  Suite suite(results);

  suite.check("relu-idempotence", [&]() -> std::string {
    Rng rng(11);
    for (int n = 0; n < 100; ++n) {
      const Tensor x = random_volume(rng, 6, 8);
      const Tensor once = relu(x);
      if (relu(once) != once) return "relu(relu(x)) != relu(x)";
      for (float v : once.values())
        if (v < 0.0f) return "negative relu output";
    }
    return {};
  });

  suite.check("abrelu-alpha0-collapse", [&]() -> std::string {
    Rng rng(12);
    for (int n = 0; n < 200; ++n) {
      const Tensor x = random_volume(rng, 8, 16);
      if (abrelu(x, 0.0f) != relu(x)) return "ab_relu(x, 0) differs from relu(x) at case " + std::to_string(n);
    }
    return {};
  });

  suite.check("abrelu-hand-values", [&]() -> std::string {
    const Tensor a = abrelu(Tensor(Shape{3}, {1.0f, -1.0f, 2.0f}), 1.0f);
    const float want_a[] = {1.0f / 3.0f, 0.0f, 4.0f / 3.0f};
    for (int i = 0; i < 3; ++i)
      if (std::abs(a[i] - want_a[i]) > 1e-6f) return "[1,-1,2], alpha 1";
    const Tensor b = abrelu(Tensor(Shape{2}, {-2.0f, -4.0f}), 1.0f);
    if (std::abs(b[0] - 1.0f) > 1e-6f || b[1] != 0.0f) return "[-2,-4], alpha 1";
    return {};
  });

  suite.check("abrelu-shift-invariance", [&]() -> std::string {
    Rng rng(13);
    for (int n = 0; n < 100; ++n) {
      const Tensor x = random_volume(rng, 6, 8);
      for (float c : {-10.0f, -0.1f, 0.1f, 10.0f}) {
        const Tensor shifted = map_values(x, [c](float v) { return v + c; });
        const Tensor l = abrelu(shifted, 1.0f), r = abrelu(x, 1.0f);
        for (std::size_t i = 0; i < l.size(); ++i)
          if (std::abs(l[i] - r[i]) > 1e-5f) return "shift by " + std::to_string(c) + " changed the output";
      }
    }
    return {};
  });

  suite.check("abrelu-scale-equivariance", [&]() -> std::string {
    Rng rng(14);
    for (int n = 0; n < 100; ++n) {
      const Tensor x = random_volume(rng, 6, 8);
      for (float s : {0.5f, 3.0f})
        for (float alpha : {1.0f, 2.0f, 5.0f}) {
          const Tensor l = abrelu(map_values(x, [s](float v) { return s * v; }), alpha);
          const Tensor r = map_values(abrelu(x, alpha), [s](float v) { return s * v; });
          const float tol = 1e-5f * std::max(1.0f, max_abs(r));
          for (std::size_t i = 0; i < l.size(); ++i)
            if (std::abs(l[i] - r[i]) > tol) return "scale " + std::to_string(s) + " broke equivariance";
        }
    }
    return {};
  });

  suite.check("abrelu-support-relations", [&]() -> std::string {
    Rng rng(15);
    for (int n = 0; n < 200; ++n) {
      const Tensor x = random_volume(rng, 6, 8);
      const float mean = mean_volume(x);
      const Tensor r = relu(x), a = abrelu(x, 1.0f);
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (mean <= 0.0f && r[i] != 0.0f && a[i] == 0.0f) return "mean <= 0 but ab_relu dropped a relu-active cell";
        if (mean >= 0.0f && a[i] != 0.0f && r[i] == 0.0f) return "mean >= 0 but ab_relu passed a relu-inactive cell";
      }
    }
    return {};
  });

  suite.check("conv-oracle", [&]() -> std::string {
    Rng rng(16);
    for (int n = 0; n < 60; ++n) {
      const Tensor x = random_volume(rng, 8, 4);
      const std::size_t pad = pick(rng, 0, 2), stride = pick(rng, 1, 3);
      const std::size_t f = pick(rng, 1, std::min(x.dim(0), x.dim(1)) + 2 * pad);
      const std::size_t cout = pick(rng, 1, 4);
      const Tensor w = random_tensor(Shape{cout, x.dim(2), f, f}, rng());
      const Tensor bt = random_tensor(Shape{cout}, rng());
      const std::vector<float> b(bt.values().begin(), bt.values().end());
      const Tensor got = conv2d_forward(x, w, b, stride, pad);
      const Tensor want = conv_oracle(x, w, b, stride, pad);
      if (got.shape() != want.shape()) return "shape mismatch";
      for (std::size_t i = 0; i < got.size(); ++i)
        if (std::abs(got[i] - want[i]) > 1e-5f) return "value mismatch at case " + std::to_string(n);
    }
    return {};
  });

  suite.check("maxpool-oracle", [&]() -> std::string {
    Rng rng(17);
    for (int n = 0; n < 60; ++n) {
      const Tensor x = random_volume(rng, 8, 4);
      const std::size_t window = pick(rng, 1, std::min<std::size_t>(3, std::min(x.dim(0), x.dim(1))));
      const std::size_t stride = pick(rng, 1, 3);
      const Tensor got = maxpool_forward(x, window, stride, 0);
      const std::size_t oh = (x.dim(0) - window) / stride + 1, ow = (x.dim(1) - window) / stride + 1;
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j)
          for (std::size_t c = 0; c < x.dim(2); ++c) {
            float m = -INFINITY;
            for (std::size_t u = 0; u < window; ++u)
              for (std::size_t v = 0; v < window; ++v) m = std::max(m, x[x.offset(i * stride + u, j * stride + v, c)]);
            if (got[got.offset(i, j, c)] != m) return "value mismatch at case " + std::to_string(n);
          }
    }
    return {};
  });

  suite.check("vgg-shape-chain", [&]() -> std::string {
    struct Volume {
      std::size_t side, depth;
    };
    // Volume sizes of the 36-row face network layer table.
    const std::vector<Volume> table{
        {224, 3},   {224, 64},  {224, 64},  {224, 64},  {224, 64},  {112, 64},  {112, 128}, {112, 128}, {112, 128},
        {112, 128}, {56, 128},  {56, 256},  {56, 256},  {56, 256},  {56, 256},  {56, 256},  {56, 256},  {28, 256},
        {28, 512},  {28, 512},  {28, 512},  {28, 512},  {28, 512},  {28, 512},  {14, 512},  {14, 512},  {14, 512},
        {14, 512},  {14, 512},  {14, 512},  {14, 512},  {7, 512},   {1, 4096},  {1, 4096},  {1, 4096},  {1, 4096}};
    const auto shapes = vgg_face_spec().infer_shapes();
    if (shapes.size() != table.size()) return "expected 36 layers";
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (shapes[i] != Shape{table[i].side, table[i].side, table[i].depth}) {
        return "layer " + std::to_string(i) + " volume " + shapes[i].to_string();
      }
    }
    return {};
  });

  suite.check("forward-determinism", [&]() -> std::string {
    const NetworkSpec spec = vgg_face_spec({32, 16});
    const WeightStore w = random_weights(spec, 5);
    const Tensor img = random_tensor(spec.input_shape, 6, 50.0f);
    const ActivationOverrides ov{{35, ActivationKind::ab_relu(1.0f)}};
    if (forward(spec, w, img, 35, ov) != forward(spec, w, img, 35, ov)) return "two passes differ";
    return {};
  });

  suite.check("distance-axioms", [&]() -> std::string {
    Rng rng(18);
    std::uniform_real_distribution<float> u(0.0f, 3.0f);
    for (int n = 0; n < 200; ++n) {
      std::vector<float> x(pick(rng, 1, 32)), y(x.size());
      for (auto& v : x) v = u(rng);
      for (auto& v : y) v = u(rng);
      for (DistanceKind k : kAllDistances) {
        const double xy = distance(k, x, y), yx = distance(k, y, x);
        if (xy < 0.0) return std::string(to_string(k)) + " negative";
        if (std::abs(xy - yx) > 1e-6 * std::max(1.0, std::abs(xy))) return std::string(to_string(k)) + " asymmetric";
        const double self = distance(k, x, x);
        if (k == DistanceKind::Cosine ? self > 1e-6 : self != 0.0) return std::string(to_string(k)) + " d(x,x) != 0";
      }
    }
    const std::vector<float> a{1, 0}, b{0, 1}, c{1, 2}, d{3, 5};
    if (std::abs(distance(DistanceKind::ChiSquare, a, b) - 2.0) > 1e-9) return "chisq([1,0],[0,1]) != 2";
    if (std::abs(distance(DistanceKind::D1, c, d) - 0.775) > 1e-9) return "d1([1,2],[3,5]) != 0.775";
    return {};
  });

  suite.check("anmrr-anchors", [&]() -> std::string {
    const AnmrrQuery perfect{{1, 2, 3}, 3};
    const AnmrrQuery miss{{}, 3};
    if (anmrr(std::vector{perfect, perfect}) != 0.0) return "perfect retrieval is not 0";
    if (anmrr(std::vector{miss, miss}) != 1.0) return "total miss is not 1";
    const AnmrrQuery fixture{{1, 3}, 2};
    if (std::abs(anmrr(std::vector{fixture}, {std::nullopt, 2}) - 0.5 / 3.5) > 1e-9) return "NG=2 fixture";
    return {};
  });

  suite.check("synthetic-retrieval", [&]() -> std::string {
    const ClusterFixture fx = gaussian_clusters(4, 8, 8, 10.0, 0.1, 2024);
    ExperimentOptions opt;
    opt.cutoffs = {1, 7};
    opt.window = AnmrrWindow{AnmrrWindow::Mode::Fixed, 10};
    const MetricsReport r = run_experiment(fx.subjects, fx.descriptors, opt);
    if (r.rows[0].arp != 1.0) return "ARP@1 != 1";
    if (r.rows[1].arp != 1.0) return "ARP@7 != 1";
    if (r.rows[1].arr != 1.0) return "ARR@7 != 1";
    if (r.rows[0].anmrr != 0.0) return "ANMRR != 0";
    return {};
  });

  return results;
}

}  // namespace faceret
