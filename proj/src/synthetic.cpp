#include "faceret/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "faceret/error.hpp"

namespace faceret {

ClusterFixture gaussian_clusters(std::size_t subjects, std::size_t per_subject, std::size_t dim,
                                 double separation, double sigma, std::uint64_t seed, double base) {
  if (dim < subjects) throw Error(ErrorKind::InvalidArgument, "gaussian_clusters needs dim >= subjects");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  const double offset = separation / std::sqrt(2.0);

  ClusterFixture fx;
  fx.descriptors = FeatureMatrix(subjects * per_subject, dim);
  std::size_t row = 0;
  for (std::size_t s = 0; s < subjects; ++s) {
    for (std::size_t k = 0; k < per_subject; ++k, ++row) {
      fx.subjects.push_back("subject" + std::to_string(s));
      auto v = fx.descriptors.row(row);
      for (std::size_t d = 0; d < dim; ++d) {
        const double center = base + (d == s ? offset : 0.0);
        v[d] = static_cast<float>(std::max(0.0, center + noise(rng)));
      }
    }
  }
  return fx;
}

Tensor random_tensor(const Shape& shape, std::uint64_t seed, float scale, float offset) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  Tensor t(shape);
  for (float& v : t.values()) v = offset + scale * dist(rng);
  return t;
}

}  // namespace faceret
