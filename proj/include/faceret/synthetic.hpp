#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "faceret/similarity.hpp"

namespace faceret {

struct ClusterFixture {
  std::vector<std::string> subjects;  // one label per row
  FeatureMatrix descriptors;
};

// `subjects` Gaussian clusters of `per_subject` points each. Cluster centers
// sit at `base` in every coordinate plus separation/sqrt(2) along the
// subject's own axis, so any two centers are exactly `separation` apart
// (Euclidean). Values are clamped at 0 to stay valid for chisq/d1.
// Requires dim >= subjects.
ClusterFixture gaussian_clusters(std::size_t subjects, std::size_t per_subject, std::size_t dim,
                                 double separation, double sigma, std::uint64_t seed, double base = 5.0);

// Seeded tensor with N(0,1) entries scaled by `scale`, shifted by `offset`.
Tensor random_tensor(const Shape& shape, std::uint64_t seed, float scale = 1.0f, float offset = 0.0f);

}  // namespace faceret
