#include "faceret/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "faceret/error.hpp"

namespace faceret {

std::string_view to_string(DistanceKind kind) {
  switch (kind) {
    case DistanceKind::Euclidean: return "euclidean";
    case DistanceKind::Cosine: return "cosine";
    case DistanceKind::L1: return "l1";
    case DistanceKind::D1: return "d1";
    case DistanceKind::ChiSquare: return "chisq";
  }
  return "?";
}

DistanceKind parse_distance(std::string_view name) {
  for (DistanceKind k : kAllDistances) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorKind::Parse,
              "unknown distance \"" + std::string(name) + "\" (expected euclidean, cosine, l1, d1, chisq)");
}

namespace {

void require_non_negative(std::span<const float> v, DistanceKind kind) {
  for (float f : v) {
    if (f < 0.0f) {
      throw Error(ErrorKind::Domain, std::string(to_string(kind)) + " distance needs non-negative components, got " +
                                         std::to_string(f));
    }
  }
}

// Four interleaved double accumulators; the summation order is fixed, so
// results do not depend on how callers are scheduled.
template <typename Term>
double accumulate(std::size_t n, Term term) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc[0] += term(i);
    acc[1] += term(i + 1);
    acc[2] += term(i + 2);
    acc[3] += term(i + 3);
  }
  for (; i < n; ++i) acc[0] += term(i);
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

}  // namespace

double distance(DistanceKind kind, std::span<const float> x, std::span<const float> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorKind::Shape, "distance between vectors of length " + std::to_string(x.size()) + " and " +
                                      std::to_string(y.size()));
  }
  if (x.empty()) throw Error(ErrorKind::Shape, "distance between empty vectors");
  const std::size_t n = x.size();
  const float* a = x.data();
  const float* b = y.data();

  switch (kind) {
    case DistanceKind::Euclidean:
      return std::sqrt(accumulate(n, [&](std::size_t i) {
        const double d = static_cast<double>(a[i]) - b[i];
        return d * d;
      }));
    case DistanceKind::L1:
      return accumulate(n, [&](std::size_t i) { return std::abs(static_cast<double>(a[i]) - b[i]); });
    case DistanceKind::Cosine: {
      const double dot = accumulate(n, [&](std::size_t i) { return static_cast<double>(a[i]) * b[i]; });
      const double nx = accumulate(n, [&](std::size_t i) { return static_cast<double>(a[i]) * a[i]; });
      const double ny = accumulate(n, [&](std::size_t i) { return static_cast<double>(b[i]) * b[i]; });
      if (nx == 0.0 || ny == 0.0) return 1.0;
      return std::clamp(1.0 - dot / (std::sqrt(nx) * std::sqrt(ny)), 0.0, 2.0);
    }
    case DistanceKind::D1:
      require_non_negative(x, kind);
      require_non_negative(y, kind);
      return accumulate(n, [&](std::size_t i) {
        const double xi = a[i], yi = b[i];
        return std::abs(xi - yi) / (1.0 + (xi + yi));
      });
    case DistanceKind::ChiSquare:
      require_non_negative(x, kind);
      require_non_negative(y, kind);
      return accumulate(n, [&](std::size_t i) {
        const double xi = a[i], yi = b[i];
        const double s = xi + yi;
        if (s <= 0.0) return 0.0;
        const double d = xi - yi;
        return d * d / s;
      });
  }
  throw Error(ErrorKind::Internal, "unhandled distance kind");
}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw Error(ErrorKind::Shape, "feature matrix data length " + std::to_string(data_.size()) + " != " +
                                      std::to_string(rows) + "x" + std::to_string(cols));
  }
}

FeatureMatrix FeatureMatrix::from_descriptors(std::span<const Descriptor> descriptors) {
  if (descriptors.empty()) return {};
  const std::size_t cols = descriptors.front().values.size();
  FeatureMatrix m(descriptors.size(), cols);
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    const auto v = descriptors[i].values.values();
    if (v.size() != cols) {
      throw Error(ErrorKind::Shape, "descriptor " + std::to_string(i) + " has length " + std::to_string(v.size()) +
                                        ", expected " + std::to_string(cols));
    }
    std::copy(v.begin(), v.end(), m.row(i).begin());
  }
  return m;
}

FeatureMatrix FeatureMatrix::from_tensor(const Tensor& t) {
  if (t.rank() != 2) {
    throw Error(ErrorKind::Shape, "descriptor matrix must be 2-D (rows, dim), got " + t.shape().to_string());
  }
  const auto v = t.values();
  return FeatureMatrix(t.dim(0), t.dim(1), std::vector<float>(v.begin(), v.end()));
}

Tensor FeatureMatrix::to_tensor() const {
  if (rows_ == 0 || cols_ == 0) throw Error(ErrorKind::InvalidArgument, "empty feature matrix");
  return Tensor(Shape{rows_, cols_}, data_);
}

std::vector<std::size_t> rank_gallery(DistanceKind kind, std::span<const float> probe,
                                      const FeatureMatrix& gallery) {
  if (gallery.rows() == 0) throw Error(ErrorKind::InvalidArgument, "rank_gallery: empty gallery");
  std::vector<double> dist(gallery.rows());
  for (std::size_t i = 0; i < gallery.rows(); ++i) dist[i] = distance(kind, probe, gallery.row(i));
  std::vector<std::size_t> order(gallery.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return dist[l] < dist[r]; });
  return order;
}

std::vector<std::size_t> rank_gallery(DistanceKind kind, const Descriptor& probe,
                                      std::span<const Descriptor> gallery) {
  if (gallery.empty()) throw Error(ErrorKind::InvalidArgument, "rank_gallery: empty gallery");
  return rank_gallery(kind, probe.values.values(), FeatureMatrix::from_descriptors(gallery));
}

}  // namespace faceret
