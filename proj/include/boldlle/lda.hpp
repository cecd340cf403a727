#pragma once

// Two-class Gaussian discriminant with a shared diagonal covariance.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace boldlle {

constexpr double kVarianceFloor = 1e-12;
constexpr double kTieGap = 1e-12;

/// Concatenate the selected mode volumes (ascending index), voxel-major within
/// each volume.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> flatten_volumes(const Eigen::MatrixBase<Derived>& modes,
                                                                          std::span<const Eigen::Index> volumes) {
  std::vector<Eigen::Index> sorted(volumes.begin(), volumes.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("flatten_volumes: duplicate volume index");
  const Eigen::Index v = modes.rows();
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> out(v * static_cast<Eigen::Index>(sorted.size()));
  for (std::size_t c = 0; c < sorted.size(); ++c) {
    if (sorted[c] < 0 || sorted[c] >= modes.cols())
      throw std::out_of_range("flatten_volumes: volume " + std::to_string(sorted[c]) + " outside [0, " +
                              std::to_string(modes.cols()) + ")");
    out.segment(static_cast<Eigen::Index>(c) * v, v) = modes.col(sorted[c]);
  }
  return out;
}

template <typename Scalar = double>
struct LdaModel {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean0, mean1;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> variance;  // pooled, floored
  Scalar prior0 = 0.5, prior1 = 0.5;

  Eigen::Index features() const { return variance.size(); }
};

class LdaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fit on an n x p sample matrix (one row per subject) with labels in {0,1}.
/// Pooled within-class variance uses denominator n - 2.
template <typename Derived>
LdaModel<typename Derived::Scalar> lda_fit(const Eigen::MatrixBase<Derived>& x, std::span<const int> labels) {
  using Scalar = typename Derived::Scalar;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index n = x.rows(), p = x.cols();
  if (static_cast<std::size_t>(n) != labels.size()) throw LdaError("lda_fit: label count does not match samples");
  if (n < 2) throw LdaError("lda_fit: need at least two samples");
  Vec sum0 = Vec::Zero(p), sum1 = Vec::Zero(p);
  Eigen::Index n0 = 0, n1 = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y == 0) {
      sum0 += x.row(i).transpose();
      ++n0;
    } else if (y == 1) {
      sum1 += x.row(i).transpose();
      ++n1;
    } else {
      throw LdaError("lda_fit: labels must be 0 or 1");
    }
  }
  if (n0 == 0 || n1 == 0) throw LdaError("lda_fit: both classes must be present");

  LdaModel<Scalar> m;
  m.mean0 = sum0 / Scalar(n0);
  m.mean1 = sum1 / Scalar(n1);
  Vec ss = Vec::Zero(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec& mu = labels[static_cast<std::size_t>(i)] == 0 ? m.mean0 : m.mean1;
    ss += (x.row(i).transpose() - mu).cwiseAbs2();
  }
  m.variance = (n > 2 ? Vec(ss / Scalar(n - 2)) : ss).cwiseMax(Scalar(kVarianceFloor));
  m.prior0 = Scalar(n0) / Scalar(n);
  m.prior1 = Scalar(n1) / Scalar(n);
  return m;
}

template <typename Scalar = double>
struct LdaPrediction {
  int label = 0;
  Scalar gap = 0;  // discriminant score of class 1 minus class 0
};

/// Class with the larger log prior - half Mahalanobis distance; |gap| below
/// 1e-12 resolves to class 0.
template <typename Scalar, typename Derived>
LdaPrediction<Scalar> lda_predict(const LdaModel<Scalar>& m, const Eigen::MatrixBase<Derived>& z) {
  if (z.size() != m.features()) throw LdaError("lda_predict: feature dimension mismatch");
  const auto inv = m.variance.cwiseInverse();
  const Scalar d0 = ((z.derived().array() - m.mean0.array()).square() * inv.array()).sum();
  const Scalar d1 = ((z.derived().array() - m.mean1.array()).square() * inv.array()).sum();
  LdaPrediction<Scalar> out;
  out.gap = (std::log(m.prior1) - Scalar(0.5) * d1) - (std::log(m.prior0) - Scalar(0.5) * d0);
  out.label = out.gap >= Scalar(kTieGap) ? 1 : 0;
  return out;
}

}  // namespace boldlle
