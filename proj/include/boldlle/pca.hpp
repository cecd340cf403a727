#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <functional>
#include <stdexcept>
#include <vector>

namespace boldlle {

enum class PcaRoute { automatic, svd, gram };

template <typename Scalar = double>
struct PcaModel {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean;                    // T
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> rotation;   // T x T, orthogonal
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> singular_values;        // T, non-increasing
};

/// Right singular vectors of the row-centred V x T matrix. The T x T Gram
/// route is used for tall inputs (V > 4T) unless a route is forced. Each
/// rotation column is signed so its largest-magnitude entry is positive.
template <typename Derived>
PcaModel<typename Derived::Scalar> pca_fit(const Eigen::MatrixBase<Derived>& x, PcaRoute route = PcaRoute::automatic) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index v = x.rows(), t = x.cols();
  if (v < 1 || t < 1) throw std::invalid_argument("pca_fit: empty matrix");

  PcaModel<Scalar> m;
  m.mean = x.colwise().mean().transpose();
  const Mat centred = x.rowwise() - m.mean.transpose();
  if (route == PcaRoute::automatic) route = v > 4 * t ? PcaRoute::gram : PcaRoute::svd;

  if (route == PcaRoute::gram) {
    const Mat gram = centred.transpose() * centred;
    Eigen::SelfAdjointEigenSolver<Mat> es(gram);
    m.singular_values = es.eigenvalues().reverse().cwiseMax(Scalar(0)).cwiseSqrt();
    m.rotation = es.eigenvectors().rowwise().reverse();
  } else {
    Eigen::BDCSVD<Mat> svd(centred, Eigen::ComputeFullV);
    m.rotation = svd.matrixV();
    m.singular_values = Vec::Zero(t);
    m.singular_values.head(svd.singularValues().size()) = svd.singularValues();
  }
  for (Eigen::Index c = 0; c < t; ++c) {
    Eigen::Index arg = 0;
    m.rotation.col(c).cwiseAbs().maxCoeff(&arg);
    if (m.rotation(arg, c) < 0) m.rotation.col(c) *= -1;
  }
  return m;
}

/// First d principal component scores, (X - 1 xbar^T) B_d.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> pca_scores(const Eigen::MatrixBase<Derived>& x,
                                                                                  const PcaModel<typename Derived::Scalar>& m,
                                                                                  Eigen::Index d) {
  if (d < 1 || d > m.rotation.cols()) throw std::invalid_argument("pca_scores: need 1 <= d <= T");
  return (x.rowwise() - m.mean.transpose()) * m.rotation.leftCols(d);
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> pca_reconstruct(
    const Eigen::MatrixBase<Derived>& x, Eigen::Index d, PcaRoute route = PcaRoute::automatic) {
  if (d < 1 || d > x.cols()) throw std::invalid_argument("pca_reconstruct: need 1 <= d <= T");
  return pca_scores(x, pca_fit(x, route), d);
}

/// Fraction of squared singular mass in the d largest values; 0 for an
/// all-zero spectrum.
template <typename Derived>
typename Derived::Scalar variance_explained(const Eigen::MatrixBase<Derived>& sigma, Eigen::Index d) {
  using Scalar = typename Derived::Scalar;
  std::vector<Scalar> s2(static_cast<std::size_t>(sigma.size()));
  for (Eigen::Index i = 0; i < sigma.size(); ++i) s2[static_cast<std::size_t>(i)] = sigma(i) * sigma(i);
  std::sort(s2.begin(), s2.end(), std::greater<>());
  Scalar total = 0, head = 0;
  for (std::size_t i = 0; i < s2.size(); ++i) {
    total += s2[i];
    if (static_cast<Eigen::Index>(i) < d) head += s2[i];
  }
  return total > Scalar(0) ? head / total : Scalar(0);
}

}  // namespace boldlle
