#pragma once

// Voxelwise two-sample t maps between patient and control cohorts.

#include "boldlle/grid.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace boldlle {

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 20000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  return h;
}

}  // namespace detail

/// Regularised incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (a <= 0 || b <= 0) throw std::domain_error("incomplete_beta: a and b must be positive");
  if (x <= 0) return 0.0;
  if (x >= 1) return 1.0;
  const double front =
      std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// P(|T| >= |t|) for Student's t with df degrees of freedom.
inline double student_t_two_sided(double t, double df) {
  if (std::isinf(t)) return 0.0;
  if (t == 0.0) return 1.0;
  return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

struct TTest {
  double t = 0;
  double p = 1;
  double df = 0;
  bool degenerate = false;  // zero variance with unequal means
};

enum class TTestVariant { pooled, welch };

/// Two-sample t test of mean(a) - mean(b).
template <typename DerivedA, typename DerivedB>
TTest voxel_ttest(const Eigen::DenseBase<DerivedA>& a, const Eigen::DenseBase<DerivedB>& b,
                  TTestVariant variant = TTestVariant::pooled) {
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("voxel_ttest: each group needs >= 2 values");
  const double ma = a.derived().template cast<double>().mean();
  const double mb = b.derived().template cast<double>().mean();
  const double ssa = (a.derived().template cast<double>().array() - ma).square().sum();
  const double ssb = (b.derived().template cast<double>().array() - mb).square().sum();
  const double scale = std::max(a.derived().template cast<double>().cwiseAbs().maxCoeff(),
                                b.derived().template cast<double>().cwiseAbs().maxCoeff());
  const double eps = std::numeric_limits<double>::epsilon();
  const double var_floor = (eps * scale) * (eps * scale) * (na + nb);

  TTest r;
  double se2 = 0;
  if (variant == TTestVariant::pooled) {
    r.df = na + nb - 2.0;
    se2 = (ssa + ssb) / r.df * (1.0 / na + 1.0 / nb);
  } else {
    const double va = ssa / (na - 1.0) / na, vb = ssb / (nb - 1.0) / nb;
    se2 = va + vb;
    r.df = se2 > 0 ? se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0)) : na + nb - 2.0;
  }
  const double diff = ma - mb;
  if (ssa + ssb <= var_floor) {
    if (std::abs(diff) <= eps * scale * 4.0) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = std::copysign(std::numeric_limits<double>::infinity(), diff);
      r.p = 0.0;
      r.degenerate = true;
    }
    return r;
  }
  r.t = diff / std::sqrt(se2);
  r.p = student_t_two_sided(r.t, r.df);
  return r;
}

struct StatMap {
  GridDims dims;  // spatial extent; T unused
  Eigen::VectorXd t;
  Eigen::VectorXd p;
  std::vector<std::uint8_t> degenerate;
  Eigen::Index volume = 0;
  Eigen::Index n1 = 0;  // patients
  Eigen::Index n0 = 0;  // controls
};

/// t map at one volume: patients (group 1) minus controls (group 0). Each
/// subject contributes a V x d mode matrix.
inline StatMap build_map(const GridDims& dims, std::span<const Eigen::MatrixXd> patients,
                         std::span<const Eigen::MatrixXd> controls, Eigen::Index volume,
                         TTestVariant variant = TTestVariant::pooled) {
  const Eigen::Index v = dims.voxels();
  auto check = [&](const Eigen::MatrixXd& m) {
    if (m.rows() != v) throw std::invalid_argument("build_map: subject grid does not match map dims");
    if (volume < 0 || volume >= m.cols()) throw std::out_of_range("build_map: volume index out of range");
  };
  for (const auto& m : patients) check(m);
  for (const auto& m : controls) check(m);

  StatMap map;
  map.dims = dims;
  map.volume = volume;
  map.n1 = static_cast<Eigen::Index>(patients.size());
  map.n0 = static_cast<Eigen::Index>(controls.size());
  map.t.resize(v);
  map.p.resize(v);
  map.degenerate.assign(static_cast<std::size_t>(v), 0);
  Eigen::VectorXd a(map.n1), b(map.n0);
  for (Eigen::Index i = 0; i < v; ++i) {
    for (Eigen::Index s = 0; s < map.n1; ++s) a(s) = patients[static_cast<std::size_t>(s)](i, volume);
    for (Eigen::Index s = 0; s < map.n0; ++s) b(s) = controls[static_cast<std::size_t>(s)](i, volume);
    const TTest r = voxel_ttest(a, b, variant);
    map.t(i) = r.t;
    map.p(i) = r.p;
    map.degenerate[static_cast<std::size_t>(i)] = r.degenerate ? 1 : 0;
  }
  return map;
}

struct SignificanceMask {
  std::vector<std::uint8_t> mask;
  Eigen::Index count = 0;
};

/// mask_v = p_v < alpha (uncorrected); alpha = 1 selects every voxel.
inline SignificanceMask threshold_map(const StatMap& map, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("threshold_map: alpha must lie in (0, 1]");
  SignificanceMask m;
  m.mask.resize(static_cast<std::size_t>(map.p.size()));
  for (Eigen::Index i = 0; i < map.p.size(); ++i) {
    const bool sig = alpha >= 1.0 || map.p(i) < alpha;
    m.mask[static_cast<std::size_t>(i)] = sig ? 1 : 0;
    m.count += sig ? 1 : 0;
  }
  return m;
}

}  // namespace boldlle
