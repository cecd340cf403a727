#pragma once

// Bottom eigenpairs of a sparse symmetric positive semidefinite matrix.
//
// Thick-restart (Krylov-Schur) Lanczos with full reorthogonalisation, run on
// the shift-inverted operator (A + tau*I)^-1 so that the wanted end of the
// spectrum becomes the dominant one. Convergence is judged on the original
// matrix: ||A x - rho x|| <= tolerance * ||A||_inf for every wanted pair.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace boldlle {

struct SymEigsOptions {
  double tolerance = 1e-8;
  int max_restarts = 500;
  Eigen::Index krylov_dim = 0;  // 0: max(2*nev+1, nev+20), capped at n
  double shift_scale = 1e-8;    // tau = shift_scale * ||A||_inf
  std::uint64_t seed = 0x9e3779b97f4a7c15ull;
};

template <typename Scalar>
struct SymEigsResult {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> eigenvalues;  // ascending
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> eigenvectors;
  Scalar max_residual = 0;
  int restarts = 0;
};

class EigensolverError : public std::runtime_error {
 public:
  EigensolverError(const std::string& what, double residual)
      : std::runtime_error(what + " (residual norm " + std::to_string(residual) + ")"), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> deterministic_vector(Eigen::Index n, std::uint64_t& state) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
    v(i) = static_cast<Scalar>(2.0 * u - 1.0);
  }
  return v;
}

template <typename Scalar>
Scalar inf_norm(const Eigen::SparseMatrix<Scalar>& a) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rows = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(a.rows());
  for (Eigen::Index k = 0; k < a.outerSize(); ++k)
    for (typename Eigen::SparseMatrix<Scalar>::InnerIterator it(a, k); it; ++it) rows(it.row()) += std::abs(it.value());
  return rows.size() ? rows.maxCoeff() : Scalar(0);
}

// Orthogonalise w against the first `cols` columns of q (two passes of
// classical Gram-Schmidt). Returns accumulated projection coefficients.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> reorthogonalize(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& q,
                                                         Eigen::Index cols, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& w) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> h = q.leftCols(cols).transpose() * w;
  w.noalias() -= q.leftCols(cols) * h;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> h2 = q.leftCols(cols).transpose() * w;
  w.noalias() -= q.leftCols(cols) * h2;
  return h + h2;
}

}  // namespace detail

/// The `nev` algebraically smallest eigenpairs of the symmetric PSD matrix
/// `a` (only the full symmetric storage is read). Throws EigensolverError if
/// the residual target is not met within the restart budget.
template <typename Scalar>
SymEigsResult<Scalar> smallest_eigenpairs(const Eigen::SparseMatrix<Scalar>& a, Eigen::Index nev,
                                          const SymEigsOptions& opt = {}) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Index = Eigen::Index;

  const Index n = a.rows();
  if (a.cols() != n) throw std::invalid_argument("smallest_eigenpairs: matrix must be square");
  if (nev < 1 || nev > n) throw std::invalid_argument("smallest_eigenpairs: need 1 <= nev <= n");

  SymEigsResult<Scalar> out;
  const Scalar norm = detail::inf_norm(a);
  if (norm == Scalar(0)) {
    out.eigenvalues = Vec::Zero(nev);
    out.eigenvectors = Mat::Identity(n, nev);
    return out;
  }

  const Scalar tau = static_cast<Scalar>(opt.shift_scale) * norm;
  Eigen::SparseMatrix<Scalar> shifted = a;
  {
    Eigen::SparseMatrix<Scalar> id(n, n);
    id.setIdentity();
    shifted += tau * id;
  }
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<Scalar>> ldlt(shifted);
  if (ldlt.info() != Eigen::Success) throw EigensolverError("shift-invert factorisation failed", 0.0);

  Index m = opt.krylov_dim > 0 ? opt.krylov_dim : std::max<Index>(2 * nev + 1, nev + 20);
  m = std::clamp<Index>(m, nev, n);
  const Scalar target = static_cast<Scalar>(opt.tolerance) * norm;

  std::uint64_t rng = opt.seed;
  Mat q = Mat::Zero(n, m + 1);
  Mat h = Mat::Zero(m, m);
  {
    Vec v0 = detail::deterministic_vector<Scalar>(n, rng);
    q.col(0) = v0.normalized();
  }

  Index kept = 0;
  Scalar worst = 0;
  for (int restart = 0;; ++restart) {
    Scalar beta_m = 0;
    for (Index j = kept; j < m; ++j) {
      Vec w = ldlt.solve(q.col(j));
      const Scalar w_norm = w.norm();
      Vec coeff = detail::reorthogonalize<Scalar>(q, j + 1, w);
      h.col(j).head(j + 1) = coeff;
      h.row(j).head(j + 1) = coeff.transpose();
      Scalar beta = w.norm();
      bool breakdown = beta <= Scalar(1e-12) * std::max(w_norm, Scalar(1));
      if (breakdown) {
        // invariant subspace: continue from a fresh direction, coupling zero
        beta = 0;
        if (j + 1 < n) {
          for (int attempt = 0; attempt < 4; ++attempt) {
            w = detail::deterministic_vector<Scalar>(n, rng);
            detail::reorthogonalize<Scalar>(q, j + 1, w);
            if (w.norm() > Scalar(1e-8)) break;
          }
        }
      }
      if (j + 1 < m) {
        h(j + 1, j) = beta;
        h(j, j + 1) = beta;
        q.col(j + 1) = breakdown ? Vec(w.normalized()) : Vec(w / beta);
      } else {
        beta_m = beta;
        if (!breakdown) q.col(m) = w / beta;
        else q.col(m).setZero();
      }
    }

    Eigen::SelfAdjointEigenSolver<Mat> small(h);
    if (small.info() != Eigen::Success) throw EigensolverError("projected eigenproblem failed", 0.0);
    const Vec& theta = small.eigenvalues();  // ascending; wanted are the largest
    const Mat& y = small.eigenvectors();

    // Ritz pairs for the wanted nev, mapped back to A and checked there.
    Mat x(n, nev);
    Vec rho(nev);
    worst = 0;
    for (Index k = 0; k < nev; ++k) {
      const Index col = m - 1 - k;
      x.col(k) = q.leftCols(m) * y.col(col);
      x.col(k).normalize();
      Vec ax = a * x.col(k);
      rho(k) = x.col(k).dot(ax);
      worst = std::max(worst, (ax - rho(k) * x.col(k)).norm());
    }

    if (worst <= target || m == n) {
      if (worst > target) throw EigensolverError("full Krylov space did not reach tolerance", double(worst));
      std::vector<Index> order(static_cast<std::size_t>(nev));
      for (Index k = 0; k < nev; ++k) order[static_cast<std::size_t>(k)] = k;
      std::stable_sort(order.begin(), order.end(), [&](Index l, Index r) { return rho(l) < rho(r); });
      out.eigenvalues.resize(nev);
      out.eigenvectors.resize(n, nev);
      for (Index k = 0; k < nev; ++k) {
        out.eigenvalues(k) = rho(order[static_cast<std::size_t>(k)]);
        out.eigenvectors.col(k) = x.col(order[static_cast<std::size_t>(k)]);
      }
      out.max_residual = worst;
      out.restarts = restart;
      return out;
    }
    if (restart >= opt.max_restarts) {
      throw EigensolverError("eigensolver did not converge after " + std::to_string(restart) + " restarts",
                             double(worst));
    }

    // Thick restart: keep the best Ritz vectors plus the residual direction.
    const Index keep = std::min<Index>(m - 1, nev + (m - nev) / 2);
    Mat basis = q.leftCols(m) * y.rightCols(keep).rowwise().reverse();
    Vec tail = q.col(m);
    q.leftCols(keep) = basis;
    q.col(keep) = tail;
    h.setZero();
    for (Index k = 0; k < keep; ++k) {
      const Index col = m - 1 - k;
      h(k, k) = theta(col);
      const Scalar coupling = beta_m * y(m - 1, col);
      h(keep, k) = coupling;
      h(k, keep) = coupling;
    }
    kept = keep;
    if (beta_m == Scalar(0)) {
      Vec w = detail::deterministic_vector<Scalar>(n, rng);
      detail::reorthogonalize<Scalar>(q, keep, w);
      q.col(keep) = w.normalized();
    }
  }
}

}  // namespace boldlle
