#pragma once

// Spatially constrained (Modified) Locally Linear Embedding of a voxel grid.
//
// Each voxel is reconstructed from its cube neighborhood; the reconstruction
// weights are aligned into a sparse PSD matrix whose bottom eigenvectors,
// minus the constant one, are the embedded spatial modes.

#include "boldlle/grid.hpp"
#include "boldlle/sym_eigs.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace boldlle {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

enum class MlleBasis {
  smallest,  // eigenvectors of the s_i smallest Gram eigenvalues (reference MLLE)
  largest,   // literal "first s_i columns" of the descending ordering
};

enum class AlphaNorm {
  norm,          // ||V^T 1|| / sqrt(s); keeps every weight vector summing to 1
  squared_norm,  // ||V^T 1||^2 / sqrt(s)
};

struct LleOptions {
  double xi = 0.0;
  MlleBasis basis = MlleBasis::smallest;
  AlphaNorm alpha = AlphaNorm::norm;
  bool unit_dimension_s = false;  // choose s_i (and eta) as if d == 1
  double pinv_rcond = 1e-10;      // relative cutoff for the Gram pseudo-inverse
  double constant_correlation = 0.99;
  SymEigsOptions eigs;
};

/// C_i: column j is x_{N(i)[j]} - x_i.
template <typename Derived>
Matrix<typename Derived::Scalar> center_neighbors(const Eigen::MatrixBase<Derived>& samples, Index i,
                                                  std::span<const Index> neighbors) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> c(samples.cols(), static_cast<Index>(neighbors.size()));
  for (std::size_t j = 0; j < neighbors.size(); ++j)
    c.col(static_cast<Index>(j)) = (samples.row(neighbors[j]) - samples.row(i)).transpose();
  return c;
}

/// G_i = C_i^T C_i + xi I.
template <typename Derived>
Matrix<typename Derived::Scalar> local_gram(const Eigen::MatrixBase<Derived>& centered,
                                            typename Derived::Scalar xi = 0) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> g = centered.transpose() * centered;
  g.diagonal().array() += xi;
  return g;
}

/// Eigendecomposition of a local Gram matrix, eigenvalues descending and
/// clamped at zero.
template <typename Scalar>
struct LocalSpectrum {
  Vector<Scalar> values;
  Matrix<Scalar> vectors;  // column k pairs with values(k)
};

template <typename Derived>
LocalSpectrum<typename Derived::Scalar> local_spectrum(const Eigen::MatrixBase<Derived>& gram) {
  using Scalar = typename Derived::Scalar;
  LocalSpectrum<Scalar> s;
  if (gram.rows() == 0) return s;
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(gram);
  s.values = es.eigenvalues().reverse().cwiseMax(Scalar(0));
  s.vectors = es.eigenvectors().rowwise().reverse();
  return s;
}

/// Minimum-norm solution of G w = 1, rescaled to sum to one. Falls back to
/// uniform weights when the raw sum vanishes (|sum| < 1e-12).
template <typename Scalar>
Vector<Scalar> lle_weights(const LocalSpectrum<Scalar>& spec, double rcond = 1e-10) {
  const Index k = spec.values.size();
  Vector<Scalar> w = Vector<Scalar>::Zero(k);
  if (k == 0) return w;
  const Scalar cutoff = static_cast<Scalar>(rcond) * spec.values.maxCoeff();
  const Vector<Scalar> proj = spec.vectors.transpose() * Vector<Scalar>::Ones(k);
  for (Index p = 0; p < k; ++p) {
    if (spec.values(p) > cutoff && spec.values(p) > Scalar(0)) w += (proj(p) / spec.values(p)) * spec.vectors.col(p);
  }
  const Scalar total = w.sum();
  if (std::abs(total) < Scalar(1e-12)) return Vector<Scalar>::Constant(k, Scalar(1) / Scalar(k));
  return w / total;
}

template <typename Derived>
Vector<typename Derived::Scalar> lle_weights(const Eigen::MatrixBase<Derived>& gram, double rcond = 1e-10) {
  return lle_weights(local_spectrum(gram), rcond);
}

/// Residual-to-signal ratio of a descending spectrum beyond its first d values.
/// +inf when the leading mass is zero.
template <typename Scalar>
Scalar spectral_ratio(const Vector<Scalar>& desc, Index d) {
  const Index k = desc.size();
  const Index head = std::min(d, k);
  const Scalar lead = desc.head(head).sum();
  const Scalar rest = desc.tail(k - head).sum();
  if (lead <= Scalar(0)) return std::numeric_limits<Scalar>::infinity();
  return rest / lead;
}

/// eta: the ceil(V/2)-th smallest spectral_ratio over all voxels.
template <typename Scalar>
Scalar compute_eta(std::span<const LocalSpectrum<Scalar>> spectra, Index d) {
  if (spectra.empty()) throw std::invalid_argument("compute_eta: no spectra");
  std::vector<Scalar> rho;
  rho.reserve(spectra.size());
  for (const auto& s : spectra) rho.push_back(spectral_ratio(s.values, d));
  const std::size_t pos = (rho.size() + 1) / 2 - 1;
  std::nth_element(rho.begin(), rho.begin() + static_cast<std::ptrdiff_t>(pos), rho.end());
  return rho[pos];
}

/// Largest l <= K - d whose trailing-l eigenvalue mass over the leading mass
/// is below eta, floored at 1. The ratio is evaluated exactly as in
/// compute_eta so the voxel that defines eta compares equal to it at l = K-d.
template <typename Scalar>
Index select_weight_count(const Vector<Scalar>& desc, Index d, Scalar eta) {
  const Index k = desc.size();
  for (Index l = k - d; l >= 1; --l)
    if (spectral_ratio(desc, k - l) < eta) return l;
  return 1;
}

template <typename Scalar>
struct LocalWeights {
  Vector<Scalar> base;     // w_i, sums to 1
  Matrix<Scalar> vectors;  // K x s_i, column l is w_i^(l)
  Scalar alpha = 0;
  bool degenerate = false;  // K <= d, fell back to s_i = 1
  Index count() const { return vectors.cols(); }
};

/// Multiple local weight vectors from one voxel's spectrum and base weights.
template <typename Scalar>
LocalWeights<Scalar> mlle_weights(const LocalSpectrum<Scalar>& spec, const Vector<Scalar>& base, Index d, Scalar eta,
                                  const LleOptions& opt = {}) {
  const Index k = spec.values.size();
  LocalWeights<Scalar> lw;
  lw.base = base;
  if (k == 0) return lw;
  Index s = 1;
  if (k <= d) lw.degenerate = true;
  else s = select_weight_count(spec.values, d, eta);

  const Matrix<Scalar> v =
      opt.basis == MlleBasis::smallest ? Matrix<Scalar>(spec.vectors.rightCols(s)) : Matrix<Scalar>(spec.vectors.leftCols(s));
  const Vector<Scalar> vt1 = v.transpose() * Vector<Scalar>::Ones(k);
  const Scalar root_s = std::sqrt(static_cast<Scalar>(s));
  lw.alpha = opt.alpha == AlphaNorm::norm ? vt1.norm() / root_s : vt1.squaredNorm() / root_s;

  Vector<Scalar> h = Vector<Scalar>::Constant(s, lw.alpha) - vt1;
  const Scalar hn = h.norm();
  if (hn > Scalar(1e-12)) h /= hn;
  else h.setZero();

  // V (I - 2 h h^T) + (1 - alpha) w 1^T
  lw.vectors = v - Scalar(2) * (v * h) * h.transpose();
  lw.vectors.colwise() += (Scalar(1) - lw.alpha) * base;
  return lw;
}

template <typename Scalar = double>
struct WeightSet {
  std::vector<LocalWeights<Scalar>> voxels;
  Scalar eta = 0;
  std::vector<Index> degenerate_voxels;
};

/// All per-voxel weights for a V x T sample matrix.
template <typename Derived>
WeightSet<typename Derived::Scalar> compute_weights(const Eigen::MatrixBase<Derived>& samples,
                                                    const NeighborhoodSpec& topo, Index d, const LleOptions& opt = {}) {
  using Scalar = typename Derived::Scalar;
  const Index nv = topo.voxels();
  if (samples.rows() != nv) throw std::invalid_argument("compute_weights: sample rows do not match grid");
  std::vector<LocalSpectrum<Scalar>> spectra(static_cast<std::size_t>(nv));
  std::vector<Vector<Scalar>> base(static_cast<std::size_t>(nv));
  for (Index i = 0; i < nv; ++i) {
    const auto& nb = topo[i];
    const Matrix<Scalar> c = center_neighbors(samples, i, nb);
    const Matrix<Scalar> g = local_gram(c, static_cast<Scalar>(opt.xi));
    spectra[static_cast<std::size_t>(i)] = local_spectrum(g);
    base[static_cast<std::size_t>(i)] = lle_weights(spectra[static_cast<std::size_t>(i)], opt.pinv_rcond);
  }
  const Index d_select = opt.unit_dimension_s ? 1 : d;
  WeightSet<Scalar> ws;
  ws.eta = compute_eta<Scalar>(spectra, d_select);
  ws.voxels.reserve(static_cast<std::size_t>(nv));
  for (Index i = 0; i < nv; ++i) {
    ws.voxels.push_back(
        mlle_weights(spectra[static_cast<std::size_t>(i)], base[static_cast<std::size_t>(i)], d_select, ws.eta, opt));
    if (ws.voxels.back().degenerate) ws.degenerate_voxels.push_back(i);
  }
  return ws;
}

/// Phi = sum_i What_i What_i^T, where What_i has -1 in row i and the weight
/// vectors of voxel i in rows N(i).
template <typename Scalar>
Eigen::SparseMatrix<Scalar> alignment_matrix(const WeightSet<Scalar>& weights, const NeighborhoodSpec& topo) {
  const Index nv = topo.voxels();
  if (static_cast<Index>(weights.voxels.size()) != nv)
    throw std::invalid_argument("alignment_matrix: weight set does not match topology");
  std::vector<Eigen::Triplet<Scalar>> trip;
  for (Index i = 0; i < nv; ++i) {
    const auto& nb = topo[i];
    const auto& lw = weights.voxels[static_cast<std::size_t>(i)];
    const Index k = static_cast<Index>(nb.size());
    if (lw.count() == 0) continue;
    Matrix<Scalar> local(k + 1, lw.count());
    local.row(0).setConstant(Scalar(-1));
    local.bottomRows(k) = lw.vectors;
    const Matrix<Scalar> block = local * local.transpose();
    auto global = [&](Index a) { return a == 0 ? i : nb[static_cast<std::size_t>(a - 1)]; };
    for (Index a = 0; a <= k; ++a)
      for (Index b = 0; b <= k; ++b) trip.emplace_back(global(a), global(b), block(a, b));
  }
  Eigen::SparseMatrix<Scalar> phi(nv, nv);
  phi.setFromTriplets(trip.begin(), trip.end());
  phi.makeCompressed();
  return phi;
}

/// Flip each column so its largest-magnitude entry is positive.
template <typename Derived>
void canonicalize_signs(Eigen::MatrixBase<Derived>& m) {
  for (Index c = 0; c < m.cols(); ++c) {
    Index arg = 0;
    m.col(c).cwiseAbs().maxCoeff(&arg);
    if (m(arg, c) < 0) m.col(c) *= -1;
  }
}

template <typename Scalar = double>
struct Embedding {
  Matrix<Scalar> modes;        // V x d, orthonormal columns
  Vector<Scalar> eigenvalues;  // d+1 bottom eigenvalues, ascending
  Index discarded = 0;         // position of the dropped constant-most vector
  Scalar constant_correlation = 0;
  Scalar residual = 0;
  std::vector<std::string> warnings;
};

/// Bottom d+1 eigenvectors of Phi with the constant-most one removed.
template <typename Scalar>
Embedding<Scalar> embed(const Eigen::SparseMatrix<Scalar>& phi, Index d, const LleOptions& opt = {}) {
  const Index nv = phi.rows();
  if (d < 1 || d + 1 > nv) throw std::invalid_argument("embed: need 1 <= d and d + 1 <= V");
  const auto eig = smallest_eigenpairs(phi, d + 1, opt.eigs);
  Embedding<Scalar> out;
  out.eigenvalues = eig.eigenvalues;
  out.residual = eig.max_residual;

  const Vector<Scalar> unit = Vector<Scalar>::Constant(nv, Scalar(1) / std::sqrt(static_cast<Scalar>(nv)));
  const Vector<Scalar> corr = (eig.eigenvectors.transpose() * unit).cwiseAbs();
  Index most = 0;
  corr.maxCoeff(&most);
  if (corr(0) > static_cast<Scalar>(opt.constant_correlation)) {
    out.discarded = 0;
  } else {
    out.discarded = most;
    out.warnings.push_back("bottom eigenvector is not constant (correlation " + std::to_string(double(corr(0))) +
                           "); discarding eigenvector " + std::to_string(most) + " with correlation " +
                           std::to_string(double(corr(most))));
  }
  out.constant_correlation = corr(out.discarded);
  out.modes.resize(nv, d);
  for (Index c = 0, dst = 0; c <= d; ++c) {
    if (c == out.discarded) continue;
    out.modes.col(dst++) = eig.eigenvectors.col(c).normalized();
  }
  canonicalize_signs(out.modes);
  return out;
}

struct EmbeddingProvenance {
  int radius = 0;
  Index d = 0;
  double xi = 0;
  double tolerance = 0;
};

/// A reconstructed scan: d spatial modes on the subject's grid.
struct EmbeddedScan {
  GridDims dims;  // T holds the mode count d
  Eigen::MatrixXd modes;
  Eigen::VectorXd eigenvalues;
  double eta = 0;
  EmbeddingProvenance provenance;
  std::vector<std::string> warnings;
};

class ReconstructionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Full chain: neighborhoods, local Grams, eta, MLLE weights, Phi, bottom
/// eigenvectors.
inline EmbeddedScan reconstruct_scan(const ScanVolume& scan, int radius, Index d, const LleOptions& opt = {}) {
  validate_scan(scan);
  if (d < 1 || d > scan.dims.T) throw std::invalid_argument("reconstruct_scan: need 1 <= d <= T");
  const NeighborhoodSpec topo(scan.dims, radius);
  const auto weights = compute_weights(scan.samples, topo, d, opt);
  const auto phi = alignment_matrix(weights, topo);
  Embedding<double> emb;
  try {
    emb = embed(phi, d, opt);
  } catch (const std::exception& e) {
    throw ReconstructionError("subject '" + scan.subject_id + "' stage embed (r=" + std::to_string(radius) +
                              ", d=" + std::to_string(d) + "): " + e.what());
  }
  EmbeddedScan out;
  out.dims = scan.dims;
  out.dims.T = d;
  out.modes = std::move(emb.modes);
  out.eigenvalues = std::move(emb.eigenvalues);
  out.eta = weights.eta;
  out.provenance = {radius, d, opt.xi, opt.eigs.tolerance};
  out.warnings = std::move(emb.warnings);
  if (!weights.degenerate_voxels.empty())
    out.warnings.push_back(std::to_string(weights.degenerate_voxels.size()) +
                           " voxel(s) with |N(i)| <= d fell back to a single weight vector");
  return out;
}

}  // namespace boldlle
