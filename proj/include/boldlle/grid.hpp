#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace boldlle {

using Index = Eigen::Index;

struct Coord {
  Index x = 0;
  Index y = 0;
  Index z = 0;
  friend bool operator==(const Coord&, const Coord&) = default;
};

/// Voxel grid extents plus the number of samples per voxel waveform.
struct GridDims {
  Index L = 1;
  Index W = 1;
  Index H = 1;
  Index T = 1;

  Index voxels() const { return L * W * H; }
  bool valid() const { return L > 0 && W > 0 && H > 0 && T > 0; }
  bool same_space(const GridDims& o) const { return L == o.L && W == o.W && H == o.H; }
  friend bool operator==(const GridDims&, const GridDims&) = default;
};

inline std::string to_string(const GridDims& d) {
  std::ostringstream os;
  os << d.L << 'x' << d.W << 'x' << d.H << 'x' << d.T;
  return os.str();
}

/// x-fastest linear index: x + L*(y + W*z).
inline Index linear_index(const Coord& c, const GridDims& dims) {
  if (c.x < 0 || c.x >= dims.L || c.y < 0 || c.y >= dims.W || c.z < 0 || c.z >= dims.H) {
    std::ostringstream os;
    os << "voxel coordinate (" << c.x << ',' << c.y << ',' << c.z << ") outside grid " << to_string(dims);
    throw std::out_of_range(os.str());
  }
  return c.x + dims.L * (c.y + dims.W * c.z);
}

inline Coord voxel_coord(Index i, const GridDims& dims) {
  if (i < 0 || i >= dims.voxels()) {
    throw std::out_of_range("voxel index " + std::to_string(i) + " outside grid " + to_string(dims));
  }
  Coord c;
  c.x = i % dims.L;
  c.y = (i / dims.L) % dims.W;
  c.z = i / (dims.L * dims.W);
  return c;
}

/// One subject's scan. Samples are stored V x T (column t is the volume at
/// time t, voxel index runs fastest), which is also the on-disk order.
struct ScanVolume {
  GridDims dims;
  Eigen::MatrixXd samples;
  std::string subject_id;
  std::optional<int> label;

  ScanVolume() = default;
  ScanVolume(GridDims d, Eigen::MatrixXd x, std::string id = {}, std::optional<int> y = std::nullopt)
      : dims(d), samples(std::move(x)), subject_id(std::move(id)), label(y) {
    if (!dims.valid() || samples.rows() != dims.voxels() || samples.cols() != dims.T) {
      throw std::invalid_argument("scan samples do not match dims " + to_string(dims));
    }
  }

  Index voxels() const { return dims.voxels(); }
  auto waveform(Index i) const { return samples.row(i); }
};

/// Voxels at Chebyshev distance <= r from i (i excluded), clipped to the
/// grid, ascending.
inline std::vector<Index> cube_neighborhood(Index i, int r, const GridDims& dims) {
  if (r < 1) throw std::invalid_argument("neighborhood radius must be >= 1");
  const Coord c = voxel_coord(i, dims);
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>((2 * r + 1) * (2 * r + 1) * (2 * r + 1) - 1));
  const Index z0 = std::max<Index>(0, c.z - r), z1 = std::min<Index>(dims.H - 1, c.z + r);
  const Index y0 = std::max<Index>(0, c.y - r), y1 = std::min<Index>(dims.W - 1, c.y + r);
  const Index x0 = std::max<Index>(0, c.x - r), x1 = std::min<Index>(dims.L - 1, c.x + r);
  // z-outer / x-inner iteration emits indices already sorted
  for (Index z = z0; z <= z1; ++z)
    for (Index y = y0; y <= y1; ++y)
      for (Index x = x0; x <= x1; ++x) {
        const Index j = x + dims.L * (y + dims.W * z);
        if (j != i) out.push_back(j);
      }
  return out;
}

/// Interior neighborhood size K = (1+2r)^3 - 1.
constexpr Index interior_neighbor_count(int r) {
  const Index side = 1 + 2 * static_cast<Index>(r);
  return side * side * side - 1;
}

/// Precomputed N(i) for every voxel of a grid.
class NeighborhoodSpec {
 public:
  NeighborhoodSpec(const GridDims& dims, int radius) : dims_(dims), radius_(radius) {
    lists_.reserve(static_cast<std::size_t>(dims.voxels()));
    for (Index i = 0; i < dims.voxels(); ++i) lists_.push_back(cube_neighborhood(i, radius, dims));
  }

  int radius() const { return radius_; }
  const GridDims& dims() const { return dims_; }
  Index voxels() const { return static_cast<Index>(lists_.size()); }
  const std::vector<Index>& operator[](Index i) const { return lists_[static_cast<std::size_t>(i)]; }

 private:
  GridDims dims_;
  int radius_;
  std::vector<std::vector<Index>> lists_;
};

struct ScanValidation {
  std::vector<Index> constant_voxels;  // zero-variance waveforms (warnings)
};

class ScanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws ScanError naming (x,y,z,t) of the first non-finite sample.
inline ScanValidation validate_scan(const ScanVolume& scan) {
  const GridDims& d = scan.dims;
  if (!d.valid() || scan.samples.rows() != d.voxels() || scan.samples.cols() != d.T) {
    throw ScanError("scan '" + scan.subject_id + "': sample count does not match " + to_string(d));
  }
  ScanValidation result;
  for (Index t = 0; t < d.T; ++t) {
    for (Index v = 0; v < d.voxels(); ++v) {
      if (!std::isfinite(scan.samples(v, t))) {
        const Coord c = voxel_coord(v, d);
        std::ostringstream os;
        os << "scan '" << scan.subject_id << "': non-finite sample at (" << c.x << ',' << c.y << ',' << c.z
           << ',' << t << ')';
        throw ScanError(os.str());
      }
    }
  }
  for (Index v = 0; v < d.voxels(); ++v) {
    const auto w = scan.samples.row(v);
    if ((w.array() == w(0)).all()) result.constant_voxels.push_back(v);
  }
  return result;
}

}  // namespace boldlle
