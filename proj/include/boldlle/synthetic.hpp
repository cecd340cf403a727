#pragma once

// Small synthetic cohorts: i.i.d. Gaussian background with an additive
// mean shift for patients at planted (voxel, volume) pairs.

#include "boldlle/config.hpp"
#include "boldlle/evaluation.hpp"
#include "boldlle/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace boldlle {

struct SyntheticSpec {
  GridDims dims{5, 5, 5, 20};
  Index train_patients = 10;
  Index train_controls = 10;
  Index holdout_patients = 5;
  Index holdout_controls = 5;
  std::vector<Index> planted_voxels;   // empty: central block (see default_planted_voxels)
  std::vector<Index> planted_volumes;  // empty: every volume
  double effect = 2.0;                 // in units of sigma
  double sigma = 1.0;
  std::uint64_t seed = 0;
};

/// The 2x2x2 block nearest the grid centre (clipped for thin grids).
std::vector<Index> default_planted_voxels(const GridDims& dims);

struct SyntheticDataset {
  std::vector<ScanVolume> scans;
  std::vector<Partition> partitions;
};

/// Deterministic under spec.seed. Subjects are ordered training patients,
/// training controls, holdout patients, holdout controls.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

/// Writes one rawvol per subject plus manifest.txt into dir; returns the
/// manifest path.
std::filesystem::path write_synthetic(const SyntheticDataset& data, const std::filesystem::path& dir,
                                      const std::string& name = "synthetic");

/// Standard-normal stream shared by the generator and tests.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : state_(seed) {}
  double next();
  double uniform();

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0;
};

}  // namespace boldlle
