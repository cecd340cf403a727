#pragma once

// File formats:
//   rawvol v1   "rawvol v1 L W H T\n" + V*T little-endian float32, voxel index
//               fastest, volumes consecutive.
//   statmap v1  "statmap v1 L W H volume n1 n0 alpha\n" + V float32 t values
//               + V float32 p values, little-endian.
//   NIfTI-1     single-file .nii ingestion (float32 / int16 / float64).
//   Phi dump    text "row col value" triplets, 0-based, row-major order.

#include "boldlle/grid.hpp"
#include "boldlle/statmap.hpp"

#include <Eigen/Sparse>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace boldlle {

class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

class UnsupportedFeature : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_raw_volume(const std::filesystem::path& path, const ScanVolume& scan);
ScanVolume read_raw_volume(const std::filesystem::path& path);

ScanVolume read_nifti1(const std::filesystem::path& path);

/// Dispatch on extension: .nii -> NIfTI-1, anything else -> rawvol.
ScanVolume read_scan(const std::filesystem::path& path);

void write_statmap(const std::filesystem::path& path, const StatMap& map, double alpha);

struct StatMapFile {
  StatMap map;
  double alpha = 0;
};
StatMapFile read_statmap(const std::filesystem::path& path);

void write_triplets(const std::filesystem::path& path, const Eigen::SparseMatrix<double>& m);
Eigen::SparseMatrix<double> read_triplets(const std::filesystem::path& path, Eigen::Index n);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

std::vector<char> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::string& bytes);

}  // namespace boldlle
