#pragma once

// Line-oriented key=value configuration and dataset manifests.

#include "boldlle/evaluation.hpp"
#include "boldlle/grid.hpp"
#include "boldlle/statmap.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace boldlle {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct PipelineConfig {
  std::filesystem::path manifest;  // dataset manifest (run / sweep / train / eval / maps)
  std::vector<Method> methods{Method::lle};
  int radius = 2;
  std::vector<Index> d_grid;  // empty: log grid with grid_points
  Index grid_points = 12;
  double xi = 0.0;
  MlleBasis mlle_basis = MlleBasis::smallest;
  AlphaNorm alpha_norm = AlphaNorm::norm;
  bool unit_dimension_s = false;
  double eig_tolerance = 1e-8;
  int eig_max_restarts = 500;
  double significance = 0.05;
  TTestVariant ttest = TTestVariant::pooled;
  std::uint64_t seed = 0;
  int threads = 1;
  Index min_holdout = 10;

  ReconstructionConfig reconstruction(Method m) const;
};

PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);
/// Canonical text form; parse_config(to_text(c)) reproduces c.
std::string to_text(const PipelineConfig& c);

std::vector<Index> parse_index_list(const std::string& s);
std::string join_indices(const std::vector<Index>& v, char sep = ',');

struct ManifestSubject {
  std::string id;
  std::filesystem::path file;
  int label = 0;
  std::optional<Partition> partition;
  int line = 0;
};

struct DatasetManifest {
  std::string name;
  std::optional<GridDims> dims;
  std::optional<int> radius;
  std::vector<Index> d_grid;
  std::vector<ManifestSubject> subjects;

  Index count(Partition p) const;
};

/// Parses the manifest text; relative file paths resolve against base_dir.
/// With check_files, every referenced file must exist and match the
/// declared dims. Class coverage of the training partition is checked by
/// load_dataset, once partitions are final.
DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir = {},
                               bool check_files = true);
DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files = true);
std::string to_text(const DatasetManifest& m);

/// Reads only the header of a rawvol or NIfTI file.
GridDims probe_scan_dims(const std::filesystem::path& path);

}  // namespace boldlle
