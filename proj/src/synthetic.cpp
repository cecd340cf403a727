#include "boldlle/synthetic.hpp"

#include "boldlle/io.hpp"
#include "boldlle/sym_eigs.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace boldlle {

double GaussianStream::uniform() {
  // (0, 1): never exactly zero so the log below stays finite
  return (static_cast<double>(detail::splitmix64(state_) >> 11) + 0.5) * 0x1.0p-53;
}

double GaussianStream::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform(), u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
  has_spare_ = true;
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<Index> default_planted_voxels(const GridDims& dims) {
  auto span = [](Index n) {
    const Index lo = std::max<Index>(0, n / 2 - 1);
    return std::pair<Index, Index>{lo, std::min<Index>(n - 1, lo + 1)};
  };
  const auto [x0, x1] = span(dims.L);
  const auto [y0, y1] = span(dims.W);
  const auto [z0, z1] = span(dims.H);
  std::vector<Index> out;
  for (Index z = z0; z <= z1; ++z)
    for (Index y = y0; y <= y1; ++y)
      for (Index x = x0; x <= x1; ++x) out.push_back(linear_index({x, y, z}, dims));
  return out;
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  if (!spec.dims.valid()) throw std::invalid_argument("synthetic: invalid dims");
  if (spec.effect < 0 || spec.sigma < 0) throw std::invalid_argument("synthetic: effect and sigma must be >= 0");
  const auto voxels = spec.planted_voxels.empty() ? default_planted_voxels(spec.dims) : spec.planted_voxels;
  std::vector<Index> volumes = spec.planted_volumes;
  if (volumes.empty())
    for (Index t = 0; t < spec.dims.T; ++t) volumes.push_back(t);
  for (Index v : voxels)
    if (v < 0 || v >= spec.dims.voxels()) throw std::out_of_range("synthetic: planted voxel outside grid");
  for (Index t : volumes)
    if (t < 0 || t >= spec.dims.T) throw std::out_of_range("synthetic: planted volume outside scan");

  SyntheticDataset ds;
  struct Group {
    Index count;
    int label;
    Partition part;
    const char* tag;
  };
  const Group groups[] = {{spec.train_patients, 1, Partition::training, "tp"},
                          {spec.train_controls, 0, Partition::training, "tc"},
                          {spec.holdout_patients, 1, Partition::holdout, "hp"},
                          {spec.holdout_controls, 0, Partition::holdout, "hc"}};
  std::uint64_t subject = 0;
  for (const auto& g : groups) {
    for (Index k = 0; k < g.count; ++k, ++subject) {
      std::uint64_t mix = spec.seed ^ (0xd1b54a32d192ed03ull * (subject + 1));
      GaussianStream rng(detail::splitmix64(mix));
      Eigen::MatrixXd x(spec.dims.voxels(), spec.dims.T);
      for (Index t = 0; t < spec.dims.T; ++t)
        for (Index v = 0; v < spec.dims.voxels(); ++v) x(v, t) = spec.sigma * rng.next();
      if (g.label == 1)
        for (Index t : volumes)
          for (Index v : voxels) x(v, t) += spec.effect * spec.sigma;
      std::ostringstream id;
      id << g.tag << (k < 10 ? "0" : "") << k;
      ds.scans.emplace_back(spec.dims, std::move(x), id.str(), g.label);
      ds.partitions.push_back(g.part);
    }
  }
  return ds;
}

std::filesystem::path write_synthetic(const SyntheticDataset& data, const std::filesystem::path& dir,
                                      const std::string& name) {
  std::filesystem::create_directories(dir);
  DatasetManifest m;
  m.name = name;
  if (!data.scans.empty()) m.dims = data.scans.front().dims;
  for (std::size_t i = 0; i < data.scans.size(); ++i) {
    const auto& s = data.scans[i];
    const std::string file = s.subject_id + ".rawvol";
    write_raw_volume(dir / file, s);
    m.subjects.push_back({s.subject_id, file, s.label.value_or(0), data.partitions[i], 0});
  }
  const auto path = dir / "manifest.txt";
  write_file_bytes(path, to_text(m));
  return path;
}

}  // namespace boldlle
