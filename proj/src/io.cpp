#include "boldlle/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace boldlle {

namespace {

template <typename T>
T byteswap_value(T v) {
  std::array<char, sizeof(T)> b;
  std::memcpy(b.data(), &v, sizeof(T));
  std::reverse(b.begin(), b.end());
  std::memcpy(&v, b.data(), sizeof(T));
  return v;
}

template <typename T>
T load(const char* p, bool swap) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return swap ? byteswap_value(v) : v;
}

constexpr bool kHostLittle = std::endian::native == std::endian::little;

void append_le_float(std::string& out, float f) {
  if (!kHostLittle) f = byteswap_value(f);
  char b[4];
  std::memcpy(b, &f, 4);
  out.append(b, 4);
}

// Splits "<header line>\n<payload>"; returns header tokens and payload start.
std::vector<std::string> header_tokens(const std::vector<char>& bytes, std::size_t& payload) {
  const auto nl = std::find(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(bytes.size(), 512)), '\n');
  if (nl == bytes.end() || nl - bytes.begin() >= 512) throw FormatError("missing header line", 0);
  payload = static_cast<std::size_t>(nl - bytes.begin()) + 1;
  std::istringstream is(std::string(bytes.begin(), nl));
  std::vector<std::string> tok{std::istream_iterator<std::string>(is), std::istream_iterator<std::string>()};
  return tok;
}

Index parse_positive(const std::string& s, std::uint64_t offset, const char* what) {
  Index v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v < 1)
    throw FormatError(std::string("bad ") + what + " '" + s + "'", offset);
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::vector<char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

void write_raw_volume(const std::filesystem::path& path, const ScanVolume& scan) {
  const GridDims& d = scan.dims;
  std::string out = "rawvol v1 " + std::to_string(d.L) + ' ' + std::to_string(d.W) + ' ' + std::to_string(d.H) + ' ' +
                    std::to_string(d.T) + '\n';
  out.reserve(out.size() + static_cast<std::size_t>(d.voxels() * d.T) * 4);
  for (Index t = 0; t < d.T; ++t)
    for (Index v = 0; v < d.voxels(); ++v) append_le_float(out, static_cast<float>(scan.samples(v, t)));
  write_file_bytes(path, out);
}

ScanVolume read_raw_volume(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  std::size_t payload = 0;
  const auto tok = header_tokens(bytes, payload);
  if (tok.size() != 6 || tok[0] != "rawvol" || tok[1] != "v1") throw FormatError("bad rawvol magic", 0);
  GridDims d{parse_positive(tok[2], 0, "L"), parse_positive(tok[3], 0, "W"), parse_positive(tok[4], 0, "H"),
             parse_positive(tok[5], 0, "T")};
  const std::uint64_t count = static_cast<std::uint64_t>(d.voxels()) * static_cast<std::uint64_t>(d.T);
  const std::uint64_t need = payload + count * 4;
  if (bytes.size() < need)
    throw FormatError("truncated rawvol payload: expected " + std::to_string(count) + " floats, found " +
                          std::to_string((bytes.size() - payload) / 4),
                      bytes.size());
  if (bytes.size() > need) throw FormatError("trailing bytes after rawvol payload", need);
  Eigen::MatrixXd x(d.voxels(), d.T);
  const char* p = bytes.data() + payload;
  for (Index t = 0; t < d.T; ++t)
    for (Index v = 0; v < d.voxels(); ++v, p += 4) x(v, t) = load<float>(p, !kHostLittle);
  return ScanVolume(d, std::move(x), path.stem().string());
}

ScanVolume read_nifti1(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0x1f && static_cast<unsigned char>(bytes[1]) == 0x8b)
    throw UnsupportedFeature("'" + path.string() + "': compressed NIfTI is not supported");
  if (bytes.size() < 348) throw FormatError("NIfTI header shorter than 348 bytes", bytes.size());
  const char* h = bytes.data();

  bool swap = false;
  std::int16_t ndim = load<std::int16_t>(h + 40, false);
  if (ndim < 1 || ndim > 7) {
    swap = true;
    ndim = load<std::int16_t>(h + 40, true);
    if (ndim < 1 || ndim > 7) throw FormatError("cannot determine NIfTI byte order from dim[0]", 40);
  }
  if (load<std::int32_t>(h, swap) != 348) throw FormatError("sizeof_hdr is not 348", 0);
  if (std::memcmp(h + 344, "n+1\0", 4) != 0) {
    if (std::memcmp(h + 344, "ni1\0", 4) == 0)
      throw UnsupportedFeature("'" + path.string() + "': two-file NIfTI (.hdr/.img) is not supported");
    throw UnsupportedFeature("'" + path.string() + "': magic is not n+1");
  }
  std::array<Index, 8> dim{};
  for (int k = 0; k < 8; ++k) dim[static_cast<std::size_t>(k)] = load<std::int16_t>(h + 40 + 2 * k, swap);
  if (ndim > 4)
    for (int k = 5; k <= ndim; ++k)
      if (dim[static_cast<std::size_t>(k)] > 1) throw UnsupportedFeature("NIfTI with more than 4 dimensions");
  GridDims d{dim[1], ndim >= 2 ? dim[2] : 1, ndim >= 3 ? dim[3] : 1, ndim >= 4 ? dim[4] : 1};
  if (!d.valid()) throw FormatError("non-positive NIfTI dimension", 42);

  const std::int16_t datatype = load<std::int16_t>(h + 70, swap);
  std::size_t width = 0;
  switch (datatype) {
    case 4: width = 2; break;
    case 16: width = 4; break;
    case 64: width = 8; break;
    default: throw UnsupportedFeature("NIfTI datatype " + std::to_string(datatype) + " is not supported");
  }
  const float vox_offset = load<float>(h + 108, swap);
  const float slope = load<float>(h + 112, swap);
  const float inter = load<float>(h + 116, swap);
  const bool scaled = std::isfinite(slope) && slope != 0.0f;

  const std::uint64_t start = static_cast<std::uint64_t>(std::max(352.0f, vox_offset));
  const std::uint64_t count = static_cast<std::uint64_t>(d.voxels()) * static_cast<std::uint64_t>(d.T);
  if (bytes.size() < start + count * width)
    throw FormatError("truncated NIfTI payload: expected " + std::to_string(count) + " samples", bytes.size());

  Eigen::MatrixXd x(d.voxels(), d.T);
  const char* p = bytes.data() + start;
  for (Index t = 0; t < d.T; ++t)
    for (Index v = 0; v < d.voxels(); ++v, p += width) {
      double raw = 0;
      if (datatype == 4) raw = load<std::int16_t>(p, swap);
      else if (datatype == 16) raw = load<float>(p, swap);
      else raw = load<double>(p, swap);
      x(v, t) = scaled ? raw * static_cast<double>(slope) + static_cast<double>(inter) : raw;
    }
  return ScanVolume(d, std::move(x), path.stem().string());
}

ScanVolume read_scan(const std::filesystem::path& path) {
  if (path.extension() == ".nii") return read_nifti1(path);
  if (path.extension() == ".gz") throw UnsupportedFeature("'" + path.string() + "': compressed input is not supported");
  return read_raw_volume(path);
}

void write_statmap(const std::filesystem::path& path, const StatMap& map, double alpha) {
  const GridDims& d = map.dims;
  std::string out = "statmap v1 " + std::to_string(d.L) + ' ' + std::to_string(d.W) + ' ' + std::to_string(d.H) + ' ' +
                    std::to_string(map.volume) + ' ' + std::to_string(map.n1) + ' ' + std::to_string(map.n0) + ' ' +
                    format_double(alpha) + '\n';
  for (Index i = 0; i < map.t.size(); ++i) append_le_float(out, static_cast<float>(map.t(i)));
  for (Index i = 0; i < map.p.size(); ++i) append_le_float(out, static_cast<float>(map.p(i)));
  write_file_bytes(path, out);
}

StatMapFile read_statmap(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  std::size_t payload = 0;
  const auto tok = header_tokens(bytes, payload);
  if (tok.size() != 9 || tok[0] != "statmap" || tok[1] != "v1") throw FormatError("bad statmap magic", 0);
  StatMapFile f;
  f.map.dims = GridDims{parse_positive(tok[2], 0, "L"), parse_positive(tok[3], 0, "W"), parse_positive(tok[4], 0, "H"), 1};
  {
    Index vol = 0;
    const auto [ptr, ec] = std::from_chars(tok[5].data(), tok[5].data() + tok[5].size(), vol);
    if (ec != std::errc() || vol < 0) throw FormatError("bad volume index", 0);
    f.map.volume = vol;
  }
  f.map.n1 = parse_positive(tok[6], 0, "n1");
  f.map.n0 = parse_positive(tok[7], 0, "n0");
  {
    const auto [ptr, ec] = std::from_chars(tok[8].data(), tok[8].data() + tok[8].size(), f.alpha);
    if (ec != std::errc()) throw FormatError("bad alpha", 0);
  }
  const Index v = f.map.dims.voxels();
  const std::uint64_t need = payload + static_cast<std::uint64_t>(v) * 8;
  if (bytes.size() != need) throw FormatError("statmap payload size mismatch", std::min<std::uint64_t>(bytes.size(), need));
  const char* p = bytes.data() + payload;
  f.map.t.resize(v);
  f.map.p.resize(v);
  f.map.degenerate.assign(static_cast<std::size_t>(v), 0);
  for (Index i = 0; i < v; ++i, p += 4) f.map.t(i) = load<float>(p, !kHostLittle);
  for (Index i = 0; i < v; ++i, p += 4) f.map.p(i) = load<float>(p, !kHostLittle);
  for (Index i = 0; i < v; ++i) f.map.degenerate[static_cast<std::size_t>(i)] = std::isinf(f.map.t(i)) ? 1 : 0;
  return f;
}

void write_triplets(const std::filesystem::path& path, const Eigen::SparseMatrix<double>& m) {
  Eigen::SparseMatrix<double, Eigen::RowMajor> rm = m;
  std::string out;
  for (Index r = 0; r < rm.outerSize(); ++r)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(rm, r); it; ++it)
      out += std::to_string(it.row()) + ' ' + std::to_string(it.col()) + ' ' + format_double(it.value()) + '\n';
  write_file_bytes(path, out);
}

Eigen::SparseMatrix<double> read_triplets(const std::filesystem::path& path, Index n) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::vector<Eigen::Triplet<double>> trip;
  Index r = 0, c = 0;
  std::string value;
  while (in >> r >> c >> value) {
    double v = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || r < 0 || c < 0 || r >= n || c >= n) throw FormatError("bad triplet line", 0);
    trip.emplace_back(r, c, v);
  }
  Eigen::SparseMatrix<double> m(n, n);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

}  // namespace boldlle
