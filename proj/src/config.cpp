#include "boldlle/config.hpp"

#include "boldlle/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace boldlle {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& s, int line, const std::string& key) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError("bad value '" + s + "' for " + key, line);
  return v;
}

bool parse_bool(const std::string& s, int line, const std::string& key) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ParseError("bad boolean '" + s + "' for " + key, line);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Iterates non-empty, non-comment lines as (line number, key, value) or
// (line number, "[section]", "").
template <typename Fn>
void for_each_entry(const std::string& text, Fn&& fn) {
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ParseError("unterminated section header", line);
      fn(line, s, std::string());
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", line);
    fn(line, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
}

}  // namespace

std::vector<Index> parse_index_list(const std::string& s) {
  std::vector<Index> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    Index v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size()) throw std::invalid_argument("bad index '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::string join_indices(const std::vector<Index>& v, char sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += std::to_string(v[i]);
  }
  return s;
}

ReconstructionConfig PipelineConfig::reconstruction(Method m) const {
  ReconstructionConfig rc;
  rc.method = m;
  rc.radius = radius;
  rc.lle.xi = xi;
  rc.lle.basis = mlle_basis;
  rc.lle.alpha = alpha_norm;
  rc.lle.unit_dimension_s = unit_dimension_s;
  rc.lle.eigs.tolerance = eig_tolerance;
  rc.lle.eigs.max_restarts = eig_max_restarts;
  return rc;
}

PipelineConfig parse_config(const std::string& text) {
  PipelineConfig c;
  for_each_entry(text, [&](int line, const std::string& key, const std::string& val) {
    try {
      if (key == "manifest") {
        c.manifest = val;
      } else if (key == "method") {
        c.methods.clear();
        std::istringstream in(val);
        std::string m;
        while (std::getline(in, m, ',')) c.methods.push_back(parse_method(trim(m)));
        if (c.methods.empty()) throw ParseError("empty method list", line);
      } else if (key == "radius") {
        c.radius = parse_number<int>(val, line, key);
        if (c.radius < 1) throw ParseError("radius must be >= 1", line);
      } else if (key == "d_grid") {
        c.d_grid = parse_index_list(val);
      } else if (key == "grid_points") {
        c.grid_points = parse_number<Index>(val, line, key);
      } else if (key == "xi") {
        c.xi = parse_number<double>(val, line, key);
        if (c.xi < 0) throw ParseError("xi must be >= 0", line);
      } else if (key == "mlle_basis") {
        if (val == "smallest") c.mlle_basis = MlleBasis::smallest;
        else if (val == "largest") c.mlle_basis = MlleBasis::largest;
        else throw ParseError("mlle_basis must be smallest or largest", line);
      } else if (key == "alpha_norm") {
        if (val == "norm") c.alpha_norm = AlphaNorm::norm;
        else if (val == "squared") c.alpha_norm = AlphaNorm::squared_norm;
        else throw ParseError("alpha_norm must be norm or squared", line);
      } else if (key == "unit_dimension_s") {
        c.unit_dimension_s = parse_bool(val, line, key);
      } else if (key == "eig_tolerance") {
        c.eig_tolerance = parse_number<double>(val, line, key);
      } else if (key == "eig_max_restarts") {
        c.eig_max_restarts = parse_number<int>(val, line, key);
      } else if (key == "significance") {
        c.significance = parse_number<double>(val, line, key);
        if (!(c.significance > 0 && c.significance <= 1)) throw ParseError("significance must lie in (0, 1]", line);
      } else if (key == "ttest") {
        if (val == "pooled") c.ttest = TTestVariant::pooled;
        else if (val == "welch") c.ttest = TTestVariant::welch;
        else throw ParseError("ttest must be pooled or welch", line);
      } else if (key == "seed") {
        c.seed = parse_number<std::uint64_t>(val, line, key);
      } else if (key == "threads") {
        c.threads = parse_number<int>(val, line, key);
      } else if (key == "min_holdout") {
        c.min_holdout = parse_number<Index>(val, line, key);
      } else {
        throw ParseError("unknown config key '" + key + "'", line);
      }
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(e.what(), line);
    }
  });
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) { return parse_config(read_text(path)); }

std::string to_text(const PipelineConfig& c) {
  std::ostringstream os;
  os << "manifest=" << c.manifest.generic_string() << '\n';
  os << "method=";
  for (std::size_t i = 0; i < c.methods.size(); ++i) os << (i ? "," : "") << to_string(c.methods[i]);
  os << "\nradius=" << c.radius << "\nd_grid=" << join_indices(c.d_grid) << "\ngrid_points=" << c.grid_points
     << "\nxi=" << format_double(c.xi)
     << "\nmlle_basis=" << (c.mlle_basis == MlleBasis::smallest ? "smallest" : "largest")
     << "\nalpha_norm=" << (c.alpha_norm == AlphaNorm::norm ? "norm" : "squared")
     << "\nunit_dimension_s=" << (c.unit_dimension_s ? "true" : "false")
     << "\neig_tolerance=" << format_double(c.eig_tolerance) << "\neig_max_restarts=" << c.eig_max_restarts
     << "\nsignificance=" << format_double(c.significance)
     << "\nttest=" << (c.ttest == TTestVariant::pooled ? "pooled" : "welch") << "\nseed=" << c.seed
     << "\nthreads=" << c.threads << "\nmin_holdout=" << c.min_holdout << '\n';
  return os.str();
}

Index DatasetManifest::count(Partition p) const {
  return static_cast<Index>(std::count_if(subjects.begin(), subjects.end(),
                                          [&](const ManifestSubject& s) { return s.partition == p; }));
}

GridDims probe_scan_dims(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  if (path.extension() == ".nii") return read_nifti1(path).dims;
  std::string header;
  std::getline(in, header);
  std::istringstream is(header);
  std::string magic, version;
  GridDims d;
  if (!(is >> magic >> version >> d.L >> d.W >> d.H >> d.T) || magic != "rawvol" || version != "v1")
    throw FormatError("bad rawvol header in '" + path.string() + "'", 0);
  return d;
}

DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir, bool check_files) {
  DatasetManifest m;
  std::optional<ManifestSubject> current;
  bool has_label = false;
  std::set<std::string> seen;

  auto finish = [&](int line) {
    if (!current) return;
    if (current->id.empty()) throw ParseError("subject block without id", current->line);
    if (current->file.empty()) throw ParseError("subject '" + current->id + "' has no file", current->line);
    if (!has_label) throw ParseError("subject '" + current->id + "' has no label", current->line);
    (void)line;
    m.subjects.push_back(*current);
    current.reset();
  };

  for_each_entry(text, [&](int line, const std::string& key, const std::string& val) {
    if (key == "[subject]") {
      finish(line);
      current = ManifestSubject{};
      current->line = line;
      has_label = false;
      return;
    }
    if (key.front() == '[') throw ParseError("unknown section " + key, line);
    try {
      if (!current) {
        if (key == "dataset") {
          m.name = val;
        } else if (key == "dims") {
          std::istringstream is(val);
          GridDims d;
          if (!(is >> d.L >> d.W >> d.H >> d.T) || !d.valid()) throw ParseError("dims needs four positive integers", line);
          m.dims = d;
        } else if (key == "radius") {
          m.radius = parse_number<int>(val, line, key);
        } else if (key == "d_grid") {
          m.d_grid = parse_index_list(val);
        } else {
          throw ParseError("unknown dataset key '" + key + "'", line);
        }
        return;
      }
      if (key == "id") {
        if (!seen.insert(val).second) throw ParseError("duplicate subject id '" + val + "'", line);
        current->id = val;
      } else if (key == "file") {
        std::filesystem::path p(val);
        current->file = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
      } else if (key == "label") {
        const int y = parse_number<int>(val, line, key);
        if (y != 0 && y != 1) throw ParseError("label must be 0 (control) or 1 (patient)", line);
        current->label = y;
        has_label = true;
      } else if (key == "partition") {
        if (val == "training") current->partition = Partition::training;
        else if (val == "holdout") current->partition = Partition::holdout;
        else throw ParseError("partition must be training or holdout", line);
      } else {
        throw ParseError("unknown subject key '" + key + "'", line);
      }
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(e.what(), line);
    }
  });
  finish(0);
  if (m.subjects.empty()) throw ParseError("manifest lists no subjects", 0);

  if (check_files) {
    for (const auto& s : m.subjects) {
      if (!std::filesystem::exists(s.file))
        throw ParseError("file '" + s.file.string() + "' for subject '" + s.id + "' does not exist", s.line);
      GridDims d;
      try {
        d = probe_scan_dims(s.file);
      } catch (const std::exception& e) {
        throw ParseError(e.what(), s.line);
      }
      if (!m.dims) m.dims = d;
      else if (!(d == *m.dims))
        throw ParseError("subject '" + s.id + "' dims " + to_string(d) + " differ from declared " + to_string(*m.dims),
                         s.line);
    }
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files) {
  return parse_manifest(read_text(path), path.parent_path(), check_files);
}

std::string to_text(const DatasetManifest& m) {
  std::ostringstream os;
  os << "dataset=" << m.name << '\n';
  if (m.dims) os << "dims=" << m.dims->L << ' ' << m.dims->W << ' ' << m.dims->H << ' ' << m.dims->T << '\n';
  if (m.radius) os << "radius=" << *m.radius << '\n';
  if (!m.d_grid.empty()) os << "d_grid=" << join_indices(m.d_grid) << '\n';
  for (const auto& s : m.subjects) {
    os << "\n[subject]\nid=" << s.id << "\nfile=" << s.file.generic_string() << "\nlabel=" << s.label << '\n';
    if (s.partition) os << "partition=" << to_string(*s.partition) << '\n';
  }
  return os.str();
}

}  // namespace boldlle
