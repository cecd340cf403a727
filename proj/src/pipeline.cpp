#include "boldlle/pipeline.hpp"

#include "boldlle/io.hpp"
#include "boldlle/parallel.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace boldlle {

namespace {

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * v);
  return buf;
}

std::string cell(const Metric& m) {
  if (!m.value) return "undefined";
  std::string s = percent(*m.value);
  if (m.half_width) s += " ± " + percent(*m.half_width);
  return s;
}

std::string method_dir(Method m) { return to_string(m) + "/"; }

// Stage wrapper: the first exception becomes a StageError naming the stage.
struct StageError : std::runtime_error {
  StageError(std::string stage, const std::string& what) : std::runtime_error(what), stage(std::move(stage)) {}
  std::string stage;
};

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace

Dataset load_dataset(const DatasetManifest& manifest, const PipelineConfig& cfg) {
  const auto& subs = manifest.subjects;
  if (subs.empty()) throw std::invalid_argument("manifest lists no subjects");
  std::vector<ScanVolume> scans(subs.size());
  parallel_for(subs.size(), cfg.threads, [&](std::size_t i) {
    try {
      scans[i] = read_scan(subs[i].file);
    } catch (const std::exception& e) {
      throw std::runtime_error("subject '" + subs[i].id + "': " + e.what());
    }
    scans[i].subject_id = subs[i].id;
    scans[i].label = subs[i].label;
  });

  Dataset data;
  data.name = manifest.name;
  data.dims = manifest.dims.value_or(scans.front().dims);
  for (std::size_t i = 0; i < scans.size(); ++i)
    if (!(scans[i].dims == data.dims))
      throw std::runtime_error("subject '" + subs[i].id + "' dims " + to_string(scans[i].dims) + " differ from " +
                               to_string(data.dims));

  const auto pinned = std::count_if(subs.begin(), subs.end(), [](const auto& s) { return s.partition.has_value(); });
  std::vector<Partition> parts;
  if (pinned == static_cast<std::ptrdiff_t>(subs.size())) {
    for (const auto& s : subs) parts.push_back(*s.partition);
  } else if (pinned == 0) {
    std::vector<int> labels;
    for (const auto& s : subs) labels.push_back(s.label);
    parts = stratified_split(labels, cfg.min_holdout, cfg.seed);
  } else {
    throw std::invalid_argument("manifest pins partitions for some subjects but not all");
  }
  for (std::size_t i = 0; i < scans.size(); ++i)
    (parts[i] == Partition::training ? data.train : data.holdout).push_back(std::move(scans[i]));

  const auto y = labels_of(data.train);
  if (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), 0) == 0)
    throw std::invalid_argument("training partition must contain both classes");
  return data;
}

std::vector<Index> resolve_grid(const DatasetManifest& manifest, const PipelineConfig& cfg, Index T) {
  std::vector<Index> g = !manifest.d_grid.empty() ? manifest.d_grid
                         : !cfg.d_grid.empty()    ? cfg.d_grid
                                                  : d_grid(T, cfg.grid_points);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  for (Index d : g)
    if (d < 1 || d > T)
      throw std::invalid_argument("d grid value " + std::to_string(d) + " outside [1, " + std::to_string(T) + "]");
  return g;
}

int resolve_radius(const DatasetManifest& manifest, const PipelineConfig& cfg) {
  const int r = manifest.radius.value_or(cfg.radius);
  if (r < 1) throw std::invalid_argument("radius must be >= 1");
  return r;
}

std::string to_text(const ChosenParameters& p) {
  std::ostringstream os;
  os << "method=" << to_string(p.method) << "\nradius=" << p.radius << "\nd=" << p.d
     << "\nvolumes=" << join_indices(p.volumes) << '\n';
  return os.str();
}

ChosenParameters parse_parameters(const std::string& text) {
  ChosenParameters p;
  std::istringstream in(text);
  std::string line;
  bool has_d = false, has_vol = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("parameters: expected key=value, got '" + line + "'");
    const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key == "method") p.method = parse_method(val);
    else if (key == "radius") p.radius = std::stoi(val);
    else if (key == "d") p.d = std::stoll(val), has_d = true;
    else if (key == "volumes") p.volumes = parse_index_list(val), has_vol = true;
    else throw std::invalid_argument("parameters: unknown key '" + key + "'");
  }
  if (!has_d || !has_vol) throw std::invalid_argument("parameters: d and volumes are required");
  return p;
}

std::string sweep_report(const SweepResult& s) {
  std::ostringstream os;
  os << "d\tstatus\tcorrect\taccuracy\tvolumes\n";
  for (const auto& pt : s.points) {
    os << pt.d << '\t';
    if (pt.ok) {
      const Index correct = pt.selection.correct_trace.empty() ? 0 : pt.selection.correct_trace.back();
      os << "ok\t" << correct << '\t' << format_double(pt.selection.accuracy) << '\t'
         << join_indices(pt.selection.volumes);
    } else {
      os << "failed\t\t\t" << pt.error;
    }
    os << '\n';
  }
  os << "# chosen d=" << s.chosen_d << '\n';
  return os.str();
}

std::string selection_report(const SelectionResult& s) {
  std::ostringstream os;
  os << "volumes=" << join_indices(s.volumes) << "\naccuracy=" << format_double(s.accuracy) << "\nstep\tvolume\tcorrect\taccuracy\n";
  for (std::size_t k = 0; k < s.volumes.size(); ++k)
    os << k + 1 << '\t' << s.volumes[k] << '\t' << s.correct_trace[k] << '\t' << format_double(s.accuracy_trace[k])
       << '\n';
  return os.str();
}

std::string evaluation_report(const EvaluationReport& r) {
  std::ostringstream os;
  os << "partition=" << to_string(r.partition) << "\nsubjects=" << r.total() << "\ntp=" << r.tp << "\nfp=" << r.fp
     << "\ntn=" << r.tn << "\nfn=" << r.fn << "\nspecificity=" << cell(r.specificity)
     << "\nsensitivity=" << cell(r.sensitivity) << "\nprecision=" << cell(r.precision)
     << "\naccuracy=" << cell(r.accuracy) << "\nchance=" << percent(r.chance) << '\n';
  return os.str();
}

std::string metrics_table(const std::string& dataset, const std::map<Partition, EvaluationReport>& chance,
                          const std::map<Method, std::map<Partition, EvaluationReport>>& methods) {
  static constexpr const char* kMetrics[] = {"specificity", "sensitivity", "precision", "accuracy"};
  static constexpr const char* kColumns[] = {"Chance", "Original", "LLE", "PCA"};
  auto metric = [](const EvaluationReport& r, int k) -> const Metric& {
    switch (k) {
      case 0: return r.specificity;
      case 1: return r.sensitivity;
      case 2: return r.precision;
      default: return r.accuracy;
    }
  };

  std::ostringstream os;
  os << "dataset\tpartition";
  for (const char* m : kMetrics)
    for (const char* c : kColumns) os << '\t' << m << ':' << c;
  os << '\n';
  for (Partition p : {Partition::training, Partition::holdout}) {
    os << dataset << '\t' << to_string(p);
    for (int k = 0; k < 4; ++k) {
      auto it = chance.find(p);
      os << '\t' << (it == chance.end() ? "N/A" : cell(metric(it->second, k)));
      for (Method m : {Method::original, Method::lle, Method::pca}) {
        auto mi = methods.find(m);
        const EvaluationReport* r = nullptr;
        if (mi != methods.end()) {
          auto pi = mi->second.find(p);
          if (pi != mi->second.end()) r = &pi->second;
        }
        os << '\t' << (r ? cell(metric(*r, k)) : "N/A");
      }
    }
    os << '\n';
  }
  return os.str();
}

RunWriter::RunWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
  std::filesystem::remove(dir_ / "FAILED");
}

void RunWriter::write(const std::string& name, const std::string& content) {
  const auto path = dir_ / name;
  std::filesystem::create_directories(path.parent_path());
  write_file_bytes(path, content);
}

void RunWriter::write_map(const std::string& name, const StatMap& map, double alpha) {
  const auto path = dir_ / name;
  std::filesystem::create_directories(path.parent_path());
  write_statmap(path, map, alpha);
}

void RunWriter::log(const std::string& line) {
  log_ += line;
  log_ += '\n';
  write_file_bytes(dir_ / "run.log", log_);
}

void RunWriter::fail(const std::string& stage, const std::string& message) {
  log("FAILED stage=" + stage + ": " + message);
  write_file_bytes(dir_ / "FAILED", "stage=" + stage + "\nerror=" + message + '\n');
}

SweepResult run_sweep_stage(const Dataset& data, const DatasetManifest& manifest, const PipelineConfig& cfg, Method m,
                            RunWriter& out) {
  auto rc = cfg.reconstruction(m);
  rc.radius = resolve_radius(manifest, cfg);
  const Index T = data.dims.T;
  std::vector<Index> grid = m == Method::original ? std::vector<Index>{T} : resolve_grid(manifest, cfg, T);
  if (m == Method::original) out.log("sweep " + to_string(m) + ": no reconstruction, d fixed at T=" + std::to_string(T));
  else if (m == Method::lle)
    out.log("sweep lle: reconstruction r=" + std::to_string(rc.radius) + " d grid " + join_indices(grid));
  else out.log("sweep pca: reconstruction d grid " + join_indices(grid));

  auto res = sweep(data.train, rc, grid, cfg.threads);
  for (const auto& pt : res.points)
    if (!pt.ok) out.log("sweep " + to_string(m) + ": d=" + std::to_string(pt.d) + " failed: " + pt.error);
  out.write(method_dir(m) + "sweep.tsv", sweep_report(res));
  out.log("sweep " + to_string(m) + ": chosen d=" + std::to_string(res.chosen_d) +
          " volumes=" + join_indices(res.chosen.volumes));
  return res;
}

MethodOutcome run_train_stage(const Dataset& data, const DatasetManifest& manifest, const PipelineConfig& cfg, Method m,
                              RunWriter& out) {
  MethodOutcome mo;
  mo.method = m;
  mo.sweep = stage("sweep", [&] { return run_sweep_stage(data, manifest, cfg, m, out); });
  mo.params = {m, resolve_radius(manifest, cfg), mo.sweep.chosen_d, mo.sweep.chosen.volumes};
  out.write(method_dir(m) + "params.txt", to_text(mo.params));
  out.write(method_dir(m) + "selection.txt", selection_report(mo.sweep.chosen));

  mo.training = stage("train", [&] {
    auto rc = cfg.reconstruction(m);
    rc.radius = mo.params.radius;
    return training_evaluate(data.train, mo.params.d, mo.params.volumes, rc, cfg.threads).report;
  });
  out.write(method_dir(m) + "training.txt", evaluation_report(mo.training));
  out.log("train " + to_string(m) + ": LOOCV accuracy " + cell(mo.training.accuracy));
  return mo;
}

EvaluationReport run_eval_stage(const Dataset& data, const PipelineConfig& cfg, const ChosenParameters& params,
                                RunWriter& out) {
  auto rc = cfg.reconstruction(params.method);
  rc.radius = params.radius;
  const auto res = holdout_evaluate(data.train, data.holdout, params.d, params.volumes, rc, cfg.threads);
  out.write(method_dir(params.method) + "holdout.txt", evaluation_report(res.report));
  std::ostringstream preds;
  preds << "subject\tlabel\tprediction\n";
  for (std::size_t i = 0; i < data.holdout.size(); ++i)
    preds << data.holdout[i].subject_id << '\t' << *data.holdout[i].label << '\t' << res.predictions[i] << '\n';
  out.write(method_dir(params.method) + "holdout_predictions.tsv", preds.str());
  out.log("eval " + to_string(params.method) + ": holdout accuracy " + cell(res.report.accuracy));
  return res.report;
}

std::vector<StatMap> run_maps_stage(const Dataset& data, const PipelineConfig& cfg, const ChosenParameters& params,
                                    RunWriter& out) {
  auto rc = cfg.reconstruction(params.method);
  rc.radius = params.radius;
  std::vector<ScanVolume> all = data.train;
  all.insert(all.end(), data.holdout.begin(), data.holdout.end());
  const auto feats = extract_all(all, rc, params.d, cfg.threads);
  std::vector<Eigen::MatrixXd> patients, controls;
  for (std::size_t i = 0; i < all.size(); ++i) (*all[i].label == 1 ? patients : controls).push_back(feats[i]);

  std::vector<StatMap> maps;
  std::ostringstream counts;
  counts << "volume\tsignificant\tvoxels\talpha\n";
  for (Index v : params.volumes) {
    maps.push_back(build_map(data.dims, patients, controls, v, cfg.ttest));
    const auto mask = threshold_map(maps.back(), cfg.significance);
    out.write_map(method_dir(params.method) + "maps/vol" + std::to_string(v) + ".statmap", maps.back(),
                  cfg.significance);
    counts << v << '\t' << mask.count << '\t' << data.dims.voxels() << '\t' << format_double(cfg.significance) << '\n';
  }
  out.write(method_dir(params.method) + "maps/significant.tsv", counts.str());
  out.log("maps " + to_string(params.method) + ": " + std::to_string(maps.size()) + " map(s) over " +
          std::to_string(patients.size()) + " patients / " + std::to_string(controls.size()) + " controls");
  return maps;
}

RunResult run_pipeline(const std::filesystem::path& manifest_path, const PipelineConfig& cfg,
                       const std::filesystem::path& out_dir) {
  RunResult result;
  RunWriter out(out_dir);
  try {
    const auto manifest = stage("ingest", [&] { return load_manifest(manifest_path); });
    const auto data = stage("ingest", [&] { return load_dataset(manifest, cfg); });

    PipelineConfig resolved = cfg;
    resolved.manifest = manifest_path;
    resolved.radius = resolve_radius(manifest, cfg);
    resolved.d_grid = resolve_grid(manifest, cfg, data.dims.T);
    out.write("config.txt", to_text(resolved));
    out.log("ingest: dataset=" + data.name + " dims=" + to_string(data.dims) + " training=" +
            std::to_string(data.train.size()) + " holdout=" + std::to_string(data.holdout.size()));

    std::map<Partition, EvaluationReport> chance;
    chance[Partition::training] = chance_report(labels_of(data.train), Partition::training);
    if (!data.holdout.empty()) chance[Partition::holdout] = chance_report(labels_of(data.holdout), Partition::holdout);
    std::map<Method, std::map<Partition, EvaluationReport>> table;

    for (Method m : cfg.methods) {
      auto mo = run_train_stage(data, manifest, resolved, m, out);
      table[m][Partition::training] = mo.training;
      if (!data.holdout.empty()) {
        mo.holdout = stage("eval", [&] { return run_eval_stage(data, resolved, mo.params, out); });
        table[m][Partition::holdout] = *mo.holdout;
      } else {
        out.log("eval " + to_string(m) + ": no holdout subjects");
      }
      mo.maps = stage("maps", [&] { return run_maps_stage(data, resolved, mo.params, out); });
      for (const auto& map : mo.maps) mo.significant_counts.push_back(threshold_map(map, cfg.significance).count);
      result.methods.push_back(std::move(mo));
    }
    out.write("metrics.tsv", metrics_table(data.name, chance, table));
    out.log("done");
  } catch (const StageError& e) {
    result.exit_code = 1;
    result.failed_stage = e.stage;
    result.message = e.what();
    out.fail(e.stage, e.what());
  } catch (const std::exception& e) {
    result.exit_code = 1;
    result.failed_stage = "report";
    result.message = e.what();
    out.fail("report", e.what());
  }
  return result;
}

}  // namespace boldlle
