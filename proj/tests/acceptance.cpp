// Acceptance battery: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include "boldlle/evaluation.hpp"
#include "boldlle/grid.hpp"
#include "boldlle/io.hpp"
#include "boldlle/lda.hpp"
#include "boldlle/lle.hpp"
#include "boldlle/pca.hpp"
#include "boldlle/pipeline.hpp"
#include "boldlle/selection.hpp"
#include "boldlle/statmap.hpp"
#include "boldlle/synthetic.hpp"
#include "oracles.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>

using namespace boldlle;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && secs > budget_s) {
    o.pass = false;
    o.detail += " [over time budget]";
  }
  if (!o.pass) ++failures;
  std::printf("%s %2d %s: %s (%.3f s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "boldlle_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::map<std::string, std::vector<char>> tree(const fs::path& dir) {
  std::map<std::string, std::vector<char>> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).generic_string()] = read_file_bytes(e.path());
  return out;
}

Outcome binomial_bars() {
  const double a = 100 * binomial_error(26.0 / 30, 30), b = 100 * binomial_error(46.0 / 51, 51);
  const bool ok = std::abs(a - 12.2) <= 0.05 && std::abs(b - 8.2) <= 0.05;
  return {ok, fmt("26/30 -> %.4f%%, 46/51 -> %.4f%%", a, b)};
}

Outcome neighborhood_counts() {
  bool ok = true;
  for (int r : {1, 2}) {
    const NeighborhoodSpec topo(GridDims{8, 8, 8, 1}, r);
    const Index k = (1 + 2 * r) * (1 + 2 * r) * (1 + 2 * r) - 1;
    for (Index v = 0; v < topo.voxels(); ++v) {
      const auto c = voxel_coord(v, topo.dims());
      const Index x = c.x, y = c.y, z = c.z;
      const bool interior = x >= r && y >= r && z >= r && x < 8 - r && y < 8 - r && z < 8 - r;
      if (interior && Index(topo[v].size()) != k) ok = false;
      for (Index u : topo[v]) {
        const auto& back = topo[u];
        if (std::find(back.begin(), back.end(), v) == back.end()) ok = false;
      }
    }
  }
  const NeighborhoodSpec r1(GridDims{8, 8, 8, 1}, 1), r2(GridDims{8, 8, 8, 1}, 2);
  const Index mid = linear_index(Coord{4, 4, 4}, r1.dims());
  return {ok, "interior r=1 -> " + std::to_string(r1[mid].size()) + ", r=2 -> " + std::to_string(r2[mid].size()) +
                  ", 8x8x8 symmetry exhaustive"};
}

Outcome embedding_oracle() {
  double worst_angle = 0, worst_trace = 0;
  const int scans = 20;
  for (int s = 0; s < scans; ++s) {
    const auto scan = oracle::random_scan({5, 5, 5, 20}, 5000 + std::uint64_t(s));
    const NeighborhoodSpec topo(scan.dims, 2);
    const Index d = 1 + s % 10;
    const auto phi = alignment_matrix(compute_weights(scan.samples, topo, d), topo);
    const auto emb = embed(phi, d);
    const auto ref = oracle::jacobi_eigen(Eigen::MatrixXd(phi));
    Eigen::MatrixXd ours(125, d + 1);
    ours << Eigen::VectorXd::Constant(125, 1 / std::sqrt(125.0)), emb.modes;
    worst_angle = std::max(worst_angle, std::asin(std::min(1.0, oracle::subspace_sine(ours, ref.vectors.leftCols(d + 1)))));
    const Eigen::MatrixXd dense = Eigen::MatrixXd(phi);
    const double tr_ours = (ours.transpose() * dense * ours).trace();
    const double tr_ref = ref.values.head(d + 1).sum();
    worst_trace = std::max(worst_trace, std::abs(tr_ours - tr_ref) / std::max(std::abs(tr_ref), 1e-300));
  }
  return {worst_angle < 1e-6 && worst_trace < 1e-6,
          fmt("20 scans, max principal angle %.3e, max relative trace gap %.3e", worst_angle, worst_trace)};
}

Outcome embedding_invariants() {
  int passed = 0;
  double w_sum = 0, ortho = 0, mode_sum = 0, shift = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    oracle::Rng rng(9000 + seed);
    const GridDims dims{3 + Index(rng.next() % 4), 3 + Index(rng.next() % 4), 2 + Index(rng.next() % 3),
                        6 + Index(rng.next() % 15)};
    const int radius = 1 + int(rng.next() % 2);
    const Index d = 1 + Index(rng.next() % std::min<Index>(dims.T, 8));
    // float32-valued samples (the on-disk precision) and a dyadic shift keep
    // x + c exact, so the shifted scan is an exact translate
    auto scan = oracle::random_scan(dims, seed);
    scan.samples = scan.samples.cast<float>().cast<double>();
    const NeighborhoodSpec topo(dims, radius);
    const auto ws = compute_weights(scan.samples, topo, d);
    const Eigen::RowVectorXd offset = (rng.normal_matrix(1, dims.T) * 40.0).array().round() / 8.0;
    const auto moved = compute_weights(Eigen::MatrixXd(scan.samples.rowwise() + offset), topo, d);
    double ws_err = 0, sh_err = 0;
    for (std::size_t i = 0; i < ws.voxels.size(); ++i) {
      ws_err = std::max(ws_err, std::abs(ws.voxels[i].base.sum() - 1.0));
      sh_err = std::max(sh_err, (ws.voxels[i].base - moved.voxels[i].base).cwiseAbs().maxCoeff());
    }
    const auto out = reconstruct_scan(scan, radius, d);
    const double o = (out.modes.transpose() * out.modes - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff();
    const double ms = out.modes.colwise().sum().cwiseAbs().maxCoeff() / std::sqrt(double(dims.voxels()));
    w_sum = std::max(w_sum, ws_err);
    ortho = std::max(ortho, o);
    mode_sum = std::max(mode_sum, ms);
    shift = std::max(shift, sh_err);
    if (ws_err < 1e-8 && o < 1e-6 && ms <= 1e-6 && sh_err < 1e-10) ++passed;
  }
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d/50 seeds; max |sum w-1| %.2e, max |Z'Z-I| %.2e, max |mode sum|/sqrt(V) %.2e, max shift %.2e",
                passed, w_sum, ortho, mode_sum, shift);
  return {passed == 50, buf};
}

Outcome pca_oracle() {
  double lossless = 0, oracle_gap = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    oracle::Rng rng(700 + seed);
    const Eigen::MatrixXd x = rng.normal_matrix(50, 10);
    const auto model = pca_fit(x);
    const Eigen::MatrixXd scores = pca_reconstruct(x, 10);
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mean;
    lossless = std::max(lossless, (scores * model.rotation.transpose() - centered).norm());
    const auto ref = oracle::jacobi_eigen(Eigen::MatrixXd(centered.transpose() * centered / 49.0));
    for (Index k = 0; k < 10; ++k) {
      const Eigen::VectorXd want = ref.vectors.col(9 - k);
      const Eigen::VectorXd got = model.rotation.col(k);
      oracle_gap = std::max(oracle_gap, std::min((got - want).cwiseAbs().maxCoeff(), (got + want).cwiseAbs().maxCoeff()));
    }
  }
  return {lossless < 1e-6 && oracle_gap < 1e-8,
          fmt("20 matrices 50x10, max d=T error %.2e, max basis gap to covariance oracle %.2e", lossless, oracle_gap)};
}

Outcome classifier_oracle() {
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    oracle::Rng rng(31000 + seed);
    const Index n = 4 + Index(rng.next() % 8), p = 1 + Index(rng.next() % 6);
    const Eigen::MatrixXd x = rng.normal_matrix(n, p);
    std::vector<int> y(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) y[std::size_t(i)] = i < 2 ? int(i) : int(rng.next() % 2);
    const Eigen::VectorXd z = rng.normal_matrix(p, 1);
    worst = std::max(worst, double(std::abs(lda_predict(lda_fit(x, y), z).gap - oracle::lda_log_density_gap(x, y, z))));
  }

  int recovered = 0, increasing = 0;
  const int runs = 40;
  for (int s = 0; s < runs; ++s) {
    SyntheticSpec spec;
    spec.dims = {5, 5, 5, 10};
    spec.train_patients = spec.train_controls = 10;
    spec.holdout_patients = spec.holdout_controls = 0;
    spec.planted_volumes = {Index(s % 10)};
    spec.effect = 2.0;
    spec.seed = 4000 + std::uint64_t(s);
    const auto ds = generate_synthetic(spec);
    std::vector<Eigen::MatrixXd> feats;
    std::vector<int> labels;
    for (const auto& sc : ds.scans) {
      feats.push_back(sc.samples);
      labels.push_back(*sc.label);
    }
    const auto sel = sfs_select<double>(feats, labels);
    if (!sel.volumes.empty() && sel.volumes.front() == spec.planted_volumes[0]) ++recovered;
    bool inc = !sel.accuracy_trace.empty();
    for (std::size_t k = 1; k < sel.accuracy_trace.size(); ++k)
      inc = inc && sel.accuracy_trace[k] > sel.accuracy_trace[k - 1];
    increasing += inc;
  }
  char buf[256];
  std::snprintf(buf, sizeof buf, "max LDA gap error %.2e over 100; planted volume selected first in %d/%d; strictly increasing trace in %d/%d",
                worst, recovered, runs, increasing, runs);
  return {worst < 1e-10 && recovered >= 38 && increasing == runs, buf};
}

Outcome statistics_oracle() {
  double t_err = 0, p_err = 0;
  oracle::Rng rng(555);
  for (int k = 0; k < 1000; ++k) {
    const Index na = 2 + Index(rng.next() % 15), nb = 2 + Index(rng.next() % 15);
    const Eigen::VectorXd a = rng.normal_matrix(na, 1) * (0.5 + rng.uniform());
    const Eigen::VectorXd b = rng.normal_matrix(nb, 1) * (0.5 + rng.uniform()) + Eigen::VectorXd::Constant(nb, rng.normal());
    const double ma = a.mean(), mb = b.mean();
    const double sp2 = ((a.array() - ma).square().sum() + (b.array() - mb).square().sum()) / double(na + nb - 2);
    const double t = (ma - mb) / std::sqrt(sp2 * (1.0 / double(na) + 1.0 / double(nb)));
    const boost::math::students_t dist(double(na + nb - 2));
    const double p = 2 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
    const auto r = voxel_ttest(a, b);
    t_err = std::max(t_err, std::abs(r.t - t) / std::max(1.0, std::abs(t)));
    p_err = std::max(p_err, std::abs(r.p - p));
  }

  const GridDims dims{100, 100, 10, 1};
  const double v = double(dims.voxels());
  std::vector<Eigen::MatrixXd> pat, con;
  GaussianStream g(8128);
  for (int s = 0; s < 20; ++s) {
    Eigen::MatrixXd m(dims.voxels(), 1);
    for (Index i = 0; i < dims.voxels(); ++i) m(i, 0) = g.next();
    (s < 10 ? pat : con).push_back(std::move(m));
  }
  const auto mask = threshold_map(build_map(dims, pat, con, 0), 0.05);
  const double frac = double(mask.count) / v;
  const double band = 3 * std::sqrt(0.05 * 0.95 / v);
  char buf[256];
  std::snprintf(buf, sizeof buf, "1000 pairs: max rel t err %.2e, max p err %.2e; null fraction %.5f (band 0.05 +- %.5f over 1e5 voxels)",
                t_err, p_err, frac, band);
  return {t_err < 1e-9 && p_err < 1e-9 && std::abs(frac - 0.05) <= band, buf};
}

Outcome end_to_end() {
  int good = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto dir = scratch("e2e_" + std::to_string(seed));
    SyntheticSpec spec;  // 5x5x5x20, 10+10 training, 5+5 holdout, 2 sigma
    spec.seed = seed;
    const auto manifest = write_synthetic(generate_synthetic(spec), dir / "data");
    PipelineConfig cfg;
    cfg.methods = {Method::lle};
    cfg.seed = seed;
    const auto res = run_pipeline(manifest, cfg, dir / "run");
    bool ok = false;
    if (res.exit_code == 0 && res.methods.size() == 1 && res.methods[0].holdout) {
      const auto& m = res.methods[0];
      const double train_chance = 0.5, hold_chance = 0.5;  // balanced by construction
      const double acc = *m.training.accuracy.value, hw = *m.training.accuracy.half_width;
      ok = acc - train_chance > hw && *m.holdout->accuracy.value >= hold_chance;
      char buf[64];
      std::snprintf(buf, sizeof buf, " %llu:%.2f/%.2f", static_cast<unsigned long long>(seed), acc, *m.holdout->accuracy.value);
      per_seed += buf;
    } else {
      per_seed += " " + std::to_string(seed) + ":failed(" + res.failed_stage + ")";
    }
    good += ok;
    fs::remove_all(dir);
  }
  return {good >= 18, std::to_string(good) + "/20 seeds better than chance; train/holdout accuracy" + per_seed};
}

Outcome leakage_guard() {
  int equal = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto dir = scratch("leak_" + std::to_string(seed));
    SyntheticSpec spec;
    spec.dims = {4, 4, 4, 10};
    spec.seed = 100 + seed;
    const auto path = write_synthetic(generate_synthetic(spec), dir / "data");
    PipelineConfig cfg;
    cfg.radius = 1;
    const auto manifest = load_manifest(path);
    auto permuted = manifest;
    std::vector<int> hold;
    for (const auto& s : permuted.subjects)
      if (s.partition == Partition::holdout) hold.push_back(s.label);
    std::mt19937_64 gen(seed);
    std::shuffle(hold.begin(), hold.end(), gen);
    std::size_t k = 0;
    for (auto& s : permuted.subjects)
      if (s.partition == Partition::holdout) s.label = 1 - hold[k++];

    RunWriter wa(dir / "a"), wb(dir / "b");
    const auto a = run_sweep_stage(load_dataset(manifest, cfg), manifest, cfg, Method::lle, wa);
    const auto b = run_sweep_stage(load_dataset(permuted, cfg), permuted, cfg, Method::lle, wb);
    equal += (a == b && a.chosen == b.chosen && a.chosen_d == b.chosen_d);
    fs::remove_all(dir);
  }
  return {equal == 10, std::to_string(equal) + "/10 seeds with identical SweepResult and SelectionResult"};
}

Outcome determinism() {
  const auto dir = scratch("determinism");
  SyntheticSpec spec;
  spec.dims = {4, 4, 4, 12};
  spec.seed = 77;
  const auto manifest = write_synthetic(generate_synthetic(spec), dir / "data");
  PipelineConfig cfg;
  cfg.methods = {Method::lle, Method::pca, Method::original};
  cfg.seed = 77;
  const auto r1 = run_pipeline(manifest, cfg, dir / "run1");
  const auto r2 = run_pipeline(manifest, cfg, dir / "run2");
  if (r1.exit_code != 0 || r2.exit_code != 0) return {false, "pipeline failed: " + r1.message + r2.message};
  const auto t1 = tree(dir / "run1"), t2 = tree(dir / "run2");
  std::size_t maps = 0;
  for (const auto& [name, bytes] : t1) maps += name.find(".statmap") != std::string::npos;
  const bool ok = t1 == t2 && t1.count("lle/selection.txt") && maps > 0;
  fs::remove_all(dir);
  return {ok, std::to_string(t1.size()) + " files (" + std::to_string(maps) + " maps) compared byte for byte"};
}

}  // namespace

int main() {
  criterion(1, "binomial error bars", 0.001, binomial_bars);
  criterion(2, "neighborhood counts", 1, neighborhood_counts);
  criterion(3, "embedding vs dense eigendecomposition", 30, embedding_oracle);
  criterion(4, "embedding invariants fuzz", 0, embedding_invariants);
  criterion(5, "PCA losslessness and oracle", 5, pca_oracle);
  criterion(6, "classifier and selection oracle", 120, classifier_oracle);
  criterion(7, "statistics oracle", 60, statistics_oracle);
  criterion(8, "end-to-end better than chance", 600, end_to_end);
  criterion(9, "leakage guard", 0, leakage_guard);
  criterion(10, "determinism", 0, determinism);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
