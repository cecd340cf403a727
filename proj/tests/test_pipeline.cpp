#include "boldlle/io.hpp"
#include "boldlle/lle.hpp"
#include "boldlle/pipeline.hpp"
#include "boldlle/synthetic.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

using namespace boldlle;
namespace fs = std::filesystem;

namespace {

fs::path fresh(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "boldlle_test_pipeline" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  const auto b = read_file_bytes(p);
  return {b.begin(), b.end()};
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).generic_string()] = slurp(e.path());
  return out;
}

SyntheticSpec small_spec(std::uint64_t seed = 1) {
  SyntheticSpec s;
  s.dims = {4, 4, 3, 8};
  s.train_patients = s.train_controls = 6;
  s.holdout_patients = s.holdout_controls = 3;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("generator determinism and layout") {
  const auto a = generate_synthetic(small_spec(3));
  const auto b = generate_synthetic(small_spec(3));
  const auto c = generate_synthetic(small_spec(4));
  REQUIRE(a.scans.size() == 18);
  for (std::size_t i = 0; i < a.scans.size(); ++i) {
    CHECK(a.scans[i].samples == b.scans[i].samples);
    CHECK(a.scans[i].subject_id == b.scans[i].subject_id);
  }
  CHECK(a.scans[0].samples != c.scans[0].samples);
  CHECK(a.scans[0].subject_id == "tp00");
  CHECK(a.scans[6].subject_id == "tc00");
  CHECK(a.scans[12].subject_id == "hp00");
  CHECK(a.partitions[12] == Partition::holdout);
  CHECK(*a.scans[0].label == 1);
  CHECK(*a.scans[6].label == 0);

  SyntheticSpec bad = small_spec();
  bad.planted_voxels = {1000};
  CHECK_THROWS(generate_synthetic(bad));
  bad = small_spec();
  bad.effect = -1;
  CHECK_THROWS(generate_synthetic(bad));
  bad = small_spec();
  bad.planted_volumes = {8};
  CHECK_THROWS(generate_synthetic(bad));
}

TEST_CASE("generator null and planted significance") {
  SyntheticSpec null;
  null.dims = {10, 10, 10, 1};
  null.train_patients = null.train_controls = 10;
  null.holdout_patients = null.holdout_controls = 0;
  null.effect = 0;
  null.seed = 5;
  const auto ds = generate_synthetic(null);
  std::vector<Eigen::MatrixXd> p, c;
  for (const auto& s : ds.scans) (*s.label ? p : c).push_back(s.samples);
  const auto mask = threshold_map(build_map(null.dims, p, c, 0), 0.05);
  CHECK(std::abs(double(mask.count) / 1000.0 - 0.05) < 3 * std::sqrt(0.05 * 0.95 / 1000.0));

  SyntheticSpec strong = null;
  strong.effect = 10;
  strong.train_patients = strong.train_controls = 5;
  strong.planted_voxels = {3, 50, 512, 999};
  const auto sd = generate_synthetic(strong);
  p.clear();
  c.clear();
  for (const auto& s : sd.scans) (*s.label ? p : c).push_back(s.samples);
  const auto m2 = threshold_map(build_map(strong.dims, p, c, 0), 0.05);
  for (Index v : strong.planted_voxels) CHECK(m2.mask[v] == 1);
}

TEST_CASE("planted voxels carry more between-group mode variance") {
  SyntheticSpec spec;
  spec.dims = {5, 5, 5, 20};
  spec.holdout_patients = spec.holdout_controls = 0;
  spec.seed = 2;
  const auto ds = generate_synthetic(spec);
  const auto planted = default_planted_voxels(spec.dims);
  const std::set<Index> in(planted.begin(), planted.end());
  for (Index d : {Index(1), Index(3)}) {
    Eigen::MatrixXd mean1 = Eigen::MatrixXd::Zero(125, d), mean0 = mean1;
    for (const auto& s : ds.scans) (*s.label ? mean1 : mean0) += reconstruct_scan(s, 2, d).modes / 10.0;
    const Eigen::VectorXd between = (mean1 - mean0).rowwise().squaredNorm();
    double sig = 0, bg = 0;
    for (Index v = 0; v < 125; ++v) (in.count(v) ? sig : bg) += between(v);
    sig /= double(in.size());
    bg /= double(125 - in.size());
    CHECK(sig > 2 * bg);
  }
}

TEST_CASE("parameters round trip") {
  const ChosenParameters p{Method::pca, 1, 7, {4, 0, 2}};
  CHECK(parse_parameters(to_text(p)) == p);
  CHECK_THROWS(parse_parameters("method=lle\n"));
  CHECK_THROWS(parse_parameters("d=1\nvolumes=0\ncolour=red\n"));
}

TEST_CASE("metrics table marks methods that were not run") {
  std::map<Partition, EvaluationReport> chance{{Partition::training, chance_report(std::vector<int>{0, 1, 1}, Partition::training)}};
  std::map<Method, std::map<Partition, EvaluationReport>> methods;
  methods[Method::lle][Partition::training] = confusion_metrics(std::vector<int>{0, 1, 1}, std::vector<int>{0, 1, 1},
                                                                Partition::training);
  const auto table = metrics_table("demo", chance, methods);
  std::istringstream in(table);
  std::string header, train, hold;
  std::getline(in, header);
  std::getline(in, train);
  std::getline(in, hold);
  CHECK(header.rfind("dataset\tpartition\tspecificity:Chance\tspecificity:Original\tspecificity:LLE", 0) == 0);
  CHECK(train.rfind("demo\ttraining\t", 0) == 0);
  CHECK(train.find("N/A") != std::string::npos);
  CHECK(train.find("100.0%") != std::string::npos);
  CHECK(hold.find("demo\tholdout\tN/A\tN/A\tN/A\tN/A") == 0);
}

TEST_CASE("run_pipeline writes every artefact and is reproducible") {
  const auto base = fresh("full");
  const auto manifest = write_synthetic(generate_synthetic(small_spec()), base / "data");
  PipelineConfig cfg;
  cfg.methods = {Method::lle, Method::pca, Method::original};
  cfg.radius = 1;
  cfg.d_grid = {1, 2, 4, 8};
  const auto res = run_pipeline(manifest, cfg, base / "run1");
  REQUIRE(res.exit_code == 0);
  CHECK(res.methods.size() == 3);
  for (const char* f : {"config.txt", "run.log", "metrics.tsv", "lle/params.txt", "lle/sweep.tsv", "lle/selection.txt",
                        "lle/training.txt", "lle/holdout.txt", "lle/maps/significant.tsv", "pca/params.txt",
                        "original/params.txt"})
    CHECK_MESSAGE(fs::exists(base / "run1" / f), f);
  CHECK_FALSE(fs::exists(base / "run1" / "FAILED"));
  for (const auto& mo : res.methods) {
    CHECK(mo.maps.size() == mo.params.volumes.size());
    for (Index v : mo.params.volumes)
      CHECK(fs::exists(base / "run1" / to_string(mo.method) / "maps" / ("vol" + std::to_string(v) + ".statmap")));
    CHECK(mo.holdout.has_value());
    for (const auto& m : mo.maps) CHECK(m.n1 + m.n0 == 18);
  }

  // original: d fixed at T and no reconstruction in the log
  const auto orig = parse_parameters(slurp(base / "run1/original/params.txt"));
  CHECK(orig.d == 8);
  const auto log = slurp(base / "run1/run.log");
  CHECK(log.find("sweep original: no reconstruction") != std::string::npos);
  CHECK(log.find("sweep original: reconstruction") == std::string::npos);

  // identical config and seed: byte-identical outputs
  const auto res2 = run_pipeline(manifest, cfg, base / "run2");
  REQUIRE(res2.exit_code == 0);
  CHECK(tree(base / "run1") == tree(base / "run2"));

  // the resolved config alone reproduces the run
  const auto resolved = load_config(base / "run1/config.txt");
  CHECK(resolved.manifest == manifest);
  const auto res3 = run_pipeline(resolved.manifest, resolved, base / "run3");
  REQUIRE(res3.exit_code == 0);
  CHECK(tree(base / "run1") == tree(base / "run3"));

  // thread count does not change any report
  auto threaded = cfg;
  threaded.threads = 3;
  REQUIRE(run_pipeline(manifest, threaded, base / "run4").exit_code == 0);
  auto t1 = tree(base / "run1"), t4 = tree(base / "run4");
  t1.erase("config.txt");
  t4.erase("config.txt");
  CHECK(t1 == t4);
}

TEST_CASE("stage failures leave a FAILED marker and partial outputs") {
  const auto base = fresh("failing");
  SyntheticSpec spec = small_spec();
  spec.dims = {2, 2, 1, 6};
  const auto manifest = write_synthetic(generate_synthetic(spec), base / "data");
  PipelineConfig cfg;
  cfg.radius = 1;
  cfg.d_grid = {4, 5};  // d + 1 > V everywhere
  const auto res = run_pipeline(manifest, cfg, base / "run");
  CHECK(res.exit_code != 0);
  CHECK(res.failed_stage == "sweep");
  CHECK(fs::exists(base / "run/FAILED"));
  CHECK(slurp(base / "run/FAILED").find("stage=sweep") != std::string::npos);
  CHECK(fs::exists(base / "run/config.txt"));
  CHECK(fs::exists(base / "run/run.log"));
  CHECK_FALSE(fs::exists(base / "run/metrics.tsv"));

  // a later successful run in the same directory clears the marker
  cfg.d_grid = {1, 2};
  CHECK(run_pipeline(manifest, cfg, base / "run").exit_code == 0);
  CHECK_FALSE(fs::exists(base / "run/FAILED"));

  const auto missing = run_pipeline(base / "nope.txt", cfg, base / "run_missing");
  CHECK(missing.exit_code != 0);
  CHECK(missing.failed_stage == "ingest");
}

TEST_CASE("unpinned manifest is split deterministically") {
  const auto base = fresh("unpinned");
  SyntheticSpec spec = small_spec();
  spec.holdout_patients = spec.holdout_controls = 0;
  spec.train_patients = spec.train_controls = 10;
  auto ds = generate_synthetic(spec);
  const auto path = write_synthetic(ds, base / "data");
  auto m = load_manifest(path);
  for (auto& s : m.subjects) s.partition.reset();
  PipelineConfig cfg;
  cfg.min_holdout = 6;
  const auto a = load_dataset(m, cfg);
  CHECK(a.holdout.size() == 6);
  CHECK(a.train.size() == 14);
  const auto b = load_dataset(m, cfg);
  for (std::size_t i = 0; i < a.holdout.size(); ++i) CHECK(a.holdout[i].subject_id == b.holdout[i].subject_id);

  m.subjects[0].partition = Partition::training;
  CHECK_THROWS(load_dataset(m, cfg));
}

TEST_CASE("load_dataset rejects single-class training") {
  const auto base = fresh("oneclass");
  SyntheticSpec spec = small_spec();
  const auto path = write_synthetic(generate_synthetic(spec), base / "data");
  auto m = load_manifest(path);
  for (auto& s : m.subjects)
    if (s.label == 1) s.partition = Partition::holdout;
  CHECK_THROWS(load_dataset(m, PipelineConfig{}));
}

TEST_CASE("grid and radius resolution") {
  DatasetManifest m;
  PipelineConfig cfg;
  CHECK(resolve_grid(m, cfg, 20) == d_grid(20, 12));
  cfg.d_grid = {5, 2, 2};
  CHECK(resolve_grid(m, cfg, 20) == std::vector<Index>{2, 5});
  m.d_grid = {3};
  CHECK(resolve_grid(m, cfg, 20) == std::vector<Index>{3});
  m.d_grid = {30};
  CHECK_THROWS(resolve_grid(m, cfg, 20));
  CHECK(resolve_radius(m, cfg) == 2);
  m.radius = 1;
  CHECK(resolve_radius(m, cfg) == 1);
}
