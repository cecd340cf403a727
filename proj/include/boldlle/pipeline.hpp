#pragma once

// Orchestration: ingest -> sweep (training only) -> final evaluation ->
// holdout -> statistical maps, with every artefact written to a run
// directory.

#include "boldlle/config.hpp"
#include "boldlle/evaluation.hpp"
#include "boldlle/selection.hpp"
#include "boldlle/statmap.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace boldlle {

struct Dataset {
  std::string name;
  GridDims dims;
  std::vector<ScanVolume> train;
  std::vector<ScanVolume> holdout;
};

/// Reads every subject, attaches labels, and applies pinned partitions (or
/// the seeded stratified split when the manifest pins none).
Dataset load_dataset(const DatasetManifest& manifest, const PipelineConfig& cfg);

std::vector<Index> resolve_grid(const DatasetManifest& manifest, const PipelineConfig& cfg, Index T);
int resolve_radius(const DatasetManifest& manifest, const PipelineConfig& cfg);

/// Hyper-parameters fixed by the training sweep.
struct ChosenParameters {
  Method method = Method::lle;
  int radius = 2;
  Index d = 1;
  std::vector<Index> volumes;

  friend bool operator==(const ChosenParameters&, const ChosenParameters&) = default;
};

std::string to_text(const ChosenParameters& p);
ChosenParameters parse_parameters(const std::string& text);

std::string sweep_report(const SweepResult& s);
std::string selection_report(const SelectionResult& s);
std::string evaluation_report(const EvaluationReport& r);

/// Summary TSV: one row per partition, columns metric x {Chance,
/// Original, LLE, PCA}; methods that were not run read N/A.
std::string metrics_table(const std::string& dataset, const std::map<Partition, EvaluationReport>& chance,
                          const std::map<Method, std::map<Partition, EvaluationReport>>& methods);

struct MethodOutcome {
  Method method = Method::lle;
  SweepResult sweep;
  ChosenParameters params;
  EvaluationReport training;
  std::optional<EvaluationReport> holdout;
  std::vector<StatMap> maps;
  std::vector<Index> significant_counts;
};

/// Single writer for a run directory; also keeps the stage log.
class RunWriter {
 public:
  explicit RunWriter(std::filesystem::path dir);
  void write(const std::string& name, const std::string& content);
  void write_map(const std::string& name, const StatMap& map, double alpha);
  void log(const std::string& line);
  void fail(const std::string& stage, const std::string& message);
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::string log_;
};

struct RunResult {
  int exit_code = 0;
  std::string failed_stage;
  std::string message;
  std::vector<MethodOutcome> methods;
};

/// Stage functions shared by the CLI subcommands and run_pipeline.
SweepResult run_sweep_stage(const Dataset& data, const DatasetManifest& manifest, const PipelineConfig& cfg, Method m,
                            RunWriter& out);
MethodOutcome run_train_stage(const Dataset& data, const DatasetManifest& manifest, const PipelineConfig& cfg, Method m,
                              RunWriter& out);
EvaluationReport run_eval_stage(const Dataset& data, const PipelineConfig& cfg, const ChosenParameters& params,
                                RunWriter& out);
std::vector<StatMap> run_maps_stage(const Dataset& data, const PipelineConfig& cfg, const ChosenParameters& params,
                                    RunWriter& out);

/// Full pipeline for every configured method. Never throws for stage
/// failures: they produce a FAILED marker and a non-zero exit code.
RunResult run_pipeline(const std::filesystem::path& manifest_path, const PipelineConfig& cfg,
                       const std::filesystem::path& out_dir);

}  // namespace boldlle
