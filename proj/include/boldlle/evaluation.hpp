#pragma once

// Evaluation harness: d grid, LOOCV-driven hyper-parameter sweep, holdout
// scoring, confusion metrics and binomial error bars.

#include "boldlle/grid.hpp"
#include "boldlle/lle.hpp"
#include "boldlle/selection.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace boldlle {

enum class Method { lle, pca, original };
enum class Partition { training, holdout };

std::string to_string(Method m);
Method parse_method(const std::string& s);
std::string to_string(Partition p);

/// round(exp(linspace(0, log T, n))), deduplicated; always holds 1 and T.
std::vector<Index> d_grid(Index T, Index n_points);

/// 1.96 * sqrt(p (1 - p) / n).
inline double binomial_error(double p, Index n) {
  if (n < 1) throw std::invalid_argument("binomial_error: n must be >= 1");
  return 1.96 * std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(n));
}

/// Majority-class proportion.
double chance_baseline(std::span<const int> labels);

struct Metric {
  std::optional<double> value;  // nullopt when the ratio is 0/0
  std::optional<double> half_width;
};

struct EvaluationReport {
  Partition partition = Partition::training;
  Metric specificity, sensitivity, precision, accuracy;
  double chance = 0;
  Index tp = 0, fp = 0, tn = 0, fn = 0;

  Index total() const { return tp + fp + tn + fn; }
};

/// Patient (label 1) is the positive class.
EvaluationReport confusion_metrics(std::span<const int> predictions, std::span<const int> labels,
                                   Partition partition = Partition::holdout);

/// Attach 95% normal-approximation half-widths (n = subject count) to every
/// defined metric.
void attach_half_widths(EvaluationReport& report);

/// Report for the classifier that always predicts the majority class (ties
/// to control).
EvaluationReport chance_report(std::span<const int> labels, Partition partition);

struct ReconstructionConfig {
  Method method = Method::lle;
  int radius = 2;
  LleOptions lle;
};

/// V x d features for one subject under the configured method; `original`
/// ignores d and returns the raw V x T samples.
Eigen::MatrixXd extract_features(const ScanVolume& scan, const ReconstructionConfig& cfg, Index d);

std::vector<Eigen::MatrixXd> extract_all(std::span<const ScanVolume> scans, const ReconstructionConfig& cfg, Index d,
                                         int threads);

std::vector<int> labels_of(std::span<const ScanVolume> scans);

struct SweepPoint {
  Index d = 0;
  bool ok = false;
  std::string error;
  SelectionResult selection;

  friend bool operator==(const SweepPoint&, const SweepPoint&) = default;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  Index chosen_d = 0;
  SelectionResult chosen;

  friend bool operator==(const SweepResult&, const SweepResult&) = default;
};

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// For each d: reconstruct every training subject, run SFS under LOOCV.
/// Chooses the d with the highest accuracy (ties: smaller d). A failing
/// grid point is recorded and skipped. `original` forces the grid to {T}.
SweepResult sweep(std::span<const ScanVolume> train, const ReconstructionConfig& cfg, std::span<const Index> grid,
                  int threads = 1);

struct TrainingOutcome {
  EvaluationReport report;
  std::vector<int> predictions;
};

/// LOOCV report at a fixed (d, volumes) on the training partition.
TrainingOutcome training_evaluate(std::span<const ScanVolume> train, Index d, std::span<const Index> volumes,
                                  const ReconstructionConfig& cfg, int threads = 1);

struct HoldoutOutcome {
  EvaluationReport report;
  std::vector<int> predictions;
};

/// Fit on the training subjects' selected volumes and predict each holdout
/// subject once. (d, volumes) must come from the training sweep.
HoldoutOutcome holdout_evaluate(std::span<const ScanVolume> train, std::span<const ScanVolume> holdout, Index d,
                                std::span<const Index> volumes, const ReconstructionConfig& cfg, int threads = 1);

/// Deterministic per-class shuffle split. Holdout takes max(min_holdout,
/// n/4) subjects in class proportion while leaving >= 2 per class in
/// training.
std::vector<Partition> stratified_split(std::span<const int> labels, Index min_holdout, std::uint64_t seed);

}  // namespace boldlle
