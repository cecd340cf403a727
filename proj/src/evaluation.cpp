#include "boldlle/evaluation.hpp"

#include "boldlle/crossval.hpp"
#include "boldlle/parallel.hpp"
#include "boldlle/pca.hpp"
#include "boldlle/sym_eigs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace boldlle {

std::string to_string(Method m) {
  switch (m) {
    case Method::lle: return "lle";
    case Method::pca: return "pca";
    case Method::original: return "original";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "lle") return Method::lle;
  if (s == "pca") return Method::pca;
  if (s == "original") return Method::original;
  throw std::invalid_argument("unknown method '" + s + "' (expected lle, pca or original)");
}

std::string to_string(Partition p) { return p == Partition::training ? "training" : "holdout"; }

std::vector<Index> d_grid(Index T, Index n_points) {
  if (T < 1 || n_points < 1) throw std::invalid_argument("d_grid: need T >= 1 and n_points >= 1");
  std::vector<Index> g{1, T};
  const double lt = std::log(static_cast<double>(T));
  for (Index k = 0; k < n_points; ++k) {
    const double frac = n_points == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(n_points - 1);
    g.push_back(std::clamp<Index>(std::llround(std::exp(lt * frac)), 1, T));
  }
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

double chance_baseline(std::span<const int> labels) {
  if (labels.empty()) throw std::invalid_argument("chance_baseline: no labels");
  const auto n1 = std::count(labels.begin(), labels.end(), 1);
  const auto n0 = static_cast<std::ptrdiff_t>(labels.size()) - n1;
  return static_cast<double>(std::max(n0, n1)) / static_cast<double>(labels.size());
}

namespace {

std::optional<double> ratio(Index num, Index den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

EvaluationReport confusion_metrics(std::span<const int> predictions, std::span<const int> labels, Partition partition) {
  if (predictions.size() != labels.size()) throw std::invalid_argument("confusion_metrics: length mismatch");
  EvaluationReport r;
  r.partition = partition;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool truth = labels[i] == 1, pred = predictions[i] == 1;
    if (truth && pred) ++r.tp;
    else if (truth) ++r.fn;
    else if (pred) ++r.fp;
    else ++r.tn;
  }
  r.sensitivity.value = ratio(r.tp, r.tp + r.fn);
  r.specificity.value = ratio(r.tn, r.tn + r.fp);
  r.precision.value = ratio(r.tp, r.tp + r.fp);
  r.accuracy.value = ratio(r.tp + r.tn, r.total());
  if (!labels.empty()) r.chance = chance_baseline(labels);
  return r;
}

void attach_half_widths(EvaluationReport& report) {
  const Index n = report.total();
  if (n < 1) return;
  for (Metric* m : {&report.specificity, &report.sensitivity, &report.precision, &report.accuracy})
    if (m->value) m->half_width = binomial_error(*m->value, n);
}

EvaluationReport chance_report(std::span<const int> labels, Partition partition) {
  const auto n1 = std::count(labels.begin(), labels.end(), 1);
  const int majority = n1 * 2 > static_cast<std::ptrdiff_t>(labels.size()) ? 1 : 0;
  std::vector<int> preds(labels.size(), majority);
  auto r = confusion_metrics(preds, labels, partition);
  if (partition == Partition::training) attach_half_widths(r);
  return r;
}

Eigen::MatrixXd extract_features(const ScanVolume& scan, const ReconstructionConfig& cfg, Index d) {
  switch (cfg.method) {
    case Method::original:
      validate_scan(scan);
      return scan.samples;
    case Method::pca:
      validate_scan(scan);
      return pca_reconstruct(scan.samples, d);
    case Method::lle:
      return reconstruct_scan(scan, cfg.radius, d, cfg.lle).modes;
  }
  throw std::logic_error("extract_features: unknown method");
}

std::vector<Eigen::MatrixXd> extract_all(std::span<const ScanVolume> scans, const ReconstructionConfig& cfg, Index d,
                                         int threads) {
  std::vector<Eigen::MatrixXd> out(scans.size());
  parallel_for(scans.size(), threads, [&](std::size_t i) { out[i] = extract_features(scans[i], cfg, d); });
  return out;
}

std::vector<int> labels_of(std::span<const ScanVolume> scans) {
  std::vector<int> y;
  y.reserve(scans.size());
  for (const auto& s : scans) {
    if (!s.label) throw EvaluationError("subject '" + s.subject_id + "' has no label");
    y.push_back(*s.label);
  }
  return y;
}

SweepResult sweep(std::span<const ScanVolume> train, const ReconstructionConfig& cfg, std::span<const Index> grid,
                  int threads) {
  if (train.empty()) throw EvaluationError("sweep: empty training partition");
  const auto labels = labels_of(train);
  std::vector<Index> ds(grid.begin(), grid.end());
  if (cfg.method == Method::original) ds = {train[0].dims.T};
  if (ds.empty()) throw EvaluationError("sweep: empty d grid");

  SweepResult res;
  double best = -1.0;
  for (Index d : ds) {
    SweepPoint pt;
    pt.d = d;
    try {
      const auto feats = extract_all(train, cfg, d, threads);
      pt.selection = sfs_select<double>(feats, labels);
      pt.ok = true;
    } catch (const std::exception& e) {
      pt.error = e.what();
    }
    if (pt.ok && pt.selection.accuracy > best) {
      best = pt.selection.accuracy;
      res.chosen_d = d;
      res.chosen = pt.selection;
    }
    res.points.push_back(std::move(pt));
  }
  if (best < 0) {
    std::string msg = "sweep: every grid point failed";
    if (!res.points.empty()) msg += " (first: " + res.points.front().error + ")";
    throw EvaluationError(msg);
  }
  return res;
}

TrainingOutcome training_evaluate(std::span<const ScanVolume> train, Index d, std::span<const Index> volumes,
                                  const ReconstructionConfig& cfg, int threads) {
  const auto labels = labels_of(train);
  const auto feats = extract_all(train, cfg, d, threads);
  const auto x = design_matrix<double>(feats, volumes);
  const auto cv = loocv_lda(x, labels);
  require_valid(cv);
  TrainingOutcome out;
  out.predictions = cv.predictions;
  out.report = confusion_metrics(cv.predictions, labels, Partition::training);
  attach_half_widths(out.report);
  return out;
}

HoldoutOutcome holdout_evaluate(std::span<const ScanVolume> train, std::span<const ScanVolume> holdout, Index d,
                                std::span<const Index> volumes, const ReconstructionConfig& cfg, int threads) {
  if (holdout.empty()) throw EvaluationError("holdout_evaluate: empty holdout partition");
  if (volumes.empty()) throw EvaluationError("holdout_evaluate: no diagnostic volumes");
  const auto train_labels = labels_of(train);
  const auto train_feats = extract_all(train, cfg, d, threads);
  const auto model = lda_fit(design_matrix<double>(train_feats, volumes), train_labels);

  const auto hold_feats = extract_all(holdout, cfg, d, threads);
  HoldoutOutcome out;
  out.predictions.reserve(holdout.size());
  for (const auto& f : hold_feats) out.predictions.push_back(lda_predict(model, flatten_volumes(f, volumes)).label);
  const auto hold_labels = labels_of(holdout);
  out.report = confusion_metrics(out.predictions, hold_labels, Partition::holdout);
  return out;
}

std::vector<Partition> stratified_split(std::span<const int> labels, Index min_holdout, std::uint64_t seed) {
  const Index n = static_cast<Index>(labels.size());
  std::vector<Index> cls[2];
  for (Index i = 0; i < n; ++i) cls[labels[static_cast<std::size_t>(i)] == 1 ? 1 : 0].push_back(i);
  std::uint64_t state = seed;
  for (auto& members : cls)
    for (std::size_t i = members.size(); i > 1; --i) {
      const std::size_t j = detail::splitmix64(state) % i;
      std::swap(members[i - 1], members[j]);
    }

  Index want = std::max<Index>(min_holdout, n / 4);
  const Index cap = std::max<Index>(0, static_cast<Index>(cls[0].size()) - 2) +
                    std::max<Index>(0, static_cast<Index>(cls[1].size()) - 2);
  want = std::min(want, cap);
  Index take1 = n ? static_cast<Index>(std::llround(double(want) * double(cls[1].size()) / double(n))) : 0;
  take1 = std::clamp<Index>(take1, 0, std::max<Index>(0, static_cast<Index>(cls[1].size()) - 2));
  Index take0 = std::clamp<Index>(want - take1, 0, std::max<Index>(0, static_cast<Index>(cls[0].size()) - 2));
  take1 = std::min<Index>(want - take0, std::max<Index>(0, static_cast<Index>(cls[1].size()) - 2));

  std::vector<Partition> out(static_cast<std::size_t>(n), Partition::training);
  for (Index k = 0; k < take0; ++k) out[static_cast<std::size_t>(cls[0][static_cast<std::size_t>(k)])] = Partition::holdout;
  for (Index k = 0; k < take1; ++k) out[static_cast<std::size_t>(cls[1][static_cast<std::size_t>(k)])] = Partition::holdout;
  return out;
}

}  // namespace boldlle
