#pragma once

// Greedy sequential forward selection of diagnostic volumes, scored by the
// leave-one-out accuracy of the diagonal discriminant.

#include "boldlle/crossval.hpp"
#include "boldlle/lda.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

namespace boldlle {

struct SelectionResult {
  std::vector<Eigen::Index> volumes;         // in order of addition
  std::vector<double> accuracy_trace;        // LOOCV accuracy after each addition
  std::vector<Eigen::Index> correct_trace;   // same, as correct-subject counts
  double accuracy = 0;

  friend bool operator==(const SelectionResult&, const SelectionResult&) = default;
};

/// n x (V*c) design matrix for a volume set.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> design_matrix(
    std::span<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> subjects, std::span<const Eigen::Index> volumes) {
  const Eigen::Index n = static_cast<Eigen::Index>(subjects.size());
  const Eigen::Index v = n ? subjects[0].rows() : 0;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> x(n, v * static_cast<Eigen::Index>(volumes.size()));
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = flatten_volumes(subjects[static_cast<std::size_t>(i)], volumes).transpose();
  return x;
}

/// Start empty, add the volume with the best LOOCV accuracy, then keep adding
/// while some volume strictly raises the number of correctly classified
/// subjects. Ties go to the lowest volume index.
template <typename Scalar>
SelectionResult sfs_select(std::span<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> subjects,
                           std::span<const int> labels) {
  if (subjects.empty() || subjects.size() != labels.size())
    throw std::invalid_argument("sfs_select: need subjects with matching labels");
  const Eigen::Index d = subjects[0].cols();
  for (const auto& s : subjects)
    if (s.cols() != d || s.rows() != subjects[0].rows())
      throw std::invalid_argument("sfs_select: subjects differ in shape");

  SelectionResult res;
  std::vector<Eigen::Index> chosen;
  Eigen::Index current = -1;
  const auto n = static_cast<double>(subjects.size());
  while (static_cast<Eigen::Index>(chosen.size()) < d) {
    Eigen::Index best_t = -1, best_correct = -1;
    for (Eigen::Index t = 0; t < d; ++t) {
      if (std::find(chosen.begin(), chosen.end(), t) != chosen.end()) continue;
      std::vector<Eigen::Index> trial = chosen;
      trial.push_back(t);
      const auto x = design_matrix<Scalar>(subjects, trial);
      const auto r = loocv_lda(x, labels);
      if (r.correct > best_correct) {
        best_correct = r.correct;
        best_t = t;
      }
    }
    if (best_t < 0 || best_correct <= current) break;
    chosen.push_back(best_t);
    current = best_correct;
    res.correct_trace.push_back(best_correct);
    res.accuracy_trace.push_back(double(best_correct) / n);
  }
  res.volumes = std::move(chosen);
  res.accuracy = res.accuracy_trace.empty() ? 0.0 : res.accuracy_trace.back();
  return res;
}

}  // namespace boldlle
