#pragma once

#include "boldlle/lda.hpp"

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace boldlle {

struct LoocvResult {
  std::vector<int> predictions;        // -1 for invalid folds
  std::vector<Eigen::Index> invalid_folds;
  Eigen::Index correct = 0;
  double accuracy = 0;
};

class InvalidFoldError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Leave-one-out over the rows of x. A fold whose training part lacks a class
/// is recorded as invalid and counted as a miss.
template <typename Derived>
LoocvResult loocv_lda(const Eigen::MatrixBase<Derived>& x, std::span<const int> labels) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = x.rows();
  if (n < 2 || static_cast<std::size_t>(n) != labels.size())
    throw std::invalid_argument("loocv: need n >= 2 samples with matching labels");
  LoocvResult r;
  r.predictions.assign(static_cast<std::size_t>(n), -1);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> train(n - 1, x.cols());
  std::vector<int> train_labels(static_cast<std::size_t>(n - 1));
  for (Eigen::Index held = 0; held < n; ++held) {
    int c0 = 0, c1 = 0;
    for (Eigen::Index i = 0, row = 0; i < n; ++i) {
      if (i == held) continue;
      train.row(row) = x.row(i);
      const int y = labels[static_cast<std::size_t>(i)];
      train_labels[static_cast<std::size_t>(row)] = y;
      (y == 0 ? c0 : c1)++;
      ++row;
    }
    if (c0 == 0 || c1 == 0) {
      r.invalid_folds.push_back(held);
      continue;
    }
    const auto model = lda_fit(train, train_labels);
    const int pred = lda_predict(model, x.row(held).transpose()).label;
    r.predictions[static_cast<std::size_t>(held)] = pred;
    if (pred == labels[static_cast<std::size_t>(held)]) ++r.correct;
  }
  r.accuracy = double(r.correct) / double(n);
  return r;
}

inline void require_valid(const LoocvResult& r) {
  if (r.invalid_folds.empty()) return;
  std::string ids;
  for (auto f : r.invalid_folds) ids += (ids.empty() ? "" : ",") + std::to_string(f);
  throw InvalidFoldError("LOOCV folds with single-class training data: " + ids);
}

}  // namespace boldlle
