#include "sahc/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace sahc {

LevelMetrics compute_level_metrics(const std::vector<int>& truth,
                                   const std::vector<int>& predicted,
                                   int num_classes) {
  if (truth.size() != predicted.size())
    throw std::invalid_argument(
        "compute_level_metrics: truth/prediction length mismatch");
  if (truth.empty())
    throw std::invalid_argument("compute_level_metrics: no samples");

  LevelMetrics m;
  m.confusion = Eigen::MatrixXi::Zero(num_classes, num_classes);
  for (size_t n = 0; n < truth.size(); ++n) {
    if (truth[n] < 0 || truth[n] >= num_classes || predicted[n] < 0 ||
        predicted[n] >= num_classes)
      throw std::out_of_range("compute_level_metrics: label out of range");
    m.confusion(truth[n], predicted[n]) += 1;
  }

  m.oa = static_cast<double>(m.confusion.trace()) /
         static_cast<double>(truth.size());

  m.per_class_f1.resize(num_classes, 0.0);
  double f1_sum = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    const double tp = m.confusion(c, c);
    const double support = m.confusion.row(c).sum();
    const double predicted_count = m.confusion.col(c).sum();
    double f1 = 0.0;
    if (support > 0 && predicted_count > 0 && tp > 0) {
      const double precision = tp / predicted_count;
      const double recall = tp / support;
      f1 = 2.0 * precision * recall / (precision + recall);
    }
    m.per_class_f1[c] = f1;
    f1_sum += f1;
  }
  m.macro_f1 = f1_sum / static_cast<double>(num_classes);
  return m;
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return out;
}

}  // namespace sahc
