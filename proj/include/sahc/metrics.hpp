#pragma once

// Confusion matrices, overall accuracy, and macro-averaged F1.

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace sahc {

struct LevelMetrics {
  double oa = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> per_class_f1;
  Eigen::MatrixXi confusion;  // rows: ground truth, cols: prediction
};

struct MetricsReport {
  std::vector<LevelMetrics> levels;
  std::uint64_t seed = 0;
};

// Confusion-matrix route: OA is the trace over the total, per-class F1 comes
// from precision and recall, and classes absent from both truth and
// prediction contribute F1 = 0 to the macro average.
LevelMetrics compute_level_metrics(const std::vector<int>& truth,
                                   const std::vector<int>& predicted,
                                   int num_classes);

// Mean and unbiased (n-1) standard deviation.
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};
MeanStd mean_std(const std::vector<double>& values);

}  // namespace sahc
