#pragma once

// Synthetic hierarchical datasets and CSV ingestion.
//
// Generation draws a nested Gaussian mixture: coarse-class centers first,
// each child's center perturbed around its parent, samples around the leaf
// clusters. Feature geometry therefore mirrors the label tree. Everything is
// a pure function of (config, seed).

#include "sahc/hierarchy.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace sahc {

struct Sample {
  Eigen::VectorXd x;
  std::vector<int> labels;  // one per level, coarse first
};

struct Dataset {
  Eigen::MatrixXd features;              // N x b
  std::vector<std::vector<int>> labels;  // labels[h][n]

  int num_samples() const { return static_cast<int>(features.rows()); }
  int feature_dim() const { return static_cast<int>(features.cols()); }
  Sample sample(int n) const;
};

struct SyntheticConfig {
  int feature_dim = 16;
  int clusters_per_class = 1;
  double sigma_fine = 1.0;            // leaf spread
  std::vector<double> level_spread;   // per-level center spread multipliers
  double label_noise = 0.0;           // sibling flip rate, in [0, 1)
  int samples_per_class = 40;         // per fine class, >= 4
  std::uint64_t seed = 0;
};

struct GeneratedData {
  Dataset train, val, test;
  // Per-level class centers, |Omega^h| x b. Diagnostics for oracles.
  std::vector<Eigen::MatrixXd> level_centers;
};

// Balanced per-class 50/25/25 splits. Label noise flips a fine label to a
// uniformly random sibling under the same parent; the parent label stays
// intact. The same (config, seed) with a different noise rate yields the
// same features and true labels, differing only in the flips.
GeneratedData generate(const HierarchySpec& spec, const SyntheticConfig& config);

// CSV with header f0..f{b-1},y1..yH; fine-only files (f*,yH) get their
// coarse labels reconstructed through the hierarchy.
void save_csv(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path, const HierarchySpec& spec);

}  // namespace sahc
