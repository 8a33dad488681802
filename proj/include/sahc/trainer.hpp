#pragma once

// Training loop: adaptive updates with decoupled weight decay, cosine
// learning-rate decay over all steps, per-epoch validation, and selection of
// the best epoch on a configured validation metric. A fixed (config, seed,
// data) triple determines every reported number.

#include "sahc/data.hpp"
#include "sahc/metrics.hpp"
#include "sahc/model.hpp"
#include "sahc/optim.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace sahc {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 32;
  AdamWConfig opt;
  std::vector<double> level_weights;  // empty -> defaults for H
  double lambda_hc = 1.0;
  bool multi_level = true;
  bool hc_loss = true;
  bool hc_inference = true;
  std::uint64_t seed = 0;
  std::string selection_metric = "mf1";  // "mf1" | "oa"
  int selection_level = -1;              // -1 -> finest level
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double loss_total = 0.0;
  double loss_cce = 0.0;
  double loss_hc = 0.0;
  std::vector<double> cce_per_level;
  MetricsReport val;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_metric = 0.0;
  MetricsReport val_best;
  MetricsReport test;
  InferenceMode inference_mode = InferenceMode::kConsensus;
};

MetricsReport evaluate(const Model& model, const Dataset& data,
                       InferenceMode mode);

// Trains in place; the model ends up holding the best epoch's parameters.
TrainResult train(Model& model, const Dataset& train_set,
                  const Dataset& val_set, const Dataset& test_set,
                  const TrainConfig& config);

nlohmann::ordered_json metrics_report_json(const MetricsReport& report);
nlohmann::ordered_json train_result_json(const TrainConfig& config,
                                         const Model& model,
                                         const TrainResult& result);

// Mean and unbiased standard deviation of the per-seed final metrics.
nlohmann::ordered_json aggregate_runs_json(
    const std::vector<nlohmann::ordered_json>& run_reports);

}  // namespace sahc
