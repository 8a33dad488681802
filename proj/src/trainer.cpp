#include "sahc/trainer.hpp"

#include "sahc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sahc {

namespace {

std::vector<std::vector<int>> predictions(const Model& model,
                                          const Eigen::MatrixXd& x,
                                          InferenceMode mode) {
  std::vector<Eigen::MatrixXd> logits = model.eval_logits(x);
  if (mode == InferenceMode::kFineHead) {
    // fine-head inference never touches the joint matrices
    ProjectionSet empty(model.hierarchy().num_levels());
    return infer(logits, empty, mode);
  }
  return infer(logits, model.projections(), mode);
}

double selection_value(const MetricsReport& report, const std::string& metric,
                       int level) {
  const LevelMetrics& lm = report.levels.at(level);
  if (metric == "mf1") return lm.macro_f1;
  if (metric == "oa") return lm.oa;
  throw std::invalid_argument("train: unknown selection metric '" + metric +
                              "'");
}

}  // namespace

MetricsReport evaluate(const Model& model, const Dataset& data,
                       InferenceMode mode) {
  if (data.num_samples() == 0)
    throw std::invalid_argument("evaluate: empty dataset");
  if (data.feature_dim() != model.backbone_config().input_dim)
    throw std::invalid_argument("evaluate: feature width mismatch");
  MetricsReport report;
  const std::vector<std::vector<int>> preds =
      predictions(model, data.features, mode);
  for (int h = 0; h < model.hierarchy().num_levels(); ++h)
    report.levels.push_back(compute_level_metrics(
        data.labels[h], preds[h], model.hierarchy().class_count(h)));
  return report;
}

TrainResult train(Model& model, const Dataset& train_set,
                  const Dataset& val_set, const Dataset& test_set,
                  const TrainConfig& config) {
  const int h_count = model.hierarchy().num_levels();
  if (config.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (config.batch_size < 1)
    throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(config.opt.lr > 0.0))
    throw std::invalid_argument("train: learning rate must be > 0");
  if (train_set.num_samples() == 0 || val_set.num_samples() == 0 ||
      test_set.num_samples() == 0)
    throw std::invalid_argument("train: empty dataset");
  if (static_cast<int>(train_set.labels.size()) != h_count)
    throw std::invalid_argument("train: dataset level count mismatch");

  LossOptions loss_options;
  loss_options.level_weights = config.level_weights.empty()
                                   ? default_level_weights(h_count)
                                   : config.level_weights;
  loss_options.lambda_hc = config.lambda_hc;
  loss_options.multi_level = config.multi_level;
  loss_options.hc_loss = config.hc_loss;

  const InferenceMode mode = config.hc_inference ? InferenceMode::kConsensus
                                                 : InferenceMode::kFineHead;
  const int sel_level =
      config.selection_level < 0 ? h_count - 1 : config.selection_level;
  if (sel_level >= h_count)
    throw std::invalid_argument("train: selection level out of range");

  const int n = train_set.num_samples();
  const int steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const int total_steps = config.epochs * steps_per_epoch;

  AdamW optimizer(model.params(), config.opt);
  Rng shuffle_rng(config.seed * 6364136223846793005ULL + 1442695040888963407ULL);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;

  TrainResult result;
  result.inference_mode = mode;
  ParamSet best_params = model.params();
  bool have_best = false;
  int step_t = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    EpochRecord record;
    record.epoch = epoch;
    record.cce_per_level.assign(h_count, 0.0);
    double lr_first = 0.0;
    int seen = 0;

    for (int start = 0; start < n; start += config.batch_size) {
      const int count = std::min(config.batch_size, n - start);
      Eigen::MatrixXd x(count, train_set.feature_dim());
      std::vector<std::vector<int>> labels(h_count, std::vector<int>(count));
      for (int k = 0; k < count; ++k) {
        const int ix = order[start + k];
        x.row(k) = train_set.features.row(ix);
        for (int h = 0; h < h_count; ++h)
          labels[h][k] = train_set.labels[h][ix];
      }

      Tape tape;
      std::vector<Var> bound = model.bind(tape);
      LossBreakdown breakdown =
          model.loss(tape, bound, tape.input(x), labels, loss_options);
      if (!std::isfinite(breakdown.total))
        throw std::runtime_error(
            "train: diverged (non-finite loss) at epoch " +
            std::to_string(epoch) + ", step " + std::to_string(step_t));
      tape.backward(breakdown.total_var);

      const double lr_t = cosine_lr(config.opt.lr, step_t, total_steps);
      if (start == 0) lr_first = lr_t;
      std::vector<Eigen::MatrixXd> grads;
      grads.reserve(bound.size());
      for (Var v : bound) grads.push_back(tape.grad(v));
      optimizer.step(model.params(), grads, lr_t);
      ++step_t;

      record.loss_total += breakdown.total * count;
      record.loss_cce += breakdown.cce * count;
      record.loss_hc += breakdown.hc * count;
      for (int h = 0; h < h_count; ++h)
        record.cce_per_level[h] += breakdown.cce_per_level[h] * count;
      seen += count;
    }

    record.lr = lr_first;
    record.loss_total /= seen;
    record.loss_cce /= seen;
    record.loss_hc /= seen;
    for (double& v : record.cce_per_level) v /= seen;

    record.val = evaluate(model, val_set, mode);
    record.val.seed = config.seed;
    const double metric =
        selection_value(record.val, config.selection_metric, sel_level);
    if (!have_best || metric > result.best_metric) {
      have_best = true;
      result.best_metric = metric;
      result.best_epoch = epoch;
      result.val_best = record.val;
      best_params = model.params();
    }
    result.history.push_back(std::move(record));
  }

  model.params() = best_params;
  result.test = evaluate(model, test_set, mode);
  result.test.seed = config.seed;
  return result;
}

nlohmann::ordered_json metrics_report_json(const MetricsReport& report) {
  nlohmann::ordered_json levels = nlohmann::ordered_json::array();
  for (const auto& lm : report.levels) {
    nlohmann::ordered_json confusion = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < lm.confusion.rows(); ++i) {
      nlohmann::ordered_json row = nlohmann::ordered_json::array();
      for (Eigen::Index j = 0; j < lm.confusion.cols(); ++j)
        row.push_back(lm.confusion(i, j));
      confusion.push_back(std::move(row));
    }
    levels.push_back({{"oa", lm.oa},
                      {"mf1", lm.macro_f1},
                      {"f1", lm.per_class_f1},
                      {"confusion", std::move(confusion)}});
  }
  return {{"seed", report.seed}, {"levels", std::move(levels)}};
}

namespace {

nlohmann::ordered_json config_json(const TrainConfig& config,
                                   const Model& model) {
  const int h_count = model.hierarchy().num_levels();
  return {
      {"epochs", config.epochs},
      {"batch_size", config.batch_size},
      {"lr", config.opt.lr},
      {"weight_decay", config.opt.weight_decay},
      {"beta1", config.opt.beta1},
      {"beta2", config.opt.beta2},
      {"eps", config.opt.eps},
      {"level_weights", config.level_weights.empty()
                            ? default_level_weights(h_count)
                            : config.level_weights},
      {"lambda_hc", config.lambda_hc},
      {"multi_level", config.multi_level},
      {"hc_loss", config.hc_loss},
      {"hc_inference", config.hc_inference},
      {"seed", config.seed},
      {"selection_metric", config.selection_metric},
      {"selection_level",
       config.selection_level < 0 ? h_count - 1 : config.selection_level}};
}

nlohmann::ordered_json level_summaries(const MetricsReport& report) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& lm : report.levels)
    out.push_back({{"oa", lm.oa}, {"mf1", lm.macro_f1}});
  return out;
}

}  // namespace

nlohmann::ordered_json train_result_json(const TrainConfig& config,
                                         const Model& model,
                                         const TrainResult& result) {
  nlohmann::ordered_json epochs = nlohmann::ordered_json::array();
  for (const auto& record : result.history) {
    epochs.push_back({{"epoch", record.epoch},
                      {"lr", record.lr},
                      {"loss",
                       {{"total", record.loss_total},
                        {"cce", record.loss_cce},
                        {"hc", record.loss_hc},
                        {"cce_per_level", record.cce_per_level}}},
                      {"val", level_summaries(record.val)}});
  }
  return {{"config", config_json(config, model)},
          {"inference",
           result.inference_mode == InferenceMode::kConsensus ? "consensus"
                                                              : "fine"},
          {"epochs", std::move(epochs)},
          {"best_epoch", result.best_epoch},
          {"best_metric", result.best_metric},
          {"val_best", metrics_report_json(result.val_best)},
          {"test", metrics_report_json(result.test)}};
}

nlohmann::ordered_json aggregate_runs_json(
    const std::vector<nlohmann::ordered_json>& run_reports) {
  if (run_reports.empty())
    throw std::invalid_argument("aggregate_runs_json: no runs");
  nlohmann::ordered_json out;
  nlohmann::ordered_json seeds = nlohmann::ordered_json::array();
  for (const auto& run : run_reports)
    seeds.push_back(run.at("config").at("seed"));
  out["seeds"] = std::move(seeds);

  const size_t level_count = run_reports[0].at("test").at("levels").size();
  nlohmann::ordered_json levels = nlohmann::ordered_json::array();
  for (size_t h = 0; h < level_count; ++h) {
    nlohmann::ordered_json entry;
    for (const char* metric : {"oa", "mf1"}) {
      std::vector<double> values;
      for (const auto& run : run_reports)
        values.push_back(
            run.at("test").at("levels").at(h).at(metric).get<double>());
      const MeanStd ms = mean_std(values);
      entry[metric] = {{"mean", ms.mean}, {"std", ms.std}};
    }
    levels.push_back(std::move(entry));
  }
  out["test"] = {{"levels", std::move(levels)}};
  return out;
}

}  // namespace sahc
