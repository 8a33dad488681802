// Command-line surface: dataset generation, training, evaluation, inference,
// hierarchy-matrix export, and gradient checking. One JSON config file is the
// source of truth; any key can be overridden on the command line with dotted
// flags, e.g. --train.lr 1e-3.

#include "sahc/checkpoint.hpp"
#include "sahc/data.hpp"
#include "sahc/gradcheck.hpp"
#include "sahc/hierarchy.hpp"
#include "sahc/model.hpp"
#include "sahc/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

bool g_quiet = false;

void progress(const std::string& line) {
  if (!g_quiet) std::cerr << line << "\n";
}

std::string read_text_file(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << file.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream file(path);
  if (!file) throw std::runtime_error("cannot open " + path + " for writing");
  file << content;
  if (!file) throw std::runtime_error("write failed for " + path);
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  json cfg = json::parse(read_text_file(path));
  if (!cfg.is_object()) throw std::runtime_error("config must be a JSON object");
  return cfg;
}

// Applies leftover arguments of the form --a.b.c VALUE (or --a.b.c=VALUE)
// onto the config. Values parse as JSON when possible, else as strings.
void apply_overrides(json& cfg, std::vector<std::string> extras) {
  for (size_t i = 0; i < extras.size(); ++i) {
    std::string key = extras[i];
    if (key.rfind("--", 0) != 0)
      throw std::runtime_error("unexpected argument '" + key + "'");
    key = key.substr(2);
    std::string value;
    const size_t eq = key.find('=');
    if (eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else {
      if (++i >= extras.size())
        throw std::runtime_error("missing value for --" + key);
      value = extras[i];
    }
    std::string pointer = "/" + key;
    for (auto& c : pointer)
      if (c == '.') c = '/';
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::exception&) {
      parsed = value;
    }
    cfg[json::json_pointer(pointer)] = parsed;
  }
}

template <typename T>
T get_or(const json& cfg, const json::json_pointer& key, T fallback) {
  if (!cfg.contains(key)) return fallback;
  return cfg.at(key).get<T>();
}

sahc::SyntheticConfig synthetic_config(const json& cfg) {
  sahc::SyntheticConfig sc;
  const json::json_pointer base("/data/synthetic");
  sc.feature_dim = get_or(cfg, base / "feature_dim", sc.feature_dim);
  sc.clusters_per_class =
      get_or(cfg, base / "clusters_per_class", sc.clusters_per_class);
  sc.sigma_fine = get_or(cfg, base / "sigma_fine", sc.sigma_fine);
  sc.level_spread =
      get_or(cfg, base / "level_spread", std::vector<double>{});
  sc.label_noise = get_or(cfg, base / "label_noise", sc.label_noise);
  sc.samples_per_class =
      get_or(cfg, base / "samples_per_class", sc.samples_per_class);
  sc.seed = get_or(cfg, base / "seed", sc.seed);
  return sc;
}

ordered_json synthetic_json(const sahc::SyntheticConfig& sc) {
  return {{"feature_dim", sc.feature_dim},
          {"clusters_per_class", sc.clusters_per_class},
          {"sigma_fine", sc.sigma_fine},
          {"level_spread", sc.level_spread},
          {"label_noise", sc.label_noise},
          {"samples_per_class", sc.samples_per_class},
          {"seed", sc.seed}};
}

sahc::HierarchySpec load_hierarchy(const json& cfg) {
  const std::string path = get_or(cfg, json::json_pointer("/hierarchy"),
                                  std::string());
  if (path.empty())
    throw std::runtime_error("config: 'hierarchy' file path is required");
  return sahc::HierarchySpec::parse(read_text_file(path));
}

sahc::BackboneConfig backbone_config(const json& cfg, int input_dim) {
  sahc::BackboneConfig bb;
  const json::json_pointer base("/backbone");
  bb.input_dim = get_or(cfg, base / "input_dim", 0);
  if (bb.input_dim == 0) bb.input_dim = input_dim;
  if (bb.input_dim != input_dim)
    throw std::runtime_error(
        "config: backbone.input_dim does not match the data feature width");
  bb.hidden = get_or(cfg, base / "hidden", std::vector<int>{32});
  bb.feature_dim = get_or(cfg, base / "feature_dim", 16);
  bb.nonlinearity =
      get_or(cfg, base / "nonlinearity", std::string("tanh"));
  bb.validate();
  return bb;
}

sahc::JointInit joint_init_config(const json& cfg) {
  const std::string mode = get_or(cfg, json::json_pointer("/model/joint_init"),
                                  std::string("uniform"));
  if (mode == "uniform") return sahc::JointInit::kUniform;
  if (mode == "indicator") return sahc::JointInit::kIndicator;
  throw std::runtime_error("config: model.joint_init must be 'uniform' or "
                           "'indicator'");
}

sahc::TrainConfig train_config(const json& cfg) {
  sahc::TrainConfig tc;
  const json::json_pointer base("/train");
  tc.epochs = get_or(cfg, base / "epochs", tc.epochs);
  tc.batch_size = get_or(cfg, base / "batch_size", tc.batch_size);
  tc.opt.lr = get_or(cfg, base / "lr", tc.opt.lr);
  tc.opt.weight_decay = get_or(cfg, base / "weight_decay", tc.opt.weight_decay);
  tc.opt.beta1 = get_or(cfg, base / "beta1", tc.opt.beta1);
  tc.opt.beta2 = get_or(cfg, base / "beta2", tc.opt.beta2);
  tc.opt.eps = get_or(cfg, base / "eps", tc.opt.eps);
  tc.level_weights =
      get_or(cfg, base / "level_weights", std::vector<double>{});
  tc.lambda_hc = get_or(cfg, base / "lambda_hc", tc.lambda_hc);
  tc.multi_level = get_or(cfg, base / "multi_level", tc.multi_level);
  tc.hc_loss = get_or(cfg, base / "hc_loss", tc.hc_loss);
  tc.hc_inference = get_or(cfg, base / "hc_inference", tc.hc_inference);
  tc.seed = get_or(cfg, base / "seed", tc.seed);
  tc.selection_metric =
      get_or(cfg, base / "selection_metric", tc.selection_metric);
  tc.selection_level =
      get_or(cfg, base / "selection_level", tc.selection_level);
  return tc;
}

struct LoadedData {
  sahc::Dataset train, val, test;
  std::optional<sahc::SyntheticConfig> synth;
};

LoadedData load_data(const json& cfg, const sahc::HierarchySpec& spec) {
  LoadedData out;
  const json::json_pointer train_key("/data/train");
  if (cfg.contains(train_key)) {
    out.train = sahc::load_dataset(cfg.at(train_key).get<std::string>(), spec);
    out.val = sahc::load_dataset(
        cfg.at(json::json_pointer("/data/val")).get<std::string>(), spec);
    out.test = sahc::load_dataset(
        cfg.at(json::json_pointer("/data/test")).get<std::string>(), spec);
    return out;
  }
  if (!cfg.contains(json::json_pointer("/data/synthetic")))
    throw std::runtime_error(
        "config: need either data.train/val/test paths or data.synthetic");
  out.synth = synthetic_config(cfg);
  sahc::GeneratedData gen = sahc::generate(spec, *out.synth);
  out.train = std::move(gen.train);
  out.val = std::move(gen.val);
  out.test = std::move(gen.test);
  return out;
}

sahc::InferenceMode parse_mode(const std::string& name) {
  if (name == "consensus") return sahc::InferenceMode::kConsensus;
  if (name == "fine") return sahc::InferenceMode::kFineHead;
  throw std::runtime_error("--inference must be 'consensus' or 'fine'");
}

int cmd_gen_data(const json& cfg, const std::string& out_dir) {
  sahc::HierarchySpec spec = load_hierarchy(cfg);
  if (!cfg.contains(json::json_pointer("/data/synthetic")))
    throw std::runtime_error("gen-data: config needs a data.synthetic block");
  const sahc::SyntheticConfig sc = synthetic_config(cfg);
  sahc::GeneratedData gen = sahc::generate(spec, sc);
  fs::create_directories(out_dir);
  sahc::save_csv(gen.train, out_dir + "/train.csv");
  sahc::save_csv(gen.val, out_dir + "/val.csv");
  sahc::save_csv(gen.test, out_dir + "/test.csv");

  ordered_json manifest;
  manifest["command"] = "gen-data";
  manifest["hierarchy"] = cfg.at("hierarchy").get<std::string>();
  manifest["synthetic"] = synthetic_json(sc);
  manifest["outputs"] = {{"train", "train.csv"},
                         {"val", "val.csv"},
                         {"test", "test.csv"}};
  manifest["counts"] = {{"train", gen.train.num_samples()},
                        {"val", gen.val.num_samples()},
                        {"test", gen.test.num_samples()}};
  write_text_file(out_dir + "/manifest.json", manifest.dump(2) + "\n");
  progress("gen-data: wrote " + out_dir);
  return 0;
}

ordered_json run_one_training(const json& cfg, const sahc::HierarchySpec& spec,
                              const LoadedData& data,
                              const sahc::TrainConfig& tc,
                              const std::string& out_dir) {
  sahc::BackboneConfig bb = backbone_config(cfg, data.train.feature_dim());
  sahc::Model model(spec, bb, joint_init_config(cfg), tc.seed);
  sahc::TrainResult result =
      sahc::train(model, data.train, data.val, data.test, tc);

  ordered_json report = sahc::train_result_json(tc, model, result);
  report["config"]["hierarchy"] = cfg.at("hierarchy").get<std::string>();
  if (data.synth)
    report["config"]["synthetic"] = synthetic_json(*data.synth);
  else
    report["config"]["data"] = {
        {"train", cfg.at(json::json_pointer("/data/train"))},
        {"val", cfg.at(json::json_pointer("/data/val"))},
        {"test", cfg.at(json::json_pointer("/data/test"))}};
  report["config"]["backbone"] = {{"input_dim", bb.input_dim},
                                  {"hidden", bb.hidden},
                                  {"feature_dim", bb.feature_dim},
                                  {"nonlinearity", bb.nonlinearity}};
  report["config"]["joint_init"] =
      joint_init_config(cfg) == sahc::JointInit::kUniform ? "uniform"
                                                          : "indicator";

  fs::create_directories(out_dir);
  write_text_file(out_dir + "/metrics.json", report.dump(2) + "\n");
  sahc::save_checkpoint(out_dir + "/checkpoint.bin", model);
  const auto& fine = result.test.levels.back();
  std::ostringstream line;
  line << "train: seed " << tc.seed << " best epoch " << result.best_epoch
       << " test fine oa " << fine.oa << " mf1 " << fine.macro_f1;
  progress(line.str());
  return report;
}

int cmd_train(const json& cfg, const std::string& out_dir, int seeds) {
  sahc::HierarchySpec spec = load_hierarchy(cfg);
  LoadedData data = load_data(cfg, spec);
  sahc::TrainConfig tc = train_config(cfg);
  if (seeds < 1) throw std::runtime_error("train: --seeds must be >= 1");

  if (seeds == 1) {
    run_one_training(cfg, spec, data, tc, out_dir);
    return 0;
  }
  std::vector<ordered_json> reports;
  for (int i = 0; i < seeds; ++i) {
    sahc::TrainConfig seeded = tc;
    seeded.seed = tc.seed + static_cast<std::uint64_t>(i);
    reports.push_back(run_one_training(
        cfg, spec, data, seeded,
        out_dir + "/run_" + std::to_string(seeded.seed)));
  }
  write_text_file(out_dir + "/aggregate.json",
                  sahc::aggregate_runs_json(reports).dump(2) + "\n");
  progress("train: wrote aggregate for " + std::to_string(seeds) + " seeds");
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data_path,
             const std::string& mode_name, const std::string& out_path) {
  sahc::Model model = sahc::load_checkpoint(checkpoint_path);
  sahc::Dataset data = sahc::load_dataset(data_path, model.hierarchy());
  sahc::MetricsReport report =
      sahc::evaluate(model, data, parse_mode(mode_name));
  report.seed = model.init_seed();
  ordered_json doc = {{"checkpoint", checkpoint_path},
                      {"data", data_path},
                      {"inference", mode_name},
                      {"report", sahc::metrics_report_json(report)}};
  const std::string text = doc.dump(2) + "\n";
  if (out_path.empty())
    std::cout << text;
  else
    write_text_file(out_path, text);
  return 0;
}

int cmd_infer(const std::string& checkpoint_path, const std::string& data_path,
              const std::string& mode_name, const std::string& out_path) {
  sahc::Model model = sahc::load_checkpoint(checkpoint_path);
  sahc::Dataset data = sahc::load_dataset(data_path, model.hierarchy());
  std::vector<Eigen::MatrixXd> logits = model.eval_logits(data.features);
  std::vector<std::vector<int>> preds =
      sahc::infer(logits, model.projections(), parse_mode(mode_name));

  std::ostringstream out;
  out << "index";
  for (int h = 0; h < model.hierarchy().num_levels(); ++h)
    out << ",pred_y" << (h + 1);
  out << "\n";
  for (int n = 0; n < data.num_samples(); ++n) {
    out << n;
    for (const auto& level : preds) out << "," << level[n];
    out << "\n";
  }
  if (out_path.empty())
    std::cout << out.str();
  else
    write_text_file(out_path, out.str());
  return 0;
}

void write_named_matrix_csv(const std::string& path,
                            const Eigen::MatrixXd& matrix,
                            const std::vector<std::string>& row_names,
                            const std::vector<std::string>& col_names) {
  std::ostringstream out;
  out << "class";
  for (const auto& name : col_names) out << "," << name;
  out << "\n";
  char buf[32];
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    out << row_names[i];
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", matrix(i, j));
      out << "," << buf;
    }
    out << "\n";
  }
  write_text_file(path, out.str());
}

int cmd_export_matrices(const std::string& checkpoint_path,
                        const std::string& out_dir) {
  sahc::Model model = sahc::load_checkpoint(checkpoint_path);
  const sahc::HierarchySpec& spec = model.hierarchy();
  fs::create_directories(out_dir);
  int files = 0;
  for (const auto& joint : model.joints()) {
    const auto& fine_names = spec.class_names(joint.fine_level);
    const auto& coarse_names = spec.class_names(joint.coarse_level);
    const std::string tag = "l" + std::to_string(joint.coarse_level + 1) +
                            "l" + std::to_string(joint.fine_level + 1);
    write_named_matrix_csv(out_dir + "/joint_" + tag + ".csv", joint.log_j,
                           fine_names, coarse_names);
    ++files;
    for (bool fine_to_coarse : {true, false}) {
      sahc::ProjectionMatrix proj =
          sahc::projection_from_joint(joint, fine_to_coarse);
      const auto& src_names = spec.class_names(proj.source_level);
      const auto& dst_names = spec.class_names(proj.target_level);
      write_named_matrix_csv(
          out_dir + "/proj_l" + std::to_string(proj.source_level + 1) +
              "_to_l" + std::to_string(proj.target_level + 1) + ".csv",
          proj.log_m.array().exp().matrix(), src_names, dst_names);
      ++files;
    }
  }
  progress("export-matrices: wrote " + std::to_string(files) + " files to " +
           out_dir);
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, int trials, const std::string& corrupt) {
  if (!corrupt.empty()) sahc::Tape::corrupt_backward(corrupt);
  sahc::GradCheckReport report = sahc::run_gradcheck(seed, trials);
  sahc::Tape::clear_backward_corruption();
  std::cout << sahc::format_gradcheck_report(report);
  return report.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical consensus classification engine"};
  app.require_subcommand(1);
  app.allow_extras();

  std::string config_path, out_dir = "out", out_file;
  std::string checkpoint_path, data_path, mode_name = "consensus";
  std::string corrupt_op;
  std::uint64_t seed = 0;
  bool seed_set = false, quiet = false;
  int seeds = 1, trials = 3;
  bool no_multi_level = false, no_hc_loss = false, no_hc_inference = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_flag("--quiet", quiet, "suppress progress output");
    sub->add_option("--seed", seed, "override the run seed")
        ->each([&](const std::string&) { seed_set = true; });
    sub->allow_extras();
    return sub;
  };

  CLI::App* gen = add_common(app.add_subcommand("gen-data",
                                                "generate synthetic datasets"));
  gen->add_option("--out", out_dir, "output directory");

  CLI::App* train = add_common(app.add_subcommand("train", "train a model"));
  train->add_option("--out", out_dir, "output directory");
  train->add_option("--seeds", seeds, "number of seeded runs");
  train->add_flag("--no-multi-level", no_multi_level,
                  "train only the finest-level head");
  train->add_flag("--no-hc-loss", no_hc_loss, "disable the consensus loss");
  train->add_flag("--no-hc-inference", no_hc_inference,
                  "use per-head inference instead of consensus");

  CLI::App* eval = add_common(app.add_subcommand("eval", "evaluate a checkpoint"));
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")
      ->required();
  eval->add_option("--data", data_path, "dataset CSV")->required();
  eval->add_option("--inference", mode_name, "consensus|fine");
  eval->add_option("--out", out_file, "metrics JSON path (default stdout)");

  CLI::App* infer = add_common(app.add_subcommand("infer",
                                                  "predict labels per level"));
  infer->add_option("--checkpoint", checkpoint_path, "checkpoint file")
      ->required();
  infer->add_option("--data", data_path, "dataset CSV")->required();
  infer->add_option("--inference", mode_name, "consensus|fine");
  infer->add_option("--out", out_file, "predictions CSV path (default stdout)");

  CLI::App* xport = add_common(app.add_subcommand(
      "export-matrices", "write log-joint and projection CSVs"));
  xport->add_option("--checkpoint", checkpoint_path, "checkpoint file")
      ->required();
  xport->add_option("--out", out_dir, "output directory");

  CLI::App* gc = add_common(app.add_subcommand(
      "gradcheck", "finite-difference check of all backward rules"));
  gc->add_option("--trials", trials, "seeded repetitions");
  gc->add_option("--corrupt", corrupt_op,
                 "diagnostic: corrupt the named op's backward rule");

  try {
    app.parse(argc, argv);
    g_quiet = quiet;

    json cfg = load_config(config_path);
    CLI::App* sub = app.get_subcommands().front();
    apply_overrides(cfg, sub->remaining());

    if (sub == gen) {
      if (seed_set) cfg[json::json_pointer("/data/synthetic/seed")] = seed;
      return cmd_gen_data(cfg, out_dir);
    }
    if (sub == train) {
      if (seed_set) cfg[json::json_pointer("/train/seed")] = seed;
      if (no_multi_level) cfg[json::json_pointer("/train/multi_level")] = false;
      if (no_hc_loss) cfg[json::json_pointer("/train/hc_loss")] = false;
      if (no_hc_inference)
        cfg[json::json_pointer("/train/hc_inference")] = false;
      return cmd_train(cfg, out_dir, seeds);
    }
    if (sub == eval) return cmd_eval(checkpoint_path, data_path, mode_name,
                                     out_file);
    if (sub == infer)
      return cmd_infer(checkpoint_path, data_path, mode_name, out_file);
    if (sub == xport) return cmd_export_matrices(checkpoint_path, out_dir);
    if (sub == gc) return cmd_gradcheck(seed, trials, corrupt_op);
    throw std::runtime_error("unknown subcommand");
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
