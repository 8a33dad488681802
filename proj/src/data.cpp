#include "sahc/data.hpp"

#include "sahc/rng.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sahc {

Sample Dataset::sample(int n) const {
  Sample s;
  s.x = features.row(n).transpose();
  s.labels.reserve(labels.size());
  for (const auto& level : labels) s.labels.push_back(level[n]);
  return s;
}

namespace {

void validate_config(const HierarchySpec& spec, const SyntheticConfig& cfg) {
  if (cfg.feature_dim < 1)
    throw std::invalid_argument("generate: feature_dim must be >= 1");
  if (cfg.clusters_per_class < 1)
    throw std::invalid_argument("generate: clusters_per_class must be >= 1");
  if (!(cfg.sigma_fine > 0.0))
    throw std::invalid_argument("generate: sigma_fine must be > 0");
  if (static_cast<int>(cfg.level_spread.size()) != spec.num_levels())
    throw std::invalid_argument(
        "generate: level_spread needs one multiplier per level");
  for (double s : cfg.level_spread)
    if (!(s > 0.0))
      throw std::invalid_argument("generate: level spreads must be > 0");
  if (cfg.label_noise < 0.0 || cfg.label_noise >= 1.0)
    throw std::invalid_argument("generate: label_noise must be in [0, 1)");
  if (cfg.samples_per_class < 4)
    throw std::invalid_argument("generate: samples_per_class must be >= 4");
}

Eigen::VectorXd gaussian_vector(Rng& rng, int dim, double sigma) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = sigma * rng.normal();
  return v;
}

void append_rows(Dataset& out, const Dataset& src, int from, int count) {
  const int old_rows = out.num_samples();
  Eigen::MatrixXd grown(old_rows + count, src.features.cols());
  if (old_rows > 0) grown.topRows(old_rows) = out.features;
  grown.bottomRows(count) = src.features.middleRows(from, count);
  out.features = std::move(grown);
  out.labels.resize(src.labels.size());
  for (size_t h = 0; h < src.labels.size(); ++h)
    out.labels[h].insert(out.labels[h].end(), src.labels[h].begin() + from,
                         src.labels[h].begin() + from + count);
}

}  // namespace

GeneratedData generate(const HierarchySpec& spec,
                       const SyntheticConfig& cfg) {
  validate_config(spec, cfg);
  Rng rng(cfg.seed);
  const int h_count = spec.num_levels();
  const int fine = spec.finest_level();
  const int b = cfg.feature_dim;

  GeneratedData out;
  out.level_centers.resize(h_count);
  for (int h = 0; h < h_count; ++h) {
    const int classes = spec.class_count(h);
    out.level_centers[h].resize(classes, b);
    const double sigma = cfg.sigma_fine * cfg.level_spread[h];
    for (int c = 0; c < classes; ++c) {
      Eigen::VectorXd center = gaussian_vector(rng, b, sigma);
      if (h > 0) center += out.level_centers[h - 1].row(spec.parent_of(h, c));
      out.level_centers[h].row(c) = center;
    }
  }

  // Leaf clusters: a single cluster sits on the class center, several spread
  // around it with the leaf sigma.
  const int fine_classes = spec.class_count(fine);
  std::vector<Eigen::MatrixXd> clusters(fine_classes);
  for (int c = 0; c < fine_classes; ++c) {
    clusters[c].resize(cfg.clusters_per_class, b);
    for (int k = 0; k < cfg.clusters_per_class; ++k) {
      Eigen::VectorXd center = out.level_centers[fine].row(c);
      if (cfg.clusters_per_class > 1)
        center += gaussian_vector(rng, b, cfg.sigma_fine);
      clusters[c].row(k) = center;
    }
  }

  const int per_class = cfg.samples_per_class;
  const int total = fine_classes * per_class;
  Dataset all;
  all.features.resize(total, b);
  std::vector<int> fine_labels(total);
  int row = 0;
  for (int c = 0; c < fine_classes; ++c) {
    const int parent = (h_count > 1) ? spec.parent_of(fine, c) : -1;
    std::vector<int> siblings;
    if (parent >= 0) {
      for (int cand : spec.children_of(fine - 1, parent))
        if (cand != c) siblings.push_back(cand);
    }
    for (int s = 0; s < per_class; ++s, ++row) {
      const int k = cfg.clusters_per_class == 1
                        ? 0
                        : static_cast<int>(rng.integer(cfg.clusters_per_class));
      all.features.row(row) =
          clusters[c].row(k) +
          gaussian_vector(rng, b, cfg.sigma_fine).transpose();
      // Noise draws happen unconditionally so the stream does not depend on
      // the configured rate.
      const double u = rng.uniform();
      const std::uint64_t pick = rng.raw();
      int label = c;
      if (u < cfg.label_noise && !siblings.empty())
        label = siblings[pick % siblings.size()];
      fine_labels[row] = label;
    }
  }
  all.labels = spec.lift_labels(fine_labels);

  const int n_train = (per_class + 1) / 2;
  const int n_val = per_class / 4;
  for (int c = 0; c < fine_classes; ++c) {
    const int base = c * per_class;
    append_rows(out.train, all, base, n_train);
    append_rows(out.val, all, base + n_train, n_val);
    append_rows(out.test, all, base + n_train + n_val,
                per_class - n_train - n_val);
  }
  return out;
}

void save_csv(const Dataset& data, const std::string& path) {
  std::ofstream file(path);
  if (!file) throw std::runtime_error("save_csv: cannot open " + path);
  const int b = data.feature_dim();
  const int h_count = static_cast<int>(data.labels.size());
  for (int j = 0; j < b; ++j) file << "f" << j << ",";
  for (int h = 0; h < h_count; ++h)
    file << "y" << (h + 1) << (h + 1 < h_count ? "," : "");
  file << "\n";
  char buf[32];
  for (int n = 0; n < data.num_samples(); ++n) {
    for (int j = 0; j < b; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", data.features(n, j));
      file << buf << ",";
    }
    for (int h = 0; h < h_count; ++h)
      file << data.labels[h][n] << (h + 1 < h_count ? "," : "");
    file << "\n";
  }
  if (!file) throw std::runtime_error("save_csv: write failed for " + path);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace

Dataset load_dataset(const std::string& path, const HierarchySpec& spec) {
  std::ifstream file(path);
  if (!file) throw std::runtime_error("load_dataset: cannot open " + path);
  std::string line;
  if (!std::getline(file, line))
    throw std::runtime_error("load_dataset: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::vector<std::string> header = split_csv_line(line);
  int b = 0;
  while (b < static_cast<int>(header.size()) &&
         header[b] == "f" + std::to_string(b))
    ++b;
  if (b == 0)
    throw std::runtime_error("load_dataset: header must start with f0");
  const int label_cols = static_cast<int>(header.size()) - b;
  const int h_count = spec.num_levels();
  bool fine_only = false;
  if (label_cols == h_count) {
    for (int h = 0; h < h_count; ++h)
      if (header[b + h] != "y" + std::to_string(h + 1))
        throw std::runtime_error("load_dataset: unexpected label column '" +
                                 header[b + h] + "'");
  } else if (label_cols == 1 && header[b] == "y" + std::to_string(h_count)) {
    fine_only = true;
  } else {
    throw std::runtime_error(
        "load_dataset: label columns must be y1..yH or the finest level only");
  }

  std::vector<std::vector<double>> feature_rows;
  std::vector<std::vector<int>> label_rows;
  int line_no = 1;
  while (std::getline(file, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw std::runtime_error("load_dataset: row " + std::to_string(line_no) +
                               " has " + std::to_string(cells.size()) +
                               " cells, expected " +
                               std::to_string(header.size()));
    std::vector<double> feats(b);
    std::vector<int> labs(label_cols);
    try {
      for (int j = 0; j < b; ++j) feats[j] = std::stod(cells[j]);
      for (int h = 0; h < label_cols; ++h) labs[h] = std::stoi(cells[b + h]);
    } catch (const std::exception&) {
      throw std::runtime_error("load_dataset: malformed row " +
                               std::to_string(line_no));
    }
    feature_rows.push_back(std::move(feats));
    label_rows.push_back(std::move(labs));
  }

  Dataset data;
  const int n = static_cast<int>(feature_rows.size());
  data.features.resize(n, b);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < b; ++j) data.features(i, j) = feature_rows[i][j];

  if (fine_only) {
    std::vector<int> fine(n);
    for (int i = 0; i < n; ++i) fine[i] = label_rows[i][0];
    for (int y : fine)
      if (y < 0 || y >= spec.class_count(spec.finest_level()))
        throw std::runtime_error("load_dataset: label out of range");
    data.labels = spec.lift_labels(fine);
  } else {
    data.labels.assign(h_count, std::vector<int>(n));
    for (int i = 0; i < n; ++i) {
      for (int h = 0; h < h_count; ++h) {
        const int y = label_rows[i][h];
        if (y < 0 || y >= spec.class_count(h))
          throw std::runtime_error("load_dataset: label out of range at row " +
                                   std::to_string(i + 2));
        data.labels[h][i] = y;
      }
    }
  }
  return data;
}

}  // namespace sahc
