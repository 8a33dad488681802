#include "sahc/hierarchy.hpp"

#include <json.hpp>

#include <stdexcept>
#include <unordered_set>

namespace sahc {

HierarchySpec HierarchySpec::from_parts(
    std::vector<std::vector<std::string>> levels,
    std::vector<std::vector<int>> parents) {
  HierarchySpec spec;
  spec.levels_ = std::move(levels);
  spec.parents_ = std::move(parents);
  spec.validate();
  return spec;
}

HierarchySpec HierarchySpec::parse(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("hierarchy: malformed document: ") +
                             e.what());
  }
  if (!doc.is_object() || !doc.contains("levels"))
    throw std::runtime_error("hierarchy: document must contain 'levels'");

  std::vector<std::vector<std::string>> levels;
  try {
    levels = doc.at("levels").get<std::vector<std::vector<std::string>>>();
  } catch (const nlohmann::json::exception&) {
    throw std::runtime_error(
        "hierarchy: 'levels' must be an array of arrays of strings");
  }

  std::vector<std::vector<int>> parents;
  if (doc.contains("parents")) {
    try {
      parents = doc.at("parents").get<std::vector<std::vector<int>>>();
    } catch (const nlohmann::json::exception&) {
      throw std::runtime_error(
          "hierarchy: 'parents' must be an array of integer arrays");
    }
  }
  return from_parts(std::move(levels), std::move(parents));
}

void HierarchySpec::validate() const {
  const int h_count = num_levels();
  if (h_count < 1) throw std::runtime_error("hierarchy: no levels");

  for (int h = 0; h < h_count; ++h) {
    const auto& names = levels_[h];
    if (names.size() < 2)
      throw std::runtime_error("hierarchy: level " + std::to_string(h + 1) +
                               " must have at least 2 classes");
    std::unordered_set<std::string> seen;
    for (const auto& name : names)
      if (!seen.insert(name).second)
        throw std::runtime_error("hierarchy: duplicate class id '" + name +
                                 "' at level " + std::to_string(h + 1));
    if (h > 0 && levels_[h - 1].size() >= names.size())
      throw std::runtime_error(
          "hierarchy: level sizes must strictly increase (level " +
          std::to_string(h + 1) + ")");
  }

  if (static_cast<int>(parents_.size()) != h_count - 1)
    throw std::runtime_error("hierarchy: expected " +
                             std::to_string(h_count - 1) +
                             " parent arrays, got " +
                             std::to_string(parents_.size()));

  for (int h = 1; h < h_count; ++h) {
    const auto& par = parents_[h - 1];
    if (par.size() != levels_[h].size())
      throw std::runtime_error("hierarchy: parent array for level " +
                               std::to_string(h + 1) +
                               " has wrong length");
    std::vector<bool> has_child(levels_[h - 1].size(), false);
    for (size_t i = 0; i < par.size(); ++i) {
      if (par[i] < 0 || par[i] >= static_cast<int>(levels_[h - 1].size()))
        throw std::runtime_error(
            "hierarchy: dangling parent reference " + std::to_string(par[i]) +
            " for class " + std::to_string(i) + " at level " +
            std::to_string(h + 1));
      has_child[par[i]] = true;
    }
    for (size_t j = 0; j < has_child.size(); ++j)
      if (!has_child[j])
        throw std::runtime_error("hierarchy: class " + std::to_string(j) +
                                 " at level " + std::to_string(h) +
                                 " has no children");
  }
}

int HierarchySpec::class_count(int level) const {
  if (level < 0 || level >= num_levels())
    throw std::out_of_range("hierarchy: level out of range");
  return static_cast<int>(levels_[level].size());
}

const std::vector<std::string>& HierarchySpec::class_names(int level) const {
  if (level < 0 || level >= num_levels())
    throw std::out_of_range("hierarchy: level out of range");
  return levels_[level];
}

int HierarchySpec::parent_of(int level, int class_ix) const {
  if (level < 1 || level >= num_levels())
    throw std::out_of_range("hierarchy: parent_of level out of range");
  if (class_ix < 0 || class_ix >= class_count(level))
    throw std::out_of_range("hierarchy: class index out of range");
  return parents_[level - 1][class_ix];
}

int HierarchySpec::ancestor_at(int level, int class_ix,
                               int coarse_level) const {
  if (coarse_level > level)
    throw std::out_of_range("hierarchy: ancestor level finer than class");
  if (class_ix < 0 || class_ix >= class_count(level))
    throw std::out_of_range("hierarchy: class index out of range");
  int ix = class_ix;
  for (int h = level; h > coarse_level; --h) ix = parent_of(h, ix);
  return ix;
}

std::vector<int> HierarchySpec::children_of(int level, int class_ix) const {
  if (level < 0 || level + 1 >= num_levels())
    throw std::out_of_range("hierarchy: children_of level out of range");
  std::vector<int> out;
  const auto& par = parents_[level];
  for (size_t i = 0; i < par.size(); ++i)
    if (par[i] == class_ix) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<std::vector<int>> HierarchySpec::lift_labels(
    const std::vector<int>& fine_labels) const {
  const int h_count = num_levels();
  const int fine = finest_level();
  std::vector<std::vector<int>> out(h_count,
                                    std::vector<int>(fine_labels.size()));
  for (size_t n = 0; n < fine_labels.size(); ++n) {
    int ix = fine_labels[n];
    if (ix < 0 || ix >= class_count(fine))
      throw std::out_of_range("hierarchy: fine label " + std::to_string(ix) +
                              " out of range");
    out[fine][n] = ix;
    for (int h = fine; h > 0; --h) {
      ix = parent_of(h, ix);
      out[h - 1][n] = ix;
    }
  }
  return out;
}

std::string HierarchySpec::to_json() const {
  nlohmann::ordered_json doc;
  doc["levels"] = levels_;
  doc["parents"] = parents_;
  return doc.dump();
}

IndicatorMatrix indicator_matrix(const HierarchySpec& spec, int source_level,
                                 int target_level) {
  if (target_level >= source_level)
    throw std::invalid_argument(
        "indicator_matrix: target level must be coarser than source level");
  IndicatorMatrix ind;
  ind.source_level = source_level;
  ind.target_level = target_level;
  const int rows = spec.class_count(source_level);
  const int cols = spec.class_count(target_level);
  ind.entries = Eigen::MatrixXd::Zero(rows, cols);
  for (int i = 0; i < rows; ++i)
    ind.entries(i, spec.ancestor_at(source_level, i, target_level)) = 1.0;
  return ind;
}

int pair_count(int num_levels) {
  if (num_levels < 1)
    throw std::invalid_argument("pair_count: need at least one level");
  return (num_levels - 1) * num_levels / 2;
}

}  // namespace sahc
