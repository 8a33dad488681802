#pragma once

// Hierarchical label structure: an ordered list of levels from coarse to
// fine, each class at a finer level pointing at exactly one parent on the
// level above. Instances are immutable after construction and safe to share
// across threads.

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace sahc {

class HierarchySpec {
 public:
  // Builds and validates a spec. `levels` lists class names coarse-first;
  // `parents` has one array per level from the second level on, mapping
  // child index -> parent index on the previous level.
  static HierarchySpec from_parts(std::vector<std::vector<std::string>> levels,
                                  std::vector<std::vector<int>> parents);

  // Parses the JSON hierarchy document: {"levels": [[...], ...],
  // "parents": [[...], ...]}.
  static HierarchySpec parse(const std::string& json_text);

  int num_levels() const { return static_cast<int>(levels_.size()); }
  int class_count(int level) const;
  const std::vector<std::string>& class_names(int level) const;
  int finest_level() const { return num_levels() - 1; }

  // Parent of a class one level up. `level` must be >= 1.
  int parent_of(int level, int class_ix) const;

  // Ancestor of a class at any coarser-or-equal level, by parent-chain ascent.
  int ancestor_at(int level, int class_ix, int coarse_level) const;

  // Children of a class on the next finer level.
  std::vector<int> children_of(int level, int class_ix) const;

  // Per-level labels for a batch of finest-level labels; result[h][n] is the
  // label of sample n at level h.
  std::vector<std::vector<int>> lift_labels(
      const std::vector<int>& fine_labels) const;

  std::string to_json() const;

 private:
  HierarchySpec() = default;
  void validate() const;

  std::vector<std::vector<std::string>> levels_;
  std::vector<std::vector<int>> parents_;  // parents_[h-1] for level h >= 1
};

// Binary mapping from a finer level's classes to a coarser level's classes,
// composed through the parent chain. Exactly one 1 per row.
struct IndicatorMatrix {
  int source_level = 0;  // finer
  int target_level = 0;  // coarser
  Eigen::MatrixXd entries;
};

IndicatorMatrix indicator_matrix(const HierarchySpec& spec, int source_level,
                                 int target_level);

// Number of unordered level pairs: (H-1)*H/2.
int pair_count(int num_levels);

}  // namespace sahc
