#pragma once

// Trainable log-joint hierarchy matrices, cross-level projection of
// predictions, and the hierarchical consensus used for inference.
//
// One log-joint matrix exists per unordered level pair (coarse, fine), with
// fine classes in rows. Both conditional directions derive from it: the
// fine-to-coarse projection row-normalizes the matrix, the coarse-to-fine
// projection row-normalizes its transpose.

#include "sahc/hierarchy.hpp"
#include "sahc/logmath.hpp"

#include <Eigen/Dense>

#include <vector>

namespace sahc {

// Fill value standing in for log 0 in indicator-style initialization. Small
// enough that exp() is negligible, finite so gradients can revive a
// suppressed relationship.
inline constexpr double kIndicatorNegFill = -30.0;

enum class JointInit { kUniform, kIndicator };
enum class InferenceMode { kFineHead, kConsensus };

// Trainable log of the joint distribution over (fine, coarse) class pairs.
struct LogJointMatrix {
  int coarse_level = 0;
  int fine_level = 0;
  Eigen::MatrixXd log_j;  // |fine| x |coarse|
  JointInit init_mode = JointInit::kUniform;
};

// Row-stochastic conditional in the log domain: log_m(i, j) is
// log P(target class j | source class i).
struct ProjectionMatrix {
  int source_level = 0;
  int target_level = 0;
  Eigen::MatrixXd log_m;  // |source| x |target|
};

// Directed projection matrices for every ordered level pair.
class ProjectionSet {
 public:
  explicit ProjectionSet(int num_levels);
  void set(ProjectionMatrix m);
  const ProjectionMatrix& at(int source_level, int target_level) const;
  int num_levels() const { return num_levels_; }

 private:
  int num_levels_;
  std::vector<ProjectionMatrix> mats_;
  std::vector<bool> present_;
};

LogJointMatrix init_log_joint(const HierarchySpec& spec, int coarse_level,
                              int fine_level, JointInit mode);

ProjectionMatrix projection_from_joint(const LogJointMatrix& joint,
                                       bool fine_to_coarse);

// Both directions for every pair of a full joint list.
ProjectionSet projections_from_joints(const std::vector<LogJointMatrix>& joints,
                                      int num_levels);

// Log of the projected class-posterior over target classes, from source-level
// logits: out_j = lse(g + log_m(., j)) - lse(g). Shift-invariant in g.
Eigen::VectorXd project_logprobs(const Eigen::VectorXd& logits,
                                 const Eigen::MatrixXd& log_m);
Eigen::MatrixXd project_logprobs(const Eigen::MatrixXd& logits,
                                 const Eigen::MatrixXd& log_m);

// Consensus at one target level: the normalized geometric mean of the
// target's own prediction and every projected prediction, all in the log
// domain.
struct ConsensusBundle {
  int target_level = 0;
  // Per source level; entry [target_level] is the level's own log-posterior.
  std::vector<Eigen::MatrixXd> projected_logp;
  Eigen::MatrixXd scores;      // pre-normalization, batch x |target|
  Eigen::MatrixXd log_p_hc;    // normalized consensus log-posterior
  Eigen::VectorXd log_z;       // per-sample normalizer lse(scores)
};

// Mean of member log-posteriors: the geometric-mean scores before
// normalization. Order of members does not matter.
Eigen::MatrixXd consensus_scores(
    const std::vector<Eigen::MatrixXd>& member_logp);

ConsensusBundle consensus(const std::vector<Eigen::MatrixXd>& level_logits,
                          const ProjectionSet& projections, int target_level);

// Per-level argmax predictions. Consensus mode votes through the committee;
// fine-head mode reads each level's own head.
std::vector<std::vector<int>> infer(
    const std::vector<Eigen::MatrixXd>& level_logits,
    const ProjectionSet& projections, InferenceMode mode);

// Loss weighting.
struct LossWeights {
  std::vector<double> level_weights;  // lambda per level, coarse first
  double lambda_hc = 1.0;
};

// Level weights when none are configured: (0.3, 0.2, 0.5) for three levels,
// otherwise uniform with the finest level doubled, renormalized.
std::vector<double> default_level_weights(int num_levels);

// Consensus-loss balance factor for a level: 1 / log(class count).
double hc_level_weight(int class_count);

// Reference evaluation of the consensus loss outside the graph, for checks
// and inspection: mean JSD per (target, source) pair plus the balanced total.
struct HcLossValue {
  Eigen::MatrixXd pair_jsd;  // (target, source), batch means
  double total = 0.0;
};
HcLossValue hc_loss_value(const std::vector<Eigen::MatrixXd>& level_logits,
                          const ProjectionSet& projections);

// Balanced aggregation of per-pair mean JSD values, as used by the loss.
double hc_weighted_total(const Eigen::MatrixXd& pair_jsd,
                         const std::vector<int>& level_sizes);

}  // namespace sahc
