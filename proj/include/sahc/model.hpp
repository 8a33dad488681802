#pragma once

// Full classifier: backbone, one head per hierarchy level, and one trainable
// log-joint matrix per level pair. Owns the parameters; training binds them
// onto a fresh tape each step, evaluation reads logits from a throwaway
// forward pass.

#include "sahc/autodiff.hpp"
#include "sahc/consensus.hpp"
#include "sahc/heads.hpp"
#include "sahc/hierarchy.hpp"
#include "sahc/params.hpp"

#include <cstdint>
#include <vector>

namespace sahc {

struct LossOptions {
  std::vector<double> level_weights;  // lambda per level; empty -> defaults
  double lambda_hc = 1.0;
  bool multi_level = true;  // off: only the finest level's CCE, weight 1
  bool hc_loss = true;      // off: consensus penalty not built at all
};

struct LossBreakdown {
  std::vector<double> cce_per_level;
  double cce = 0.0;    // weighted sum
  double hc = 0.0;
  double total = 0.0;  // cce + lambda_hc * hc, read off the graph
  Var total_var{};
};

class Model {
 public:
  Model(HierarchySpec spec, BackboneConfig backbone, JointInit joint_init,
        std::uint64_t seed);

  const HierarchySpec& hierarchy() const { return spec_; }
  const BackboneConfig& backbone_config() const { return backbone_; }
  JointInit joint_init() const { return joint_init_; }
  std::uint64_t init_seed() const { return seed_; }

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  int backbone_param_count() const;

  // One Var per parameter, index-aligned with params().
  std::vector<Var> bind(Tape& tape) const;

  Var features(Tape& tape, const std::vector<Var>& bound, Var x) const;
  std::vector<Var> logits(Tape& tape, const std::vector<Var>& bound,
                          Var x) const;

  // Directed projection (log M) between two distinct levels, on the tape.
  Var projection_var(Tape& tape, const std::vector<Var>& bound, int src,
                     int dst) const;

  // Builds the whole training loss for a batch. labels[h][n] indexes level h.
  LossBreakdown loss(Tape& tape, const std::vector<Var>& bound,
                     Var x, const std::vector<std::vector<int>>& labels,
                     const LossOptions& options) const;

  // Plain-matrix views for inference and export.
  std::vector<Eigen::MatrixXd> eval_logits(const Eigen::MatrixXd& x) const;
  std::vector<LogJointMatrix> joints() const;
  ProjectionSet projections() const;

 private:
  HierarchySpec spec_;
  BackboneConfig backbone_;
  JointInit joint_init_;
  std::uint64_t seed_;
  ParamSet params_;

  std::vector<LinearRef> backbone_layers_;
  std::vector<LinearRef> heads_;
  struct JointRef {
    int coarse = 0, fine = 0, param = -1;
  };
  std::vector<JointRef> joints_;

  int joint_param(int coarse, int fine) const;
};

}  // namespace sahc
