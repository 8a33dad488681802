#include "sahc/consensus.hpp"

#include <cmath>
#include <stdexcept>

namespace sahc {

ProjectionSet::ProjectionSet(int num_levels) : num_levels_(num_levels) {
  if (num_levels < 1)
    throw std::invalid_argument("ProjectionSet: need at least one level");
  mats_.resize(static_cast<size_t>(num_levels) * num_levels);
  present_.assign(mats_.size(), false);
}

void ProjectionSet::set(ProjectionMatrix m) {
  if (m.source_level < 0 || m.source_level >= num_levels_ ||
      m.target_level < 0 || m.target_level >= num_levels_ ||
      m.source_level == m.target_level)
    throw std::invalid_argument("ProjectionSet: bad level pair");
  const size_t ix =
      static_cast<size_t>(m.source_level) * num_levels_ + m.target_level;
  mats_[ix] = std::move(m);
  present_[ix] = true;
}

const ProjectionMatrix& ProjectionSet::at(int source_level,
                                          int target_level) const {
  if (source_level < 0 || source_level >= num_levels_ || target_level < 0 ||
      target_level >= num_levels_)
    throw std::invalid_argument("ProjectionSet: level out of range");
  const size_t ix =
      static_cast<size_t>(source_level) * num_levels_ + target_level;
  if (!present_[ix])
    throw std::invalid_argument("ProjectionSet: missing projection matrix");
  return mats_[ix];
}

LogJointMatrix init_log_joint(const HierarchySpec& spec, int coarse_level,
                              int fine_level, JointInit mode) {
  if (coarse_level >= fine_level || coarse_level < 0 ||
      fine_level >= spec.num_levels())
    throw std::invalid_argument("init_log_joint: invalid level pair");
  LogJointMatrix joint;
  joint.coarse_level = coarse_level;
  joint.fine_level = fine_level;
  joint.init_mode = mode;
  const int rows = spec.class_count(fine_level);
  const int cols = spec.class_count(coarse_level);
  if (mode == JointInit::kUniform) {
    joint.log_j = Eigen::MatrixXd::Zero(rows, cols);
  } else {
    joint.log_j = Eigen::MatrixXd::Constant(rows, cols, kIndicatorNegFill);
    for (int i = 0; i < rows; ++i)
      joint.log_j(i, spec.ancestor_at(fine_level, i, coarse_level)) = 0.0;
  }
  return joint;
}

ProjectionMatrix projection_from_joint(const LogJointMatrix& joint,
                                       bool fine_to_coarse) {
  ProjectionMatrix proj;
  if (fine_to_coarse) {
    proj.source_level = joint.fine_level;
    proj.target_level = joint.coarse_level;
    proj.log_m = log_row_normalize(joint.log_j);
  } else {
    proj.source_level = joint.coarse_level;
    proj.target_level = joint.fine_level;
    proj.log_m = log_row_normalize(joint.log_j.transpose());
  }
  return proj;
}

ProjectionSet projections_from_joints(const std::vector<LogJointMatrix>& joints,
                                      int num_levels) {
  ProjectionSet set(num_levels);
  for (const auto& joint : joints) {
    set.set(projection_from_joint(joint, true));
    set.set(projection_from_joint(joint, false));
  }
  return set;
}

Eigen::VectorXd project_logprobs(const Eigen::VectorXd& logits,
                                 const Eigen::MatrixXd& log_m) {
  if (logits.size() != log_m.rows())
    throw std::invalid_argument("project_logprobs: width mismatch");
  const double z = lse(logits);
  Eigen::VectorXd out(log_m.cols());
  for (Eigen::Index j = 0; j < log_m.cols(); ++j)
    out(j) = lse((logits + log_m.col(j)).eval()) - z;
  return out;
}

Eigen::MatrixXd project_logprobs(const Eigen::MatrixXd& logits,
                                 const Eigen::MatrixXd& log_m) {
  if (logits.cols() != log_m.rows())
    throw std::invalid_argument("project_logprobs: width mismatch");
  Eigen::ArrayXd z = lse_rows(logits).array();
  return (lse_matmul(logits, log_m).array().colwise() - z).matrix();
}

Eigen::MatrixXd consensus_scores(
    const std::vector<Eigen::MatrixXd>& member_logp) {
  if (member_logp.empty())
    throw std::invalid_argument("consensus_scores: no members");
  Eigen::MatrixXd acc = member_logp[0];
  for (size_t k = 1; k < member_logp.size(); ++k) {
    if (member_logp[k].rows() != acc.rows() ||
        member_logp[k].cols() != acc.cols())
      throw std::invalid_argument("consensus_scores: member shape mismatch");
    acc += member_logp[k];
  }
  return acc / static_cast<double>(member_logp.size());
}

ConsensusBundle consensus(const std::vector<Eigen::MatrixXd>& level_logits,
                          const ProjectionSet& projections, int target_level) {
  const int h_count = static_cast<int>(level_logits.size());
  if (h_count == 0) throw std::invalid_argument("consensus: no levels");
  if (h_count != projections.num_levels())
    throw std::invalid_argument("consensus: level count mismatch");
  if (target_level < 0 || target_level >= h_count)
    throw std::invalid_argument("consensus: target level out of range");

  ConsensusBundle bundle;
  bundle.target_level = target_level;
  bundle.projected_logp.resize(h_count);
  for (int h = 0; h < h_count; ++h) {
    if (h == target_level)
      bundle.projected_logp[h] = log_row_normalize(level_logits[h]);
    else
      bundle.projected_logp[h] = project_logprobs(
          level_logits[h], projections.at(h, target_level).log_m);
  }
  bundle.scores = consensus_scores(bundle.projected_logp);
  bundle.log_z = lse_rows(bundle.scores);
  bundle.log_p_hc =
      (bundle.scores.array().colwise() - bundle.log_z.array()).matrix();
  return bundle;
}

namespace {

std::vector<int> argmax_rows(const Eigen::MatrixXd& m) {
  std::vector<int> out(m.rows());
  for (Eigen::Index n = 0; n < m.rows(); ++n) {
    Eigen::Index best = 0;
    m.row(n).maxCoeff(&best);
    out[n] = static_cast<int>(best);
  }
  return out;
}

}  // namespace

std::vector<std::vector<int>> infer(
    const std::vector<Eigen::MatrixXd>& level_logits,
    const ProjectionSet& projections, InferenceMode mode) {
  std::vector<std::vector<int>> preds(level_logits.size());
  for (size_t h = 0; h < level_logits.size(); ++h) {
    if (mode == InferenceMode::kFineHead) {
      // argmax of log_softmax equals argmax of the logits
      preds[h] = argmax_rows(level_logits[h]);
    } else {
      preds[h] = argmax_rows(
          consensus(level_logits, projections, static_cast<int>(h)).log_p_hc);
    }
  }
  return preds;
}

std::vector<double> default_level_weights(int num_levels) {
  if (num_levels < 1)
    throw std::invalid_argument("default_level_weights: no levels");
  if (num_levels == 3) return {0.3, 0.2, 0.5};
  std::vector<double> w(num_levels, 1.0 / (num_levels + 1));
  w.back() = 2.0 / (num_levels + 1);
  return w;
}

double hc_level_weight(int class_count) {
  if (class_count < 2)
    throw std::invalid_argument(
        "hc_level_weight: levels must have at least two classes");
  return 1.0 / std::log(static_cast<double>(class_count));
}

HcLossValue hc_loss_value(const std::vector<Eigen::MatrixXd>& level_logits,
                          const ProjectionSet& projections) {
  const int h_count = static_cast<int>(level_logits.size());
  HcLossValue out;
  out.pair_jsd = Eigen::MatrixXd::Zero(h_count, h_count);
  std::vector<int> sizes(h_count);
  for (int target = 0; target < h_count; ++target) {
    ConsensusBundle bundle = consensus(level_logits, projections, target);
    sizes[target] = static_cast<int>(bundle.log_p_hc.cols());
    for (int src = 0; src < h_count; ++src) {
      double acc = 0.0;
      for (Eigen::Index n = 0; n < bundle.log_p_hc.rows(); ++n)
        acc += jsd(bundle.log_p_hc.row(n).transpose(),
                   bundle.projected_logp[src].row(n).transpose());
      out.pair_jsd(target, src) =
          acc / static_cast<double>(bundle.log_p_hc.rows());
    }
  }
  out.total = hc_weighted_total(out.pair_jsd, sizes);
  return out;
}

double hc_weighted_total(const Eigen::MatrixXd& pair_jsd,
                         const std::vector<int>& level_sizes) {
  if (pair_jsd.rows() != pair_jsd.cols() ||
      pair_jsd.rows() != static_cast<Eigen::Index>(level_sizes.size()))
    throw std::invalid_argument("hc_weighted_total: shape mismatch");
  double total = 0.0;
  for (Eigen::Index target = 0; target < pair_jsd.rows(); ++target)
    total += hc_level_weight(level_sizes[target]) * pair_jsd.row(target).sum();
  return total;
}

}  // namespace sahc
