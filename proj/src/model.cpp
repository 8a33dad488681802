#include "sahc/model.hpp"

#include "sahc/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace sahc {

Model::Model(HierarchySpec spec, BackboneConfig backbone, JointInit joint_init,
             std::uint64_t seed)
    : spec_(std::move(spec)),
      backbone_(std::move(backbone)),
      joint_init_(joint_init),
      seed_(seed) {
  backbone_.validate();
  Rng rng(seed_);
  backbone_layers_ = add_backbone_params(params_, backbone_, rng);
  std::vector<int> counts(spec_.num_levels());
  for (int h = 0; h < spec_.num_levels(); ++h) counts[h] = spec_.class_count(h);
  heads_ = add_head_params(params_, backbone_.feature_dim, counts, rng);
  for (int lo = 0; lo < spec_.num_levels(); ++lo) {
    for (int hi = lo + 1; hi < spec_.num_levels(); ++hi) {
      LogJointMatrix joint = init_log_joint(spec_, lo, hi, joint_init_);
      JointRef ref;
      ref.coarse = lo;
      ref.fine = hi;
      ref.param = params_.add("joint.l" + std::to_string(lo + 1) + "l" +
                                  std::to_string(hi + 1),
                              std::move(joint.log_j), /*decay=*/false);
      joints_.push_back(ref);
    }
  }
}

int Model::backbone_param_count() const {
  int count = 0;
  for (const auto& layer : backbone_layers_)
    count += static_cast<int>(params_.at(layer.weight).value.size() +
                              params_.at(layer.bias).value.size());
  return count;
}

std::vector<Var> Model::bind(Tape& tape) const {
  std::vector<Var> bound;
  bound.reserve(params_.size());
  for (const auto& p : params_)
    bound.push_back(tape.input(p.value, /*requires_grad=*/true));
  return bound;
}

Var Model::features(Tape& tape, const std::vector<Var>& bound, Var x) const {
  return forward_backbone(tape, bound, backbone_layers_, backbone_, x);
}

std::vector<Var> Model::logits(Tape& tape, const std::vector<Var>& bound,
                               Var x) const {
  return forward_heads(tape, bound, heads_, features(tape, bound, x));
}

int Model::joint_param(int coarse, int fine) const {
  for (const auto& j : joints_)
    if (j.coarse == coarse && j.fine == fine) return j.param;
  throw std::invalid_argument("model: no joint matrix for level pair");
}

Var Model::projection_var(Tape&, const std::vector<Var>& bound, int src,
                          int dst) const {
  if (src == dst)
    throw std::invalid_argument("model: projection needs distinct levels");
  if (src > dst)  // fine -> coarse: row-normalize the joint
    return log_softmax_rows(bound[joint_param(dst, src)]);
  // coarse -> fine: row-normalize the transpose
  return log_softmax_rows(transpose(bound[joint_param(src, dst)]));
}

LossBreakdown Model::loss(Tape& tape, const std::vector<Var>& bound, Var x,
                          const std::vector<std::vector<int>>& labels,
                          const LossOptions& options) const {
  const int h_count = spec_.num_levels();
  if (static_cast<int>(labels.size()) != h_count)
    throw std::invalid_argument("model: labels for every level required");
  const Eigen::Index batch = tape.value(x).rows();
  if (batch == 0) throw std::invalid_argument("model: empty batch");
  for (int h = 0; h < h_count; ++h) {
    if (static_cast<Eigen::Index>(labels[h].size()) != batch)
      throw std::invalid_argument("model: label count != batch size");
    for (int y : labels[h])
      if (y < 0 || y >= spec_.class_count(h))
        throw std::out_of_range("model: label out of range at level " +
                                std::to_string(h + 1));
  }

  std::vector<double> weights = options.level_weights.empty()
                                    ? default_level_weights(h_count)
                                    : options.level_weights;
  if (static_cast<int>(weights.size()) != h_count)
    throw std::invalid_argument("model: one level weight per level required");
  for (double w : weights)
    if (w < 0.0) throw std::invalid_argument("model: negative level weight");
  if (options.lambda_hc < 0.0)
    throw std::invalid_argument("model: negative lambda_hc");
  if (!options.multi_level) {
    std::fill(weights.begin(), weights.end(), 0.0);
    weights.back() = 1.0;
  }

  std::vector<Var> level_logits = logits(tape, bound, x);
  std::vector<Var> level_logp;
  level_logp.reserve(h_count);
  for (Var g : level_logits) level_logp.push_back(log_softmax_rows(g));

  LossBreakdown breakdown;
  Var total{};
  for (int h = 0; h < h_count; ++h) {
    Var cce_h = scale(mean(pick(level_logp[h], labels[h])), -1.0);
    breakdown.cce_per_level.push_back(tape.value(cce_h)(0, 0));
    Var weighted = scale(cce_h, weights[h]);
    total = (h == 0) ? weighted : add(total, weighted);
  }
  breakdown.cce = tape.value(total)(0, 0);

  if (options.hc_loss) {
    // Directed projections once per ordered pair.
    std::vector<Var> proj(static_cast<size_t>(h_count) * h_count);
    for (int src = 0; src < h_count; ++src)
      for (int dst = 0; dst < h_count; ++dst)
        if (src != dst)
          proj[static_cast<size_t>(src) * h_count + dst] =
              projection_var(tape, bound, src, dst);

    Var hc_acc{};
    bool first = true;
    for (int target = 0; target < h_count; ++target) {
      // Committee members: the level's own posterior plus every projection.
      std::vector<Var> members(h_count);
      members[target] = level_logp[target];
      for (int src = 0; src < h_count; ++src) {
        if (src == target) continue;
        Var log_m = proj[static_cast<size_t>(src) * h_count + target];
        members[src] = sub_colvec(lse_matmul(level_logits[src], log_m),
                                  lse_rows(level_logits[src]));
      }
      Var scores = members[0];
      for (int h = 1; h < h_count; ++h) scores = add(scores, members[h]);
      scores = scale(scores, 1.0 / h_count);
      Var log_p_hc = log_softmax_rows(scores);

      const double w = hc_level_weight(spec_.class_count(target));
      for (int src = 0; src < h_count; ++src) {
        Var term = scale(jsd_rows(log_p_hc, members[src]), w);
        hc_acc = first ? term : add(hc_acc, term);
        first = false;
      }
    }
    Var hc = mean(hc_acc);  // batch mean of the per-sample sums
    breakdown.hc = tape.value(hc)(0, 0);
    total = add(total, scale(hc, options.lambda_hc));
  }

  breakdown.total = tape.value(total)(0, 0);
  breakdown.total_var = total;
  return breakdown;
}

std::vector<Eigen::MatrixXd> Model::eval_logits(
    const Eigen::MatrixXd& x) const {
  Tape tape;
  std::vector<Var> bound = bind(tape);
  std::vector<Var> vars =
      logits(tape, bound, tape.input(x, /*requires_grad=*/false));
  std::vector<Eigen::MatrixXd> out;
  out.reserve(vars.size());
  for (Var v : vars) out.push_back(tape.value(v));
  return out;
}

std::vector<LogJointMatrix> Model::joints() const {
  std::vector<LogJointMatrix> out;
  for (const auto& j : joints_) {
    LogJointMatrix joint;
    joint.coarse_level = j.coarse;
    joint.fine_level = j.fine;
    joint.log_j = params_.at(j.param).value;
    joint.init_mode = joint_init_;
    out.push_back(std::move(joint));
  }
  return out;
}

ProjectionSet Model::projections() const {
  return projections_from_joints(joints(), spec_.num_levels());
}

}  // namespace sahc
