#pragma once

// Adaptive optimizer with decoupled weight decay, and the cosine learning
// rate schedule. Decay is applied directly to the weights (never through the
// gradients) and skipped for parameters flagged decay = false.

#include "sahc/params.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace sahc {

struct AdamWConfig {
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamW {
 public:
  AdamW(const ParamSet& params, AdamWConfig config) : cfg_(config) {
    for (int i = 0; i < params.size(); ++i) {
      const auto& v = params.at(i).value;
      m_.push_back(Eigen::MatrixXd::Zero(v.rows(), v.cols()));
      v_.push_back(Eigen::MatrixXd::Zero(v.rows(), v.cols()));
    }
  }

  const AdamWConfig& config() const { return cfg_; }
  int step_count() const { return t_; }

  void step(ParamSet& params, const std::vector<Eigen::MatrixXd>& grads,
            double lr_t) {
    if (static_cast<int>(grads.size()) != params.size() ||
        params.size() != static_cast<int>(m_.size()))
      throw std::invalid_argument("AdamW::step: parameter count mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (int i = 0; i < params.size(); ++i) {
      Param& p = params.at(i);
      const Eigen::MatrixXd& g = grads[i];
      if (g.rows() != p.value.rows() || g.cols() != p.value.cols())
        throw std::invalid_argument("AdamW::step: gradient shape mismatch");
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
      v_[i].array() =
          cfg_.beta2 * v_[i].array() + (1.0 - cfg_.beta2) * g.array().square();
      p.value.array() -= lr_t * (m_[i].array() / bc1) /
                         ((v_[i].array() / bc2).sqrt() + cfg_.eps);
      if (p.decay) p.value *= 1.0 - lr_t * cfg_.weight_decay;
    }
  }

 private:
  AdamWConfig cfg_;
  int t_ = 0;
  std::vector<Eigen::MatrixXd> m_, v_;
};

inline double cosine_lr(double base_lr, int step, int total_steps) {
  if (total_steps < 1)
    throw std::invalid_argument("cosine_lr: total_steps must be >= 1");
  if (step < 0 || step > total_steps)
    throw std::invalid_argument("cosine_lr: step outside [0, total_steps]");
  return base_lr * 0.5 *
         (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) /
                         static_cast<double>(total_steps)));
}

}  // namespace sahc
