#pragma once

// Backbone feature extractor and per-level linear classification heads.
//
// The reference backbone is a multilayer perceptron: one linear layer per
// entry of `hidden` with tanh after each, then a final linear map to
// feature_dim. An empty `hidden` means the identity backbone, which requires
// feature_dim == input_dim and has no parameters.

#include "sahc/autodiff.hpp"
#include "sahc/params.hpp"
#include "sahc/rng.hpp"

#include <string>
#include <vector>

namespace sahc {

struct BackboneConfig {
  int input_dim = 0;
  std::vector<int> hidden;
  int feature_dim = 0;
  std::string nonlinearity = "tanh";

  void validate() const;
};

// ParamSet indices of one affine layer.
struct LinearRef {
  int weight = -1;
  int bias = -1;
};

// Creates weight (in x out, uniform in [-s, s] with s = 1/sqrt(in)) and bias
// (1 x out, zero) parameters.
LinearRef add_linear(ParamSet& params, const std::string& name, int in,
                     int out, Rng& rng);

std::vector<LinearRef> add_backbone_params(ParamSet& params,
                                           const BackboneConfig& config,
                                           Rng& rng);

// One head per hierarchy level; head h maps features to class_counts[h]
// logits.
std::vector<LinearRef> add_head_params(ParamSet& params, int feature_dim,
                                       const std::vector<int>& class_counts,
                                       Rng& rng);

// x: batch x input_dim. Returns batch x feature_dim features on the tape.
Var forward_backbone(Tape& tape, const std::vector<Var>& bound,
                     const std::vector<LinearRef>& layers,
                     const BackboneConfig& config, Var x);

// features: batch x feature_dim. Returns one logit matrix per level.
std::vector<Var> forward_heads(Tape& tape, const std::vector<Var>& bound,
                               const std::vector<LinearRef>& heads,
                               Var features);

}  // namespace sahc
