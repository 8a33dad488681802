#include "sahc/heads.hpp"

#include <cmath>
#include <stdexcept>

namespace sahc {

void BackboneConfig::validate() const {
  if (input_dim < 1)
    throw std::invalid_argument("backbone: input_dim must be >= 1");
  if (feature_dim < 1)
    throw std::invalid_argument("backbone: feature_dim must be >= 1");
  for (int w : hidden)
    if (w < 1)
      throw std::invalid_argument("backbone: hidden widths must be >= 1");
  if (hidden.empty() && feature_dim != input_dim)
    throw std::invalid_argument(
        "backbone: identity backbone (no hidden layers) requires "
        "feature_dim == input_dim");
  if (nonlinearity != "tanh")
    throw std::invalid_argument("backbone: unknown nonlinearity '" +
                                nonlinearity + "'");
}

LinearRef add_linear(ParamSet& params, const std::string& name, int in,
                     int out, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(in));
  Eigen::MatrixXd w(in, out);
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-s, s);
  LinearRef ref;
  ref.weight = params.add(name + ".weight", std::move(w), /*decay=*/true);
  ref.bias = params.add(name + ".bias", Eigen::MatrixXd::Zero(1, out),
                        /*decay=*/false);
  return ref;
}

std::vector<LinearRef> add_backbone_params(ParamSet& params,
                                           const BackboneConfig& config,
                                           Rng& rng) {
  config.validate();
  std::vector<LinearRef> layers;
  if (config.hidden.empty()) return layers;  // identity backbone
  int in = config.input_dim;
  for (size_t l = 0; l < config.hidden.size(); ++l) {
    layers.push_back(add_linear(
        params, "backbone.layer" + std::to_string(l), in, config.hidden[l],
        rng));
    in = config.hidden[l];
  }
  layers.push_back(add_linear(params,
                              "backbone.layer" +
                                  std::to_string(config.hidden.size()),
                              in, config.feature_dim, rng));
  return layers;
}

std::vector<LinearRef> add_head_params(ParamSet& params, int feature_dim,
                                       const std::vector<int>& class_counts,
                                       Rng& rng) {
  std::vector<LinearRef> heads;
  for (size_t h = 0; h < class_counts.size(); ++h)
    heads.push_back(add_linear(params, "head.l" + std::to_string(h + 1),
                               feature_dim, class_counts[h], rng));
  return heads;
}

namespace {

Var affine(const std::vector<Var>& bound, const LinearRef& ref, Var x) {
  return add_rowvec(matmul(x, bound[ref.weight]), bound[ref.bias]);
}

}  // namespace

Var forward_backbone(Tape& tape, const std::vector<Var>& bound,
                     const std::vector<LinearRef>& layers,
                     const BackboneConfig& config, Var x) {
  if (tape.value(x).cols() != config.input_dim)
    throw std::invalid_argument("forward_backbone: input width mismatch");
  if (layers.empty()) return x;
  Var h = x;
  for (size_t l = 0; l + 1 < layers.size(); ++l)
    h = tanh(affine(bound, layers[l], h));
  return affine(bound, layers.back(), h);
}

std::vector<Var> forward_heads(Tape&, const std::vector<Var>& bound,
                               const std::vector<LinearRef>& heads,
                               Var features) {
  std::vector<Var> logits;
  logits.reserve(heads.size());
  for (const auto& head : heads)
    logits.push_back(affine(bound, head, features));
  return logits;
}

}  // namespace sahc
