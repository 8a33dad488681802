#pragma once

// Named trainable matrices. The `decay` flag marks parameters that weight
// decay applies to (weights yes, biases and log-joint matrices no).

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sahc {

struct Param {
  std::string name;
  Eigen::MatrixXd value;
  bool decay = true;
};

class ParamSet {
 public:
  int add(std::string name, Eigen::MatrixXd value, bool decay) {
    params_.push_back({std::move(name), std::move(value), decay});
    return static_cast<int>(params_.size()) - 1;
  }

  int size() const { return static_cast<int>(params_.size()); }

  Param& at(int i) { return params_.at(i); }
  const Param& at(int i) const { return params_.at(i); }

  int find(std::string_view name) const {
    for (int i = 0; i < size(); ++i)
      if (params_[i].name == name) return i;
    return -1;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Param> params_;
};

}  // namespace sahc
