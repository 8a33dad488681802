#pragma once

// Reverse-mode differentiation over dense double matrices.
//
// A Tape records operations in execution order; since every op only refers
// to nodes that already exist, reverse insertion order is a reverse
// topological order. backward() seeds the scalar loss with 1, walks the tape
// once from the loss down, and accumulates gradients additively across
// fan-out. The walk is sequential and allocation order is fixed, so repeated
// backward passes over the same tape are bitwise identical.
//
// Column vectors are N x 1 matrices; batches put samples in rows.

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace sahc {

class Tape;

// Handle to a tape node. Cheap to copy; valid for the tape's lifetime.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var input(Eigen::MatrixXd value, bool requires_grad = false);

  const Eigen::MatrixXd& value(Var v) const;
  const Eigen::MatrixXd& grad(Var v) const;

  // Computes gradients of a scalar (1x1) loss for every node on the tape.
  void backward(Var loss);
  void zero_grad();

  std::size_t node_count() const { return nodes_.size(); }

  // Op-implementation surface.
  Var record(const char* op, Eigen::MatrixXd value, BackwardFn fn);
  const Eigen::MatrixXd& value_at(int id) const { return nodes_[id].value; }
  Eigen::MatrixXd& grad_at(int id) { return nodes_[id].grad; }

  // Test hook: scales the named op's accumulated output gradient before it
  // propagates, simulating a broken backward rule. Empty name disables.
  static void corrupt_backward(std::string op_name);
  static void clear_backward_corruption();

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    BackwardFn backward;
    const char* op = "input";
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  bool has_grads_ = false;
  static std::string corrupted_op_;
};

// Core op set. Each op validates shapes (std::invalid_argument on mismatch)
// and registers an exact backward rule.
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
Var exp(Var a);
Var log(Var a);
Var tanh(Var a);
Var gather_rows(Var a, std::vector<int> rows);
// Per-row column pick: out(n, 0) = a(n, cols[n]).
Var pick(Var a, std::vector<int> cols);
Var hcat(const std::vector<Var>& parts);
Var vcat(const std::vector<Var>& parts);
Var lse_rows(Var a);
Var mean(Var a);
// Broadcasts: add a 1 x C row to every row / subtract an N x 1 column from
// every column.
Var add_rowvec(Var a, Var row);
Var sub_colvec(Var a, Var col);
Var log_softmax_rows(Var a);
// out(n, j) = lse_i(logits(n, i) + log_m(i, j)).
Var lse_matmul(Var logits, Var log_m);
// Element-wise log(0.5 exp(a) + 0.5 exp(b)).
Var logmix2(Var a, Var b);
// Row-wise KL divergence between log-distributions, N x 1 output.
Var kld_rows(Var log_p, Var log_q);
// Row-wise Jensen-Shannon divergence, composed from logmix2 and kld_rows.
Var jsd_rows(Var log_a, Var log_b);

}  // namespace sahc
