#include "sahc/autodiff.hpp"

#include "sahc/logmath.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace sahc {

std::string Tape::corrupted_op_;

void Tape::corrupt_backward(std::string op_name) {
  corrupted_op_ = std::move(op_name);
}

void Tape::clear_backward_corruption() { corrupted_op_.clear(); }

Var Tape::input(Eigen::MatrixXd value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(const char* op, Eigen::MatrixXd value, BackwardFn fn) {
  Node node;
  node.value = std::move(value);
  node.backward = std::move(fn);
  node.op = op;
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

const Eigen::MatrixXd& Tape::value(Var v) const {
  if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("Tape::value: foreign or invalid handle");
  return nodes_[v.id].value;
}

const Eigen::MatrixXd& Tape::grad(Var v) const {
  if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("Tape::grad: foreign or invalid handle");
  if (!has_grads_)
    throw std::logic_error("Tape::grad: backward() has not run");
  return nodes_[v.id].grad;
}

void Tape::zero_grad() {
  for (auto& n : nodes_) n.grad.setZero(n.value.rows(), n.value.cols());
  has_grads_ = false;
}

void Tape::backward(Var loss) {
  if (loss.tape != this || loss.id < 0 ||
      loss.id >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("Tape::backward: foreign or invalid handle");
  if (nodes_[loss.id].value.rows() != 1 || nodes_[loss.id].value.cols() != 1)
    throw std::invalid_argument("Tape::backward: loss must be scalar");
  for (auto& n : nodes_) n.grad.setZero(n.value.rows(), n.value.cols());
  nodes_[loss.id].grad(0, 0) = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.backward) continue;
    if (!corrupted_op_.empty() && corrupted_op_ == n.op) n.grad *= 1.01;
    n.backward(*this, i);
  }
  has_grads_ = true;
}

namespace {

Tape& tape_of(Var v, const char* op) {
  if (!v.tape || v.id < 0)
    throw std::invalid_argument(std::string("sahc::") + op +
                                ": invalid operand");
  return *v.tape;
}

void require_same_tape(Var a, Var b, const char* op) {
  if (a.tape != b.tape)
    throw std::invalid_argument(std::string("sahc::") + op +
                                ": operands from different tapes");
}

[[noreturn]] void shape_error(const char* op) {
  throw std::invalid_argument(std::string("sahc::") + op + ": shape mismatch");
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, "matmul");
  require_same_tape(a, b, "matmul");
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.cols() != bv.rows()) shape_error("matmul");
  const int ai = a.id, bi = b.id;
  return t.record("matmul", av * bv, [ai, bi](Tape& t, int self) {
    const Eigen::MatrixXd& u = t.grad_at(self);
    t.grad_at(ai) += u * t.value_at(bi).transpose();
    t.grad_at(bi) += t.value_at(ai).transpose() * u;
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a, "transpose");
  const int ai = a.id;
  return t.record("transpose", t.value(a).transpose(),
                  [ai](Tape& t, int self) {
                    t.grad_at(ai) += t.grad_at(self).transpose();
                  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, "add");
  require_same_tape(a, b, "add");
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) shape_error("add");
  const int ai = a.id, bi = b.id;
  return t.record("add", av + bv, [ai, bi](Tape& t, int self) {
    t.grad_at(ai) += t.grad_at(self);
    t.grad_at(bi) += t.grad_at(self);
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, "sub");
  require_same_tape(a, b, "sub");
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) shape_error("sub");
  const int ai = a.id, bi = b.id;
  return t.record("sub", av - bv, [ai, bi](Tape& t, int self) {
    t.grad_at(ai) += t.grad_at(self);
    t.grad_at(bi) -= t.grad_at(self);
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a, "scale");
  const int ai = a.id;
  return t.record("scale", t.value(a) * s, [ai, s](Tape& t, int self) {
    t.grad_at(ai) += s * t.grad_at(self);
  });
}

Var exp(Var a) {
  Tape& t = tape_of(a, "exp");
  const auto& av = t.value(a);
  if (av.size() > 0 && av.maxCoeff() > 709.0)
    throw std::domain_error("sahc::exp: input would overflow");
  const int ai = a.id;
  return t.record("exp", av.array().exp().matrix(), [ai](Tape& t, int self) {
    t.grad_at(ai).array() +=
        t.grad_at(self).array() * t.value_at(self).array();
  });
}

Var log(Var a) {
  Tape& t = tape_of(a, "log");
  const auto& av = t.value(a);
  if (av.size() > 0 && av.minCoeff() <= 0.0)
    throw std::domain_error("sahc::log: nonpositive input");
  const int ai = a.id;
  return t.record("log", av.array().log().matrix(), [ai](Tape& t, int self) {
    t.grad_at(ai).array() +=
        t.grad_at(self).array() / t.value_at(ai).array();
  });
}

Var tanh(Var a) {
  Tape& t = tape_of(a, "tanh");
  const int ai = a.id;
  return t.record("tanh", t.value(a).array().tanh().matrix(),
                  [ai](Tape& t, int self) {
                    const auto& v = t.value_at(self).array();
                    t.grad_at(ai).array() +=
                        t.grad_at(self).array() * (1.0 - v * v);
                  });
}

Var gather_rows(Var a, std::vector<int> rows) {
  Tape& t = tape_of(a, "gather_rows");
  const auto& av = t.value(a);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), av.cols());
  for (size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= av.rows())
      throw std::invalid_argument("sahc::gather_rows: row index out of range");
    out.row(static_cast<Eigen::Index>(k)) = av.row(rows[k]);
  }
  const int ai = a.id;
  return t.record("gather_rows", std::move(out),
                  [ai, rows = std::move(rows)](Tape& t, int self) {
                    const Eigen::MatrixXd& u = t.grad_at(self);
                    Eigen::MatrixXd& g = t.grad_at(ai);
                    for (size_t k = 0; k < rows.size(); ++k)
                      g.row(rows[k]) += u.row(static_cast<Eigen::Index>(k));
                  });
}

Var pick(Var a, std::vector<int> cols) {
  Tape& t = tape_of(a, "pick");
  const auto& av = t.value(a);
  if (static_cast<Eigen::Index>(cols.size()) != av.rows())
    shape_error("pick");
  Eigen::MatrixXd out(av.rows(), 1);
  for (Eigen::Index n = 0; n < av.rows(); ++n) {
    if (cols[n] < 0 || cols[n] >= av.cols())
      throw std::invalid_argument("sahc::pick: column index out of range");
    out(n, 0) = av(n, cols[n]);
  }
  const int ai = a.id;
  return t.record("pick", std::move(out),
                  [ai, cols = std::move(cols)](Tape& t, int self) {
                    const Eigen::MatrixXd& u = t.grad_at(self);
                    Eigen::MatrixXd& g = t.grad_at(ai);
                    for (Eigen::Index n = 0; n < u.rows(); ++n)
                      g(n, cols[n]) += u(n, 0);
                  });
}

Var hcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("sahc::hcat: no parts");
  Tape& t = tape_of(parts[0], "hcat");
  Eigen::Index rows = t.value(parts[0]).rows(), cols = 0;
  for (Var p : parts) {
    require_same_tape(parts[0], p, "hcat");
    if (t.value(p).rows() != rows) shape_error("hcat");
    cols += t.value(p).cols();
  }
  Eigen::MatrixXd out(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets, widths;
  Eigen::Index at = 0;
  for (Var p : parts) {
    const auto& v = t.value(p);
    out.middleCols(at, v.cols()) = v;
    ids.push_back(p.id);
    offsets.push_back(at);
    widths.push_back(v.cols());
    at += v.cols();
  }
  return t.record("hcat", std::move(out),
                  [ids = std::move(ids), offsets = std::move(offsets),
                   widths = std::move(widths)](Tape& t, int self) {
                    const Eigen::MatrixXd& u = t.grad_at(self);
                    for (size_t k = 0; k < ids.size(); ++k)
                      t.grad_at(ids[k]) += u.middleCols(offsets[k], widths[k]);
                  });
}

Var vcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("sahc::vcat: no parts");
  Tape& t = tape_of(parts[0], "vcat");
  Eigen::Index cols = t.value(parts[0]).cols(), rows = 0;
  for (Var p : parts) {
    require_same_tape(parts[0], p, "vcat");
    if (t.value(p).cols() != cols) shape_error("vcat");
    rows += t.value(p).rows();
  }
  Eigen::MatrixXd out(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets, heights;
  Eigen::Index at = 0;
  for (Var p : parts) {
    const auto& v = t.value(p);
    out.middleRows(at, v.rows()) = v;
    ids.push_back(p.id);
    offsets.push_back(at);
    heights.push_back(v.rows());
    at += v.rows();
  }
  return t.record("vcat", std::move(out),
                  [ids = std::move(ids), offsets = std::move(offsets),
                   heights = std::move(heights)](Tape& t, int self) {
                    const Eigen::MatrixXd& u = t.grad_at(self);
                    for (size_t k = 0; k < ids.size(); ++k)
                      t.grad_at(ids[k]) += u.middleRows(offsets[k], heights[k]);
                  });
}

Var lse_rows(Var a) {
  Tape& t = tape_of(a, "lse_rows");
  const int ai = a.id;
  return t.record("lse_rows", sahc::lse_rows(t.value(a)),
                  [ai](Tape& t, int self) {
                    const Eigen::MatrixXd& u = t.grad_at(self);
                    const auto& av = t.value_at(ai);
                    // softmax of each row, computed from the stored lse
                    Eigen::ArrayXXd s =
                        (av.array().colwise() - t.value_at(self).col(0).array())
                            .exp();
                    t.grad_at(ai).array() += s.colwise() * u.col(0).array();
                  });
}

Var mean(Var a) {
  Tape& t = tape_of(a, "mean");
  const auto& av = t.value(a);
  if (av.size() == 0) throw std::invalid_argument("sahc::mean: empty input");
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = av.mean();
  const int ai = a.id;
  const double inv = 1.0 / static_cast<double>(av.size());
  return t.record("mean", std::move(out), [ai, inv](Tape& t, int self) {
    t.grad_at(ai).array() += t.grad_at(self)(0, 0) * inv;
  });
}

Var add_rowvec(Var a, Var row) {
  Tape& t = tape_of(a, "add_rowvec");
  require_same_tape(a, row, "add_rowvec");
  const auto& av = t.value(a);
  const auto& rv = t.value(row);
  if (rv.rows() != 1 || rv.cols() != av.cols()) shape_error("add_rowvec");
  const int ai = a.id, ri = row.id;
  return t.record(
      "add_rowvec",
      (av.array().rowwise() + rv.row(0).array()).matrix(),
      [ai, ri](Tape& t, int self) {
        const Eigen::MatrixXd& u = t.grad_at(self);
        t.grad_at(ai) += u;
        t.grad_at(ri) += u.colwise().sum();
      });
}

Var sub_colvec(Var a, Var col) {
  Tape& t = tape_of(a, "sub_colvec");
  require_same_tape(a, col, "sub_colvec");
  const auto& av = t.value(a);
  const auto& cv = t.value(col);
  if (cv.cols() != 1 || cv.rows() != av.rows()) shape_error("sub_colvec");
  const int ai = a.id, ci = col.id;
  return t.record(
      "sub_colvec",
      (av.array().colwise() - cv.col(0).array()).matrix(),
      [ai, ci](Tape& t, int self) {
        const Eigen::MatrixXd& u = t.grad_at(self);
        t.grad_at(ai) += u;
        t.grad_at(ci) -= u.rowwise().sum();
      });
}

Var log_softmax_rows(Var a) {
  Tape& t = tape_of(a, "log_softmax_rows");
  const int ai = a.id;
  return t.record(
      "log_softmax_rows", log_row_normalize(t.value(a)),
      [ai](Tape& t, int self) {
        const Eigen::MatrixXd& u = t.grad_at(self);
        Eigen::ArrayXXd s = t.value_at(self).array().exp();
        Eigen::ArrayXd row_sums = u.array().rowwise().sum();
        t.grad_at(ai).array() += u.array() - (s.colwise() * row_sums);
      });
}

Var lse_matmul(Var logits, Var log_m) {
  Tape& t = tape_of(logits, "lse_matmul");
  require_same_tape(logits, log_m, "lse_matmul");
  const auto& g = t.value(logits);
  const auto& m = t.value(log_m);
  if (g.cols() != m.rows()) shape_error("lse_matmul");
  const int gi = logits.id, mi = log_m.id;
  return t.record(
      "lse_matmul", sahc::lse_matmul(g, m), [gi, mi](Tape& t, int self) {
        const Eigen::MatrixXd& u = t.grad_at(self);
        const auto& g = t.value_at(gi);
        const auto& m = t.value_at(mi);
        const auto& out = t.value_at(self);
        Eigen::MatrixXd& gg = t.grad_at(gi);
        Eigen::MatrixXd& gm = t.grad_at(mi);
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
          // w(n, i) = exp(g(n, i) + m(i, j) - out(n, j))
          Eigen::ArrayXXd w =
              ((g.array().rowwise() + m.col(j).transpose().array()).colwise() -
               out.col(j).array())
                  .exp();
          gg.array() += w.colwise() * u.col(j).array();
          gm.col(j) += w.matrix().transpose() * u.col(j);
        }
      });
}

Var logmix2(Var a, Var b) {
  Tape& t = tape_of(a, "logmix2");
  require_same_tape(a, b, "logmix2");
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) shape_error("logmix2");
  Eigen::MatrixXd out =
      av.binaryExpr(bv, [](double x, double y) { return logmix2_scalar(x, y); });
  const int ai = a.id, bi = b.id;
  return t.record("logmix2", std::move(out), [ai, bi](Tape& t, int self) {
    const Eigen::MatrixXd& u = t.grad_at(self);
    const auto& out = t.value_at(self).array();
    t.grad_at(ai).array() +=
        u.array() * 0.5 * (t.value_at(ai).array() - out).exp();
    t.grad_at(bi).array() +=
        u.array() * 0.5 * (t.value_at(bi).array() - out).exp();
  });
}

Var kld_rows(Var log_p, Var log_q) {
  Tape& t = tape_of(log_p, "kld_rows");
  require_same_tape(log_p, log_q, "kld_rows");
  const auto& pv = t.value(log_p);
  const auto& qv = t.value(log_q);
  if (pv.rows() != qv.rows() || pv.cols() != qv.cols())
    shape_error("kld_rows");
  Eigen::ArrayXXd p = pv.array().exp();
  Eigen::ArrayXXd contrib =
      (p > kKldMassFloor).select(p * (pv.array() - qv.array()), 0.0);
  Eigen::MatrixXd out = contrib.rowwise().sum().matrix();
  const int pi = log_p.id, qi = log_q.id;
  return t.record("kld_rows", std::move(out), [pi, qi](Tape& t, int self) {
    const Eigen::MatrixXd& u = t.grad_at(self);
    const auto& pv = t.value_at(pi);
    const auto& qv = t.value_at(qi);
    Eigen::ArrayXXd p = pv.array().exp();
    Eigen::ArrayXXd mask = (p > kKldMassFloor).select(
        Eigen::ArrayXXd::Ones(p.rows(), p.cols()), 0.0);
    Eigen::ArrayXXd dp = mask * p * (pv.array() - qv.array() + 1.0);
    Eigen::ArrayXXd dq = mask * p;
    t.grad_at(pi).array() += dp.colwise() * u.col(0).array();
    t.grad_at(qi).array() -= dq.colwise() * u.col(0).array();
  });
}

Var jsd_rows(Var log_a, Var log_b) {
  Var m = logmix2(log_a, log_b);
  return scale(add(kld_rows(log_a, m), kld_rows(log_b, m)), 0.5);
}

}  // namespace sahc
