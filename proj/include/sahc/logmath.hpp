#pragma once

// Log-domain probability kernels. Everything here works on natural-log
// values and stays finite for inputs whose exp() would overflow or
// underflow. Functions are pure and safe for concurrent use.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace sahc {

// Mass floor for KL terms: contributions with probability at or below this
// are treated as 0 * log 0 = 0.
inline constexpr double kKldMassFloor = 1e-12;

// log(sum_i exp(v_i)) with the max shift.
template <typename Derived>
typename Derived::Scalar lse(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (v.size() == 0) throw std::invalid_argument("sahc::lse: empty input");
  const Scalar m = v.maxCoeff();
  return m + std::log((v.derived().array() - m).exp().sum());
}

// g - lse(g), so that exp of the result sums to one.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> log_softmax(
    const Eigen::MatrixBase<Derived>& g) {
  using Scalar = typename Derived::Scalar;
  const Scalar z = lse(g);
  return (g.derived().array() - z).matrix();
}

// Column vector of row-wise lse values.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> lse_rows(
    const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() == 0 || m.cols() == 0)
    throw std::invalid_argument("sahc::lse_rows: empty input");
  Eigen::Array<Scalar, Eigen::Dynamic, 1> mx = m.rowwise().maxCoeff();
  Eigen::Array<Scalar, Eigen::Dynamic, 1> s =
      (m.derived().array().colwise() - mx).exp().rowwise().sum().log();
  return (mx + s).matrix();
}

// Each row minus its lse: rows of the result exponentiate to distributions.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
log_row_normalize(const Eigen::MatrixBase<Derived>& m) {
  Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, 1> z =
      lse_rows(m).array();
  return (m.derived().array().colwise() - z).matrix();
}

// KL divergence between two log-distributions over the same support.
// Terms whose mass is at or below kKldMassFloor contribute zero.
template <typename DerivedP, typename DerivedQ>
double kld(const Eigen::MatrixBase<DerivedP>& log_p,
           const Eigen::MatrixBase<DerivedQ>& log_q) {
  if (log_p.size() != log_q.size())
    throw std::invalid_argument("sahc::kld: mismatched lengths");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < log_p.size(); ++i) {
    const double lp = log_p(i);
    const double p = std::exp(lp);
    if (p <= kKldMassFloor) continue;
    acc += p * (lp - log_q(i));
  }
  return acc;
}

// Element-wise log(0.5 exp(a) + 0.5 exp(b)), stable for very negative inputs.
// Equal inputs return exactly, so mixtures of identical distributions keep
// divergences at an exact zero.
inline double logmix2_scalar(double a, double b) {
  if (a == b) return a;
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  if (hi == -std::numeric_limits<double>::infinity()) return hi;
  return hi + std::log1p(std::exp(lo - hi)) - std::numbers::ln2;
}

// Jensen-Shannon divergence between two log-distributions (nats).
// Symmetric, zero on equal inputs, bounded by log 2.
template <typename DerivedA, typename DerivedB>
double jsd(const Eigen::MatrixBase<DerivedA>& log_a,
           const Eigen::MatrixBase<DerivedB>& log_b) {
  if (log_a.size() != log_b.size())
    throw std::invalid_argument("sahc::jsd: mismatched lengths");
  Eigen::VectorXd log_m(log_a.size());
  for (Eigen::Index i = 0; i < log_a.size(); ++i)
    log_m(i) = logmix2_scalar(log_a(i), log_b(i));
  return 0.5 * (kld(log_a, log_m) + kld(log_b, log_m));
}

// Log-domain matrix product: out(n, j) = lse_i(logits(n, i) + log_m(i, j)).
// Shifts per output entry, so arbitrarily spread inputs stay finite.
inline Eigen::MatrixXd lse_matmul(const Eigen::MatrixXd& logits,
                                  const Eigen::MatrixXd& log_m) {
  if (logits.cols() != log_m.rows())
    throw std::invalid_argument("sahc::lse_matmul: inner dimensions differ");
  const Eigen::Index n = logits.rows(), t = log_m.cols();
  Eigen::MatrixXd out(n, t);
  for (Eigen::Index j = 0; j < t; ++j) {
    Eigen::ArrayXXd a =
        logits.array().rowwise() + log_m.col(j).transpose().array();
    Eigen::ArrayXd mx = a.rowwise().maxCoeff();
    out.col(j) = (mx + (a.colwise() - mx).exp().rowwise().sum().log()).matrix();
  }
  return out;
}

}  // namespace sahc
