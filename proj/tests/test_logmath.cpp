#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sahc/logmath.hpp"
#include "sahc/rng.hpp"
#include "support/oracles.hpp"

#include <cmath>
#include <limits>

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {
VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}
}  // namespace

TEST_CASE("lse basics") {
  CHECK(sahc::lse(vec({0.0, 0.0})) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(sahc::lse(vec({1000.0, 1000.0})) ==
        doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-14));
  CHECK(std::isfinite(sahc::lse(vec({1000.0, 1000.0}))));
  // frozen from the direct-summation oracle
  CHECK(sahc::lse(vec({1.0, 2.0, 3.0})) ==
        doctest::Approx(3.407605964444380).epsilon(1e-13));
  CHECK(sahc::lse(vec({1.0, 2.0, 3.0})) ==
        doctest::Approx(oracles::lse_direct(vec({1.0, 2.0, 3.0}))).epsilon(1e-14));
  CHECK_THROWS_AS(sahc::lse(VectorXd()), std::invalid_argument);
}

TEST_CASE("lse shift property") {
  sahc::Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    VectorXd v(5);
    for (int i = 0; i < 5; ++i) v(i) = rng.uniform(-10, 10);
    const double c = rng.uniform(-100, 100);
    CHECK(sahc::lse((v.array() + c).matrix().eval()) ==
          doctest::Approx(sahc::lse(v) + c).epsilon(1e-11));
  }
}

TEST_CASE("log_softmax") {
  VectorXd u = sahc::log_softmax(vec({0.0, 0.0, 0.0}));
  for (int i = 0; i < 3; ++i)
    CHECK(u(i) == doctest::Approx(-std::log(3.0)).epsilon(1e-14));

  // frozen from the naive exp/normalize oracle
  VectorXd o = sahc::log_softmax(vec({2.0, 1.0, 0.0}));
  CHECK(o(0) == doctest::Approx(-0.407605964444380).epsilon(1e-12));
  CHECK(o(1) == doctest::Approx(-1.407605964444380).epsilon(1e-12));
  CHECK(o(2) == doctest::Approx(-2.407605964444380).epsilon(1e-12));

  sahc::Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    VectorXd g(6);
    for (int i = 0; i < 6; ++i) g(i) = rng.uniform(-700, 700);
    VectorXd ls = sahc::log_softmax(g);
    CHECK(std::abs(ls.array().exp().sum() - 1.0) <= 1e-12);
    // shift invariance
    const double c = rng.uniform(-50, 50);
    VectorXd shifted = sahc::log_softmax((g.array() + c).matrix().eval());
    CHECK((shifted - ls).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("log_row_normalize") {
  MatrixXd one_row(1, 2);
  one_row << std::log(2.0), std::log(2.0);
  MatrixXd n = sahc::log_row_normalize(one_row);
  CHECK(std::exp(n(0, 0)) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(std::exp(n(0, 1)) == doctest::Approx(0.5).epsilon(1e-14));

  MatrixXd single_col = MatrixXd::Constant(4, 1, -3.7);
  CHECK(sahc::log_row_normalize(single_col).cwiseAbs().maxCoeff() == 0.0);

  MatrixXd row(1, 3);
  row << 0.0, 1.0, 2.0;
  MatrixXd rn = sahc::log_row_normalize(row);
  // frozen softmax oracle values
  CHECK(std::exp(rn(0, 0)) == doctest::Approx(0.090030573170380).epsilon(1e-12));
  CHECK(std::exp(rn(0, 1)) == doctest::Approx(0.244728471054798).epsilon(1e-12));
  CHECK(std::exp(rn(0, 2)) == doctest::Approx(0.665240955774822).epsilon(1e-12));

  sahc::Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    MatrixXd m(4, 5);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 5; ++j) m(i, j) = rng.uniform(-30, 30);
    MatrixXd out = sahc::log_row_normalize(m);
    for (int i = 0; i < 4; ++i)
      CHECK(std::abs(out.row(i).array().exp().sum() - 1.0) <= 1e-12);
  }
}

TEST_CASE("kld") {
  VectorXd u = vec({std::log(0.5), std::log(0.5)});
  CHECK(sahc::kld(u, u) == 0.0);

  // single surviving term: p = [1, 0] against the uniform
  VectorXd p10 = vec({0.0, std::log(0.0)});  // log 0 = -inf
  CHECK(sahc::kld(p10, u) == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  // frozen from the direct-sum oracle
  VectorXd lp = vec({std::log(0.7), std::log(0.3)});
  CHECK(sahc::kld(lp, u) == doctest::Approx(0.082282878505052).epsilon(1e-12));
  CHECK(sahc::kld(lp, u) ==
        doctest::Approx(oracles::kld_direct(vec({0.7, 0.3}), vec({0.5, 0.5})))
            .epsilon(1e-13));

  CHECK_THROWS_AS(sahc::kld(vec({0.0}), u), std::invalid_argument);
}

TEST_CASE("jsd") {
  VectorXd a = vec({std::log(0.9), std::log(0.1)});
  VectorXd b = vec({std::log(0.4), std::log(0.6)});
  CHECK(sahc::jsd(a, a) == 0.0);

  // disjoint point masses reach the log 2 ceiling
  VectorXd e1 = vec({0.0, std::log(0.0)});
  VectorXd e2 = vec({std::log(0.0), 0.0});
  CHECK(sahc::jsd(e1, e2) == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  // frozen from the direct-sum oracle
  CHECK(sahc::jsd(a, b) == doctest::Approx(0.148399318834280).epsilon(1e-12));
  CHECK(sahc::jsd(a, b) ==
        doctest::Approx(oracles::jsd_direct(vec({0.9, 0.1}), vec({0.4, 0.6})))
            .epsilon(1e-13));

  CHECK_THROWS_AS(sahc::jsd(vec({0.0}), a), std::invalid_argument);
}

TEST_CASE("jsd properties over random distributions") {
  sahc::Rng rng(19);
  const double log2 = std::log(2.0);
  for (int trial = 0; trial < 500; ++trial) {
    const int k = 2 + static_cast<int>(rng.integer(8));
    VectorXd ga(k), gb(k);
    for (int i = 0; i < k; ++i) {
      ga(i) = rng.uniform(-6, 6);
      gb(i) = rng.uniform(-6, 6);
    }
    VectorXd a = sahc::log_softmax(ga), b = sahc::log_softmax(gb);
    const double ab = sahc::jsd(a, b);
    CHECK(ab == sahc::jsd(b, a));
    CHECK(ab >= -1e-12);
    CHECK(ab <= log2 + 1e-12);
    CHECK(sahc::jsd(a, a) <= 1e-12);
    // direct-sum oracle agreement
    CHECK(ab == doctest::Approx(oracles::jsd_direct(a.array().exp(),
                                                    b.array().exp()))
                    .epsilon(1e-10));
  }
}

TEST_CASE("lse_matmul agrees with the natural domain and stays finite") {
  sahc::Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    MatrixXd g(3, 4), lm(4, 2);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) g(i, j) = rng.uniform(-5, 5);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 2; ++j) lm(i, j) = rng.uniform(-5, 5);
    MatrixXd out = sahc::lse_matmul(g, lm);
    MatrixXd expected =
        (g.array().exp().matrix() * lm.array().exp().matrix()).array().log();
    CHECK((out - expected).cwiseAbs().maxCoeff() <= 1e-10);
  }

  // spread inputs that would underflow a double-shift scheme
  MatrixXd g(1, 2), lm(2, 1);
  g << 0.0, -800.0;
  lm << -800.0, 0.0;
  const double out = sahc::lse_matmul(g, lm)(0, 0);
  CHECK(std::isfinite(out));
  CHECK(out == doctest::Approx(-800.0 + std::log(2.0)).epsilon(1e-12));

  CHECK_THROWS_AS(sahc::lse_matmul(MatrixXd::Zero(2, 3), MatrixXd::Zero(2, 3)),
                  std::invalid_argument);
}
