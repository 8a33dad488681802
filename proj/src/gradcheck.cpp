#include "sahc/gradcheck.hpp"

#include "sahc/autodiff.hpp"
#include "sahc/logmath.hpp"
#include "sahc/model.hpp"
#include "sahc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace sahc {

double fd_rel_err(double analytic, double fd) {
  const double denom =
      std::max({std::abs(analytic), std::abs(fd), kFdDenomFloor});
  return std::abs(analytic - fd) / denom;
}

namespace {

using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

struct BuiltCase {
  std::vector<Eigen::MatrixXd> inputs;
  Builder build;
};

struct OpCase {
  const char* name;
  std::function<BuiltCase(Rng&)> make;
};

Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols, double lo,
                              double hi) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

Eigen::MatrixXd random_log_dist_rows(Rng& rng, int rows, int cols) {
  return log_row_normalize(random_matrix(rng, rows, cols, -2.0, 2.0));
}

double eval_case(const BuiltCase& c,
                 const std::vector<Eigen::MatrixXd>& inputs) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const auto& in : inputs)
    vars.push_back(tape.input(in, /*requires_grad=*/true));
  Var out = c.build(tape, vars);
  Var loss = mean(out);
  return tape.value(loss)(0, 0);
}

double case_max_rel_err(const BuiltCase& c) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(c.inputs.size());
  for (const auto& in : c.inputs)
    vars.push_back(tape.input(in, /*requires_grad=*/true));
  Var out = c.build(tape, vars);
  Var loss = mean(out);
  tape.backward(loss);

  double worst = 0.0;
  std::vector<Eigen::MatrixXd> perturbed = c.inputs;
  for (size_t k = 0; k < c.inputs.size(); ++k) {
    const Eigen::MatrixXd& analytic = tape.grad(vars[k]);
    for (Eigen::Index i = 0; i < perturbed[k].rows(); ++i) {
      for (Eigen::Index j = 0; j < perturbed[k].cols(); ++j) {
        const double saved = perturbed[k](i, j);
        perturbed[k](i, j) = saved + kFdStep;
        const double up = eval_case(c, perturbed);
        perturbed[k](i, j) = saved - kFdStep;
        const double down = eval_case(c, perturbed);
        perturbed[k](i, j) = saved;
        const double fd = (up - down) / (2.0 * kFdStep);
        worst = std::max(worst, fd_rel_err(analytic(i, j), fd));
      }
    }
  }
  return worst;
}

std::vector<OpCase> op_cases() {
  std::vector<OpCase> cases;
  cases.push_back({"matmul", [](Rng& rng) {
                     return BuiltCase{{random_matrix(rng, 3, 4, -2, 2),
                                       random_matrix(rng, 4, 2, -2, 2)},
                                      [](Tape&, const std::vector<Var>& v) {
                                        return matmul(v[0], v[1]);
                                      }};
                   }});
  cases.push_back({"transpose", [](Rng& rng) {
                     return BuiltCase{{random_matrix(rng, 3, 4, -2, 2),
                                       random_matrix(rng, 3, 2, -2, 2)},
                                      [](Tape&, const std::vector<Var>& v) {
                                        return matmul(transpose(v[0]), v[1]);
                                      }};
                   }});
  cases.push_back({"add", [](Rng& rng) {
                     return BuiltCase{{random_matrix(rng, 3, 3, -2, 2),
                                       random_matrix(rng, 3, 3, -2, 2)},
                                      [](Tape&, const std::vector<Var>& v) {
                                        return add(v[0], v[1]);
                                      }};
                   }});
  cases.push_back({"sub", [](Rng& rng) {
                     return BuiltCase{{random_matrix(rng, 3, 3, -2, 2),
                                       random_matrix(rng, 3, 3, -2, 2)},
                                      [](Tape&, const std::vector<Var>& v) {
                                        return sub(v[0], v[1]);
                                      }};
                   }});
  cases.push_back({"scale", [](Rng& rng) {
                     return BuiltCase{{random_matrix(rng, 3, 3, -2, 2)},
                                      [](Tape&, const std::vector<Var>& v) {
                                        return scale(v[0], -1.7);
                                      }};
                   }});
  cases.push_back({"exp", [](Rng& rng) {
                     return BuiltCase{{random_matrix(rng, 3, 3, -2, 2)},
                                      [](Tape&, const std::vector<Var>& v) {
                                        return exp(v[0]);
                                      }};
                   }});
  cases.push_back({"log", [](Rng& rng) {
                     return BuiltCase{{random_matrix(rng, 3, 3, 0.2, 3.0)},
                                      [](Tape&, const std::vector<Var>& v) {
                                        return log(v[0]);
                                      }};
                   }});
  cases.push_back({"tanh", [](Rng& rng) {
                     return BuiltCase{{random_matrix(rng, 3, 3, -2, 2)},
                                      [](Tape&, const std::vector<Var>& v) {
                                        return tanh(v[0]);
                                      }};
                   }});
  cases.push_back({"gather_rows", [](Rng& rng) {
                     std::vector<int> rows(4);
                     for (int& r : rows)
                       r = static_cast<int>(rng.integer(5));
                     return BuiltCase{
                         {random_matrix(rng, 5, 3, -2, 2)},
                         [rows](Tape&, const std::vector<Var>& v) {
                           return gather_rows(v[0], rows);
                         }};
                   }});
  cases.push_back({"pick", [](Rng& rng) {
                     std::vector<int> cols(4);
                     for (int& c : cols)
                       c = static_cast<int>(rng.integer(3));
                     return BuiltCase{
                         {random_matrix(rng, 4, 3, -2, 2)},
                         [cols](Tape&, const std::vector<Var>& v) {
                           return pick(v[0], cols);
                         }};
                   }});
  cases.push_back({"hcat", [](Rng& rng) {
                     return BuiltCase{{random_matrix(rng, 3, 2, -2, 2),
                                       random_matrix(rng, 3, 4, -2, 2)},
                                      [](Tape&, const std::vector<Var>& v) {
                                        return hcat({v[0], v[1]});
                                      }};
                   }});
  cases.push_back({"vcat", [](Rng& rng) {
                     return BuiltCase{{random_matrix(rng, 2, 3, -2, 2),
                                       random_matrix(rng, 4, 3, -2, 2)},
                                      [](Tape&, const std::vector<Var>& v) {
                                        return vcat({v[0], v[1]});
                                      }};
                   }});
  cases.push_back({"lse_rows", [](Rng& rng) {
                     return BuiltCase{{random_matrix(rng, 4, 5, -3, 3)},
                                      [](Tape&, const std::vector<Var>& v) {
                                        return lse_rows(v[0]);
                                      }};
                   }});
  cases.push_back({"mean", [](Rng& rng) {
                     return BuiltCase{{random_matrix(rng, 4, 5, -3, 3)},
                                      [](Tape&, const std::vector<Var>& v) {
                                        return mean(v[0]);
                                      }};
                   }});
  cases.push_back({"add_rowvec", [](Rng& rng) {
                     return BuiltCase{{random_matrix(rng, 4, 3, -2, 2),
                                       random_matrix(rng, 1, 3, -2, 2)},
                                      [](Tape&, const std::vector<Var>& v) {
                                        return add_rowvec(v[0], v[1]);
                                      }};
                   }});
  cases.push_back({"sub_colvec", [](Rng& rng) {
                     return BuiltCase{{random_matrix(rng, 4, 3, -2, 2),
                                       random_matrix(rng, 4, 1, -2, 2)},
                                      [](Tape&, const std::vector<Var>& v) {
                                        return sub_colvec(v[0], v[1]);
                                      }};
                   }});
  cases.push_back({"log_softmax_rows", [](Rng& rng) {
                     return BuiltCase{{random_matrix(rng, 4, 5, -3, 3)},
                                      [](Tape&, const std::vector<Var>& v) {
                                        return log_softmax_rows(v[0]);
                                      }};
                   }});
  cases.push_back({"lse_matmul", [](Rng& rng) {
                     return BuiltCase{{random_matrix(rng, 4, 5, -3, 3),
                                       random_matrix(rng, 5, 3, -3, 3)},
                                      [](Tape&, const std::vector<Var>& v) {
                                        return lse_matmul(v[0], v[1]);
                                      }};
                   }});
  cases.push_back({"logmix2", [](Rng& rng) {
                     return BuiltCase{{random_log_dist_rows(rng, 4, 5),
                                       random_log_dist_rows(rng, 4, 5)},
                                      [](Tape&, const std::vector<Var>& v) {
                                        return logmix2(v[0], v[1]);
                                      }};
                   }});
  cases.push_back({"kld_rows", [](Rng& rng) {
                     return BuiltCase{{random_log_dist_rows(rng, 4, 5),
                                       random_log_dist_rows(rng, 4, 5)},
                                      [](Tape&, const std::vector<Var>& v) {
                                        return kld_rows(v[0], v[1]);
                                      }};
                   }});
  cases.push_back({"jsd_rows", [](Rng& rng) {
                     return BuiltCase{{random_log_dist_rows(rng, 4, 5),
                                       random_log_dist_rows(rng, 4, 5)},
                                      [](Tape&, const std::vector<Var>& v) {
                                        return jsd_rows(v[0], v[1]);
                                      }};
                   }});
  return cases;
}

HierarchySpec toy_hierarchy() {
  return HierarchySpec::from_parts(
      {{"c1", "c2"}, {"m1", "m2", "m3"}, {"f1", "f2", "f3", "f4", "f5"}},
      {{0, 1, 1}, {0, 0, 1, 1, 2}});
}

struct ToyProblem {
  Model model;
  Eigen::MatrixXd x;
  std::vector<std::vector<int>> labels;
  LossOptions options;
};

ToyProblem make_toy_problem(std::uint64_t seed) {
  BackboneConfig backbone;
  backbone.input_dim = 6;
  backbone.hidden = {7};
  backbone.feature_dim = 8;
  ToyProblem toy{Model(toy_hierarchy(), backbone, JointInit::kUniform, seed),
                 {},
                 {},
                 {}};
  Rng rng(seed * 0x9E3779B97F4A7C15ULL + 1);
  // Move off the symmetric init point so no gradient is structurally zero.
  for (auto& p : toy.model.params())
    for (Eigen::Index i = 0; i < p.value.rows(); ++i)
      for (Eigen::Index j = 0; j < p.value.cols(); ++j)
        p.value(i, j) += 0.1 * rng.normal();
  const int batch = 4;
  toy.x = random_matrix(rng, batch, 6, -1.5, 1.5);
  std::vector<int> fine(batch);
  for (int& y : fine) y = static_cast<int>(rng.integer(5));
  toy.labels = toy.model.hierarchy().lift_labels(fine);
  toy.options.lambda_hc = 1.0;
  return toy;
}

double toy_loss(ToyProblem& toy) {
  Tape tape;
  std::vector<Var> bound = toy.model.bind(tape);
  Var x = tape.input(toy.x);
  return toy.model
      .loss(tape, bound, x, toy.labels, toy.options)
      .total;
}

}  // namespace

std::vector<GradCheckEntry> run_op_gradcheck(std::uint64_t seed, int trials) {
  if (trials < 1) trials = 1;
  const std::vector<OpCase> cases = op_cases();
  std::vector<GradCheckEntry> entries;
  for (const auto& c : cases) entries.push_back({c.name, 0.0, true});
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(seed + static_cast<std::uint64_t>(trial));
    for (size_t k = 0; k < cases.size(); ++k) {
      const double err = case_max_rel_err(cases[k].make(rng));
      entries[k].max_rel_err = std::max(entries[k].max_rel_err, err);
    }
  }
  for (auto& entry : entries) entry.pass = entry.max_rel_err <= kFdRelTol;
  return entries;
}

std::vector<GradCheckEntry> run_model_gradcheck(std::uint64_t seed,
                                                int trials) {
  if (trials < 1) trials = 1;
  std::vector<GradCheckEntry> entries;
  for (int trial = 0; trial < trials; ++trial) {
    ToyProblem toy = make_toy_problem(seed + static_cast<std::uint64_t>(trial));
    Tape tape;
    std::vector<Var> bound = toy.model.bind(tape);
    Var x = tape.input(toy.x);
    LossBreakdown breakdown =
        toy.model.loss(tape, bound, x, toy.labels, toy.options);
    tape.backward(breakdown.total_var);

    ParamSet& params = toy.model.params();
    for (int i = 0; i < params.size(); ++i) {
      double worst = 0.0;
      const Eigen::MatrixXd analytic = tape.grad(bound[i]);
      Eigen::MatrixXd& value = params.at(i).value;
      for (Eigen::Index r = 0; r < value.rows(); ++r) {
        for (Eigen::Index c = 0; c < value.cols(); ++c) {
          const double saved = value(r, c);
          value(r, c) = saved + kFdStep;
          const double up = toy_loss(toy);
          value(r, c) = saved - kFdStep;
          const double down = toy_loss(toy);
          value(r, c) = saved;
          const double fd = (up - down) / (2.0 * kFdStep);
          worst = std::max(worst, fd_rel_err(analytic(r, c), fd));
        }
      }
      if (trial == 0)
        entries.push_back({params.at(i).name, worst, true});
      else
        entries[i].max_rel_err = std::max(entries[i].max_rel_err, worst);
    }
  }
  for (auto& entry : entries) entry.pass = entry.max_rel_err <= kFdRelTol;
  return entries;
}

GradCheckReport run_gradcheck(std::uint64_t seed, int trials) {
  GradCheckReport report;
  report.ops = run_op_gradcheck(seed, trials);
  report.params = run_model_gradcheck(seed, trials);
  report.pass = true;
  for (const auto& e : report.ops) report.pass = report.pass && e.pass;
  for (const auto& e : report.params) report.pass = report.pass && e.pass;
  return report;
}

std::string format_gradcheck_report(const GradCheckReport& report) {
  std::ostringstream out;
  out << "op backward rules:\n";
  for (const auto& e : report.ops)
    out << "  " << (e.pass ? "PASS" : "FAIL") << "  " << e.name
        << "  max_rel_err=" << e.max_rel_err << "\n";
  out << "toy-model parameters (full loss):\n";
  for (const auto& e : report.params)
    out << "  " << (e.pass ? "PASS" : "FAIL") << "  " << e.name
        << "  max_rel_err=" << e.max_rel_err << "\n";
  out << (report.pass ? "gradcheck: PASS" : "gradcheck: FAIL") << "\n";
  return out.str();
}

}  // namespace sahc
