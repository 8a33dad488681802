#pragma once

// Central-finite-difference verification of the backward rules: one small
// randomized case per tape op, plus every parameter of a three-level toy
// model under the full training loss.

#include <cstdint>
#include <string>
#include <vector>

namespace sahc {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> ops;     // one per op, worst case across trials
  std::vector<GradCheckEntry> params;  // one per toy-model parameter
  bool pass = false;
};

inline constexpr double kFdStep = 1e-5;
inline constexpr double kFdRelTol = 1e-5;
// Relative error uses max(|analytic|, |fd|, 1e-3) as denominator, which
// makes the tolerance an absolute 1e-8 floor for small gradients.
inline constexpr double kFdDenomFloor = 1e-3;

double fd_rel_err(double analytic, double fd);

// Per-op checks only: one randomized case per op per trial, worst error kept.
std::vector<GradCheckEntry> run_op_gradcheck(std::uint64_t seed, int trials);

// Toy-model check only: every parameter under the full loss, per trial.
std::vector<GradCheckEntry> run_model_gradcheck(std::uint64_t seed, int trials);

// Runs `trials` seeded repetitions of every op case and one toy-model check
// per trial, keeping the worst error seen per entry.
GradCheckReport run_gradcheck(std::uint64_t seed, int trials);

std::string format_gradcheck_report(const GradCheckReport& report);

}  // namespace sahc
