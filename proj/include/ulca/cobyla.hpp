#pragma once

#include <atomic>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace ulca {

/// Settings for cobyla_minimize. Radii are in the units of the variables.
struct CobylaConfig {
  double rho_begin = 0.25;
  double rho_end = 1e-4;
  int max_evals = 40;
};

struct CobylaStep {
  Eigen::VectorXd x;  // incumbent best after this evaluation
  double f = 0.0;     // its value
};

struct CobylaResult {
  Eigen::VectorXd x;
  double f = 0.0;
  double f_init = 0.0;
  int evaluations = 0;
  bool cancelled = false;
  std::vector<CobylaStep> trace;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;
/// Called after every evaluation with (evaluations so far, best value).
using ProgressFn = std::function<void(int, double)>;

/// Powell's constrained optimization by linear approximations, restricted to
/// box constraints lower <= x <= upper. Linear interpolation over a simplex of
/// n + 1 points drives trust-region steps; the radius shrinks from rho_begin
/// to rho_end. Every evaluated point lies inside the box, and the best point
/// ever evaluated is returned.
CobylaResult cobyla_minimize(const Objective& f, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper, const CobylaConfig& cfg,
                             const std::atomic<bool>* cancel = nullptr,
                             const ProgressFn& progress = {});

}  // namespace ulca
