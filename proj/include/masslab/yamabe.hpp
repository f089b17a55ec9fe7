#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "masslab/sem_operator.hpp"

namespace masslab {

/// Q(u) = u^T K u / (sum w |u|^N)^{2/N}. Throws ZeroFunction for u = 0.
double yamabe_quotient(const DiscreteOperator& op, const Eigen::VectorXd& u);

struct YamabeOptions {
  std::size_t max_iterations = 2000;
  double tolerance = 1e-9;  // relative change of Q ...
  std::size_t window = 10;  // ... over this many iterations
};

struct YamabeResult {
  double Y_estimate = 0.0;
  double lambda1 = 0.0;
  Eigen::VectorXd minimizer;  // sum w |u|^N = 1, positive
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> history;  // Q per accepted iterate
};

/// Radial minimization: u <- L^{-1} u^{N-1} with L^N renormalization and backtracking when
/// lambda_1 > 0, preconditioned projected gradient otherwise. Q never increases along the
/// history. Throws MaxIterations (message carries the best value) when not converged.
YamabeResult minimize_yamabe(const DiscreteOperator& op, const YamabeOptions& options = {});

/// sigma(S^n) = n (n-2) F_n^{2/n}.
double sigma_sphere(int n);
/// c_n n (n-1) vol(S^n)^{2/n}.
double sigma_sphere_closed_form(int n);

struct BlendRow {
  double epsilon = 0.0;
  double Y = 0.0;
  double deviation = 0.0;
};

struct BlendTable {
  double Y_reference = 0.0;
  std::vector<BlendRow> rows;  // in input order
  double fitted_rate = 0.0;    // slope of log deviation against log epsilon
  double fitted_constant = 0.0;
  bool tail_decreasing = false;  // deviations strictly decrease as epsilon decreases
  double max_deviation = 0.0;
};

/// Y(g_eps) for g_eps = chi_eps h + (1 - chi_eps) g at each epsilon, against Y(g).
BlendTable blend_convergence_experiment(const WarpedProfile& g, const WarpedProfile& h,
                                        const std::vector<double>& epsilons, const GridOptions& grid,
                                        const YamabeOptions& options = {});

}  // namespace masslab
