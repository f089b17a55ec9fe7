#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "masslab/mass.hpp"

namespace masslab {

/// Volume of the Euclidean unit n-ball.
double unit_ball_volume(int n);

/// omega_{n-1} int_0^inf (1+s^2)^{-n} s^{n-1} ds by Gauss-Legendre after s = tan(theta).
double F_n_quadrature(int n);
/// omega_{n-1} B(n/2, n/2) / 2.
double F_n_closed_form(int n);

struct BaseConstants {
  double C_n = 0.0;
  double D_n = 0.0;  // 2 (int |F_eta|^{N/(N-1)} dv)^{(N-1)/N}
  double B_n = 0.0;  // 6^{n/N} vol(B)^{-1/N} D_n
};

BaseConstants compute_base_constants(const CutoffEta& eta);

/// (int |dh|^n dv)^{2/n} for the smoothstep cutoff h = 1 - S((r - rho)/rho); scale free.
double alpha0_cutoff(int n);
/// rho * sup |dh| of the same cutoff (15/8, to compare with the Lipschitz bound 2).
double cutoff_gradient_constant();

/// E_n(a) = (2^n - 1)^{1/N} delta^{1/2} vol(B)^{1/N} max(1, 2/a).
double step1_constant(int n, double delta, double a);

/// Largest admissible delta_n (times 0.999) for level a; see compute_chain for the constraints.
double choose_delta(int n, double a, double alpha0, double B_n);

struct DimensionalConstants {
  int n = 3;
  double a = 0.0;
  double omega = 0.0;
  double vol_ball = 0.0;
  double N = 0.0;
  double C_n = 0.0;
  double D_n = 0.0;
  double B_n = 0.0;
  double zeta = 0.0;
  double alpha0 = 0.0;
  double delta = 0.0;
  double E_step1 = 0.0;
  double Eprime = 0.0;
  double F_n = 0.0;
  double F_n_closed = 0.0;
  double G_n = 0.0;
  double alpha_n = 0.0;
  double d_n = 0.0;
  double sigma = 0.0;
  std::string eta_profile_id;
  std::string cutoff_profile_id;

  /// rho(A)^{n-2} = delta A / (B_n + A)^2.
  double rho(double A) const;
  /// Bubble width zeta sqrt(A) rho^{n/2}.
  double width(double A) const;
};

/// Named inequality that the chain must satisfy, with margin rhs - lhs (>= 0 when it holds;
/// strict ones need > 0).
struct ChainCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool strict = false;
  bool holds() const { return strict ? lhs < rhs : lhs <= rhs; }
};

/// Full chain for level a > 0 (memoized per (n, a, eta shape)).
DimensionalConstants compute_chain(int n, double a, int eta_smoothness = 5);

/// Re-verifies every inequality used to pick delta_n, plus positivity/finiteness of the chain.
std::vector<ChainCheck> verify_chain(const DimensionalConstants& c);

struct MassUpperBounds {
  double simple = 0.0;   // D_n^2 / (4a)
  double refined = 0.0;  // d_n (sigma(S^n) - a)^{1/n} / a
};

/// Rejects a outside (0, sigma(S^n)).
MassUpperBounds mass_upper_bounds(int n, double a);

struct GapVerdict {
  double threshold = 0.0;  // d_n / sigma(S^n)
  double estimate = 0.0;   // empirical limsup of mass / eps^{1/n}
  double best_a = 0.0;
  std::size_t used = 0;
  bool hypothesis_met = false;
};

/// Evaluates the ratio mass_i / (sigma_M - a_i)^{1/n} over the samples closest to sigma_M (the
/// half with the smallest gaps) and compares its max with d_n / sigma(S^n), with d_n taken at
/// the smallest sampled level. A positive verdict is meaningful, a negative one inconclusive.
GapVerdict sigma_gap_criterion(int n, const std::vector<std::pair<double, double>>& samples, double sigma_M);

nlohmann::json to_json(const DimensionalConstants& c);

}  // namespace masslab
