#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "masslab/sem_operator.hpp"

namespace masslab {

/// eta(r) = 1/((n-2) omega_{n-1}) on [0, 1/2], smoothstep down to 0 at r = 1.
struct CutoffEta {
  int n = 3;
  /// 5 selects the quintic smoothstep, 7 the degree-7 one.
  int smoothness = 5;

  double plateau() const;
  Jet eval(double r) const;
  std::string id() const;
};

/// F_eta(r) = Delta(eta r^{2-n}) = r^{2-n} (-eta'' + (n-3) eta'/r); zero off [1/2, 1].
double F_eta(const CutoffEta& eta, double r);

/// int eta r^{2-n} F_eta dv over the flat annulus (the value J(0)).
double eta_energy(const CutoffEta& eta);
/// max |F_eta| over [1/2, 1].
double eta_sup(const CutoffEta& eta);

/// F_eta sampled at the operator nodes. Requires flat_radius >= 1.
Eigen::VectorXd compute_F_eta(const DiscreteOperator& op, const CutoffEta& eta);

/// J(u) = C_n + 2 int u F_eta + int u L u, all by the operator's quadrature.
double J_value(const DiscreteOperator& op, const CutoffEta& eta, const Eigen::VectorXd& u);

struct MassResult {
  int n = 0;
  double m = 0.0;            // beta(p), the primary value
  double m_from_pole = 0.0;  // same as m
  double m_from_J = 0.0;     // -J(beta), the audit value
  double J_at_beta = 0.0;
  double C_n = 0.0;
  double residual = 0.0;          // weighted residual of L beta = -F_eta
  double harmonic_defect = 0.0;   // relative |K alpha| on r < 1/2
  std::size_t nodes = 0;
  std::string eta_id;
  Eigen::VectorXd beta;

  double extraction_gap() const { return std::abs(m_from_J - m_from_pole); }
};

/// Minimizer of J: K beta = -W F_eta, m = beta(p). Throws NotPositive when lambda_1 <= 0 and
/// InvalidArgument when the metric is not flat on the unit ball.
MassResult solve_mass(const DiscreteOperator& op, const CutoffEta& eta);

nlohmann::json to_json(const MassResult& r, bool include_field = false);

struct JgeqReport {
  double C = 0.0;        // C_n
  double Cprime = 0.0;   // 2 sup|F| vol(B_1)^{(N-1)/N}
  double Csecond = 0.0;  // a
  std::size_t trials = 0;
  std::size_t violations = 0;
  double min_slack = 0.0;
  std::size_t witness = 0;  // trial index of the smallest slack
  double mass_bound = 0.0;  // Cprime^2/(4a) - C, implied upper bound for m
};

/// Checks J(u) >= C - C' X + a X^2, X = ||u||_{L^N}, on u = 0 plus `trials` random smooth radial
/// fields drawn from `seed`.
JgeqReport quadratic_lower_bound_audit(const DiscreteOperator& op, const CutoffEta& eta, double a,
                                       std::size_t trials, std::uint64_t seed);

/// Random smooth radial test field number `index` of the stream `seed` (cosine modes plus a bump).
Eigen::VectorXd random_radial_field(const DiscreteOperator& op, std::uint64_t seed, std::size_t index);

/// L^N norm (sum w |u|^N)^{1/N}.
double critical_norm(const DiscreteOperator& op, const Eigen::VectorXd& u);

/// Lower bound m >= (int u0 F)^2 / int |du0|^2 - C_n from the optimal multiple of the fixed test
/// function u0 = 1 - S(2r - 1/2), supported in the flat unit ball; independent of the metric.
double test_function_lower_bound(const CutoffEta& eta);

}  // namespace masslab
