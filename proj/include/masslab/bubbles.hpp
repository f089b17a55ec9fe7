#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "masslab/constants.hpp"
#include "masslab/mass.hpp"

namespace masslab {

struct Predicate {
  std::string name;
  double margin = 0.0;  // >= 0 when satisfied
  bool ok() const { return margin >= 0.0; }
};

struct BubbleEnergies {
  double E1 = 0.0;          // int_{B_rho} |du|^2
  double E2 = 0.0;          // int_{M \ B_rho} |dpsi|^2 + c_n s psi^2
  double E3 = 0.0;          // closed form l^2 (rho^{2-n}/((n-2) omega) + A)
  double E3_boundary = 0.0; // -l^2 boundary integral of (G - h alpha) d_r (G - h alpha)
  double E4 = 0.0;          // closed form
  double E4_boundary = 0.0; // boundary integral of u d_r u
  double D = 0.0;           // (int |psi|^N)^{2/N}
  double ball_power = 0.0;  // int_{B_rho} |psi|^N
  double step1_energy = 0.0;  // int |d(h alpha)|^2
  double gamma = 0.0;         // (n-2) omega |A| / 4
};

/// The glued test function of the Yamabe-gap argument on a radial metric flat on B_p(1).
/// width is the bubble scale (the proof's second beta), rho the gluing radius.
class BubbleAssembly {
 public:
  BubbleAssembly(std::shared_ptr<const DiscreteOperator> op, const MassResult& mass, const DimensionalConstants& consts,
                 std::optional<double> synthetic_A = {});

  int dimension() const { return n_; }
  double A() const { return A_; }
  double a() const { return consts_.a; }
  double rho() const { return rho_; }
  double width() const { return width_; }
  double ell() const { return ell_; }
  const DimensionalConstants& constants() const { return consts_; }
  const DiscreteOperator& op() const { return *op_; }
  const std::vector<Predicate>& predicates() const { return predicates_; }
  bool smallness_ok() const;

  double u(double r) const;
  double du(double r) const;
  double h(double r) const;
  double dh(double r) const;
  /// Green function eta r^{2-n} + A + alpha and its radial derivative.
  double green(double t) const;
  double dgreen(double t) const;
  double alpha(double t) const;
  double dalpha(double t) const;
  double psi(double t) const;
  double dpsi(double t) const;

  /// |psi(rho-) - psi(rho+)| and the same at 2 rho, relative to psi(rho).
  std::pair<double, double> continuity_gaps() const;

 private:
  std::shared_ptr<const DiscreteOperator> op_;
  DimensionalConstants consts_;
  int n_;
  double A_;
  double m_;
  Eigen::VectorXd beta_;
  Eigen::VectorXd dbeta_;
  CutoffEta eta_;
  double rho_;
  double width_;
  double ell_;
  std::vector<Predicate> predicates_;
};

/// Builds the assembly; NonPositiveMass when A <= 0, SmallnessFailed naming the first violated
/// predicate.
BubbleAssembly build_assembly(std::shared_ptr<const DiscreteOperator> op, const MassResult& mass,
                              const DimensionalConstants& consts, std::optional<double> synthetic_A = {});

/// E1, E2 by radial quadrature on the profile (bubble core in the scaled variable r = width s),
/// E3, E4 in closed form and by boundary evaluation.
BubbleEnergies energy_decomposition(const BubbleAssembly& asm_);

/// Element grid geometrically graded from 1/2 down to width/8, with breaks at rho and 2 rho.
GridOptions bubble_grid(const BubbleAssembly& asm_, std::size_t resolution = 256);

struct AuditCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double tol = 0.0;  // absolute allowance for quadrature rounding
  bool holds() const { return lhs <= rhs + tol; }
};

struct QuotientAudit {
  BubbleEnergies energies;
  double Q_energies = 0.0;  // (E1 + E2) / D
  double Q_direct = 0.0;    // Yamabe quotient of psi on the graded grid
  double numerator_direct = 0.0;
  double bound = 0.0;       // sigma - G_n^n A^n / (B_n + A)^n
  double margin = 0.0;      // bound + slack - Q_direct
  std::vector<AuditCheck> checks;
  bool passed() const;
};

/// Verifies the display chain of the gap argument on this assembly; throws AuditFailure naming
/// the first violated display unless `throw_on_failure` is false.
QuotientAudit quotient_bound_audit(const BubbleAssembly& asm_, double slack = 1e-6, bool throw_on_failure = true,
                                   std::size_t resolution = 256);

nlohmann::json to_json(const BubbleAssembly& asm_);
nlohmann::json to_json(const QuotientAudit& audit);

}  // namespace masslab
