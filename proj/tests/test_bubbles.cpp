#include <doctest.h>

#include <cmath>
#include <memory>

#include "masslab/bubbles.hpp"
#include "masslab/error.hpp"
#include "masslab/families.hpp"

using namespace masslab;

namespace {
GridOptions grid(std::size_t m) {
  GridOptions g;
  g.resolution = m;
  return g;
}

struct Fixture {
  std::shared_ptr<const DiscreteOperator> op;
  MassResult mass;
  DimensionalConstants k;
};

Fixture fixture(const std::vector<double>& theta, double a) {
  const auto p = make_family("rp-bump", 3)(theta).primary;
  Fixture f{std::make_shared<const DiscreteOperator>(p, grid(256)), {}, compute_chain(3, a)};
  f.mass = solve_mass(*f.op, CutoffEta{3, 5});
  return f;
}
}  // namespace

TEST_CASE("assembly identities") {
  const Fixture f = fixture({2.0, 0.05, 0.05}, 1.0);
  REQUIRE(f.mass.m > 0.0);
  const BubbleAssembly as = build_assembly(f.op, f.mass, f.k);
  CHECK(as.A() == f.mass.m);
  const auto [g1, g2] = as.continuity_gaps();
  CHECK(g1 <= 1e-12);
  CHECK(g2 <= 1e-12);
  const double rho = as.rho();
  CHECK(rho < 1.0 / 6);
  const double om = 4 * M_PI;
  CHECK(as.u(rho) == doctest::Approx(as.ell() * (1 / (rho * om) + as.A())).epsilon(1e-14));
  for (const auto& p : as.predicates()) {
    INFO(p.name);
    CHECK(p.margin > 0.0);
  }
}

TEST_CASE("energy decomposition") {
  const Fixture f = fixture({2.0, 0.05, 0.05}, 1.0);
  const BubbleAssembly as = build_assembly(f.op, f.mass, f.k);
  const BubbleEnergies e = energy_decomposition(as);
  CHECK(std::abs(e.E3 - e.E3_boundary) <= 1e-8 * std::max(1.0, std::abs(e.E3)));
  CHECK(std::abs(e.E4 - e.E4_boundary) <= 1e-8 * std::max(1.0, std::abs(e.E4)));
  CHECK(e.ball_power <= f.k.F_n);
  CHECK(e.step1_energy <= e.gamma);
  CHECK(e.gamma == doctest::Approx(M_PI * as.A()).epsilon(1e-14));
}

TEST_CASE("quotient bound on feasible metrics") {
  for (const auto& theta : std::vector<std::vector<double>>{{2.0, 0.0, 0.0}, {2.0, 0.1, -0.05}, {2.5, 0.12, 0.1}}) {
    const Fixture f = fixture(theta, 1.0);
    const BubbleAssembly as = build_assembly(f.op, f.mass, f.k);
    const QuotientAudit q = quotient_bound_audit(as, 1e-6, false);
    for (const auto& c : q.checks) {
      INFO(c.name);
      CHECK(c.holds());
    }
    CHECK(q.passed());
    const double A = as.A(), s = f.k.sigma, G = f.k.G_n, B = f.k.B_n;
    CHECK(q.bound == doctest::Approx(s - std::pow(G, 3) * std::pow(A, 3) / std::pow(B + A, 3)).epsilon(1e-13));
    CHECK(q.Q_direct <= q.bound + 1e-6);
    CHECK(std::abs(q.Q_energies - q.Q_direct) <= 1e-6 * q.Q_direct);
    // a <= sigma - G^n (1/(B/A + 1))^n  iff  B/A + 1 >= G/(sigma - a)^{1/n}
    for (double a : {1.0, 4.0, 5.3, 5.47}) {
      const bool lhs = a <= s - std::pow(G / (B / A + 1), 3);
      const bool rhs = B / A + 1 >= G / std::cbrt(s - a);
      CHECK(lhs == rhs);
    }
  }
}

TEST_CASE("synthetic A on the flattened sphere") {
  const auto op = std::make_shared<const DiscreteOperator>(flattened_round_sphere(3, 2.0), grid(256));
  const MassResult m = solve_mass(*op, CutoffEta{3, 5});
  const DimensionalConstants k = compute_chain(3, 1.0);
  const BubbleAssembly as = build_assembly(op, m, k, 1e-3);
  CHECK(as.A() == 1e-3);
  const double rho = as.rho();
  CHECK(as.u(rho) == doctest::Approx(as.ell() * (1 / (rho * 4 * M_PI) + as.A())).epsilon(1e-14));
  // with A -> 0 the bound reduces to sigma(S^3)
  const BubbleAssembly tiny = build_assembly(op, m, k, 1e-9);
  const QuotientAudit q = quotient_bound_audit(tiny, 1e-6, false);
  CHECK(q.bound == doctest::Approx(k.sigma).epsilon(1e-12));
}

TEST_CASE("non-positive mass is rejected") {
  const auto op = std::make_shared<const DiscreteOperator>(flattened_round_sphere(3, 2.0), grid(128));
  const MassResult m = solve_mass(*op, CutoffEta{3, 5});
  try {
    (void)build_assembly(op, m, compute_chain(3, 1.0), -0.1);
    FAIL("expected NonPositiveMass");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonPositiveMass);
  }
}
