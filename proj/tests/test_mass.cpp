#include <doctest.h>

#include <cmath>
#include <numbers>

#include "masslab/error.hpp"
#include "masslab/families.hpp"
#include "masslab/mass.hpp"
#include "masslab/quadrature.hpp"

using namespace masslab;
using std::numbers::pi;

namespace {
GridOptions grid(std::size_t m) {
  GridOptions g;
  g.resolution = m;
  return g;
}

WarpedProfile bumped() { return make_family("rp-bump", 3)(std::vector<double>{2.0, 0.1, -0.08}).primary; }
}  // namespace

TEST_CASE("F_eta vanishes off the annulus") {
  const CutoffEta eta{3, 5};
  CHECK(F_eta(eta, 0.3) == 0.0);
  CHECK(F_eta(eta, 1.2) == 0.0);
  CHECK(eta.plateau() == doctest::Approx(1.0 / (4 * pi)));
}

TEST_CASE("integral of F_eta matches finite differences of eta r^{2-n}") {
  for (int n : {3, 4, 5}) {
    const CutoffEta eta{n, 5};
    const auto g = [&](double r) { return eta.eval(r).v * std::pow(r, 2.0 - n); };
    const double h = 1e-3;
    const auto laplacian = [&](double r) {
      const double d2 = (-g(r + 2 * h) + 16 * g(r + h) - 30 * g(r) + 16 * g(r - h) - g(r - 2 * h)) / (12 * h * h);
      const double d1 = (-g(r + 2 * h) + 8 * g(r + h) - 8 * g(r - h) + g(r - 2 * h)) / (12 * h);
      return d2 + (n - 1) * d1 / r;
    };
    const double om = 2 * std::pow(pi, n / 2.0) / std::tgamma(n / 2.0);
    double fd = 0.0;
    for (int k = 0; k < 64; ++k)
      fd += integrate_gauss([&](double r) { return laplacian(r) * om * std::pow(r, n - 1); }, 0.5 + k / 128.0, 0.5 + (k + 1) / 128.0, 16);
    const double an = integrate_adaptive([&](double r) { return F_eta(eta, r) * om * std::pow(r, n - 1); }, 0.5, 1.0, 1e-13);
    // Delta is the nonnegative Laplacian, minus the sum of second derivatives
    CHECK(an == doctest::Approx(-fd).epsilon(1e-8));
    // flux of grad(eta r^{2-n}) through r = 1/2
    CHECK(an == doctest::Approx(-1.0).epsilon(1e-10));
  }
}

TEST_CASE("J at zero and at the minimizer") {
  const CutoffEta eta{3, 5};
  const DiscreteOperator op(bumped(), grid(256));
  const MassResult r = solve_mass(op, eta);
  CHECK(J_value(op, eta, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(op.size()))) ==
        doctest::Approx(eta_energy(eta)).epsilon(1e-13));
  CHECK(r.C_n == doctest::Approx(eta_energy(eta)));
  CHECK(J_value(op, eta, r.beta) == doctest::Approx(-r.m).epsilon(1e-8));
  CHECK(r.extraction_gap() <= 1e-8);
  for (std::size_t k = 0; k < 20; ++k) CHECK(J_value(op, eta, random_radial_field(op, 3, k)) >= -r.m - 1e-8);
  CHECK(r.harmonic_defect < 1e-6);
}

TEST_CASE("flattened round sphere has zero mass") {
  const CutoffEta eta{3, 5};
  for (double R : {1.0, 2.0, 3.0}) {
    const MassResult r = solve_mass(DiscreteOperator(flattened_round_sphere(3, R), grid(256)), eta);
    CHECK(std::abs(r.m) < 1e-6);
  }
  const MassResult r4 = solve_mass(DiscreteOperator(flattened_round_sphere(4, 2.0), grid(256)), CutoffEta{4, 5});
  CHECK(std::abs(r4.m) < 1e-6);
}

TEST_CASE("flattened round RP^3 of radius 2 has mass 1/(16 pi)") {
  const MassResult r = solve_mass(DiscreteOperator(fem_reference_profile("rp3-flat"), grid(512)), CutoffEta{3, 5});
  CHECK(r.m == doctest::Approx(1.0 / (16 * pi)).epsilon(1e-6));
}

TEST_CASE("scaling law m(bg) = b^{1 - n/2} m(g)") {
  const CutoffEta eta{3, 5};
  const auto p = bumped();
  const double m = solve_mass(DiscreteOperator(p, grid(512)), eta).m;
  REQUIRE(std::abs(m) > 1e-3);
  for (double b : {1.5, 2.0, 4.0}) {
    const double mb = solve_mass(DiscreteOperator(rescale(p, b), grid(512)), eta).m;
    CHECK(std::abs(mb - m / std::sqrt(b)) <= 1e-6 * (1 + std::abs(m)));
  }
}

TEST_CASE("mass is stable under resolution doubling and cutoff shape") {
  const auto p = bumped();
  const double m = solve_mass(DiscreteOperator(p, grid(256)), CutoffEta{3, 5}).m;
  const double m2 = solve_mass(DiscreteOperator(p, grid(512)), CutoffEta{3, 5}).m;
  CHECK(std::abs(m2 - m) / std::abs(m2) <= 1e-4);
  const double m7 = solve_mass(DiscreteOperator(p, grid(512)), CutoffEta{3, 7}).m;
  CHECK(std::abs(m7 - m2) <= 1e-7);
}

TEST_CASE("quadratic lower bound audit") {
  const CutoffEta eta{3, 5};
  const DiscreteOperator op(flattened_round_sphere(3, 2.0), grid(256));
  const JgeqReport rep = quadratic_lower_bound_audit(op, eta, 1.0, 100, 11);
  CHECK(rep.trials == 101);  // u = 0 plus the random fields
  CHECK(rep.violations == 0);
  CHECK(rep.min_slack >= -1e-8);
  CHECK(rep.C == doctest::Approx(eta_energy(eta)));
  CHECK(rep.Csecond == 1.0);
  // u = beta: -m = J(beta) >= C - C' X + a X^2 >= C - C'^2/(4a)
  const MassResult r = solve_mass(DiscreteOperator(bumped(), grid(256)), eta);
  const JgeqReport rb = quadratic_lower_bound_audit(DiscreteOperator(bumped(), grid(256)), eta, 1.0, 10, 11);
  CHECK(r.m <= rb.mass_bound);
  CHECK(r.m >= test_function_lower_bound(eta));
}

TEST_CASE("mass is undefined without a positive operator") {
  const auto sq = make_family("sphere-squash", 4)(std::vector<double>{2.0, 1.5}).primary;
  try {
    (void)solve_mass(DiscreteOperator(sq, grid(128)), CutoffEta{4, 5});
    FAIL("expected NotPositive");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotPositive);
  }
  CHECK_THROWS_AS(solve_mass(DiscreteOperator(round_profile(3, 1.0), grid(128)), CutoffEta{3, 5}), Error);
}

TEST_CASE("mass result JSON") {
  const MassResult r = solve_mass(DiscreteOperator(bumped(), grid(128)), CutoffEta{3, 5});
  const auto j = to_json(r);
  CHECK(j.at("m").get<double>() == r.m);
  CHECK(j.at("eta").get<std::string>() == r.eta_id);
  CHECK_FALSE(j.contains("beta"));
}
