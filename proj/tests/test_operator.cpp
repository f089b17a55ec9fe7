#include <doctest.h>

#include <cmath>
#include <numbers>

#include "masslab/error.hpp"
#include "masslab/families.hpp"
#include "masslab/sem_operator.hpp"

using namespace masslab;
using std::numbers::pi;

namespace {
GridOptions grid(std::size_t m) {
  GridOptions g;
  g.resolution = m;
  return g;
}
}  // namespace

TEST_CASE("weights integrate the volume and the stiffness is symmetric") {
  const DiscreteOperator op(round_profile(3, 1.0), grid(256));
  CHECK(op.integrate(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(op.size()))) ==
        doctest::Approx(2 * pi * pi).epsilon(1e-10));
  const Eigen::MatrixXd& K = op.stiffness();
  CHECK((K - K.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * K.cwiseAbs().maxCoeff());
  // constants: only the potential contributes, c_3 s = 3/4
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(op.size()));
  CHECK(op.form(one, one) == doctest::Approx(0.75 * 2 * pi * pi).epsilon(1e-10));
}

TEST_CASE("solve reproduces the constant solution") {
  const DiscreteOperator op(round_profile(3, 1.0), grid(256));
  const Eigen::VectorXd rhs = op.potential();
  const Eigen::VectorXd u = op.solve(rhs);
  CHECK((u.array() - 1.0).abs().maxCoeff() < 1e-10);
  CHECK(op.solve(Eigen::VectorXd::Zero(rhs.size())).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lowest eigenvalue of round spheres") {
  CHECK(DiscreteOperator(round_profile(3, 1.0), grid(256)).smallest_eigenvalues(1)[0] ==
        doctest::Approx(0.75).epsilon(1e-6 / 0.75));
  CHECK(DiscreteOperator(round_profile(3, 2.0), grid(256)).smallest_eigenvalues(1)[0] ==
        doctest::Approx(0.1875).epsilon(1e-6 / 0.1875));
  // zonal harmonics: Laplacian eigenvalues k(k+2), shifted by 3/4
  const auto ev = DiscreteOperator(round_profile(3, 1.0), grid(256)).smallest_eigenvalues(3);
  CHECK(ev[1] == doctest::Approx(3.75).epsilon(1e-8));
  CHECK(ev[2] == doctest::Approx(8.75).epsilon(1e-8));
}

TEST_CASE("strongly squashed metric has a negative eigenvalue") {
  const auto f = make_family("sphere-squash", 4);
  const DiscreteOperator op(f(std::vector<double>{2.0, 1.5}).primary, grid(256));
  CHECK(op.smallest_eigenvalues(1)[0] < 0.0);
  CHECK_FALSE(op.positive());
  try {
    (void)op.solve(op.potential());
    FAIL("expected NotPositive");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotPositive);
  }
}

TEST_CASE("apply inverts solve at interior nodes") {
  const DiscreteOperator op(flattened_round_sphere(3, 2.0), grid(256));
  const Eigen::VectorXd rhs = op.sample([](double t) { return std::cos(t); });
  const Eigen::VectorXd u = op.solve(rhs);
  CHECK(op.residual(u, rhs) < 1e-10);
}

TEST_CASE("interpolation and derivative of a smooth field") {
  const DiscreteOperator op(round_profile(3, 1.0), grid(256));
  const Eigen::VectorXd u = op.sample([](double t) { return std::cos(t); });
  for (double t : {0.123, 1.0, 2.5}) {
    CHECK(op.interpolate(u, t) == doctest::Approx(std::cos(t)).epsilon(1e-12));
    CHECK(op.derivative(u, t) == doctest::Approx(-std::sin(t)).epsilon(1e-10));
  }
}
