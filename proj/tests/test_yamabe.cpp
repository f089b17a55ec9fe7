#include <doctest.h>

#include <cmath>
#include <numbers>

#include "masslab/families.hpp"
#include "masslab/yamabe.hpp"

using namespace masslab;
using std::numbers::pi;

namespace {
GridOptions grid(std::size_t m) {
  GridOptions g;
  g.resolution = m;
  return g;
}
const double sigma3 = 0.75 * 6.0 * std::pow(2 * pi * pi, 2.0 / 3.0) / 6.0;
}  // namespace

TEST_CASE("quotient of the constant on the round sphere") {
  const DiscreteOperator op(round_profile(3, 1.0), grid(256));
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(op.size()));
  CHECK(yamabe_quotient(op, one) == doctest::Approx(0.75 * std::pow(2 * pi * pi, 2.0 / 3.0)).epsilon(1e-10));
  CHECK(yamabe_quotient(op, 3.0 * one) == doctest::Approx(yamabe_quotient(op, one)).epsilon(1e-12));
}

TEST_CASE("sigma of spheres") {
  CHECK(sigma_sphere(3) == doctest::Approx(3 * std::pow(pi * pi / 4, 2.0 / 3.0)).epsilon(1e-10));
  CHECK(sigma_sphere(3) == doctest::Approx(sigma3).epsilon(1e-10));
  for (int n : {4, 5, 6}) CHECK(std::abs(sigma_sphere(n) - sigma_sphere_closed_form(n)) <= 1e-8);
}

TEST_CASE("round sphere attains sigma") {
  const YamabeResult y = minimize_yamabe(DiscreteOperator(round_profile(3, 1.0), grid(256)));
  CHECK(y.converged);
  CHECK(std::abs(y.Y_estimate - sigma_sphere(3)) <= 0.01 * sigma_sphere(3));
  CHECK(y.lambda1 == doctest::Approx(0.75).epsilon(1e-6));
  for (std::size_t i = 1; i < y.history.size(); ++i) CHECK(y.history[i] <= y.history[i - 1] + 1e-12);
}

TEST_CASE("conformal invariance") {
  const auto lambda = [](double t) {
    const double c = 0.3, s = std::sin(t);
    const double e = std::exp(c * s * s);
    return Jet{e, e * c * 2 * s * std::cos(t), e * (c * 2 * std::cos(2 * t) + std::pow(c * std::sin(2 * t), 2))};
  };
  const auto p = conformal_transform(round_profile(3, 1.0), lambda, {});
  const YamabeResult y = minimize_yamabe(DiscreteOperator(p, grid(256)));
  CHECK(std::abs(y.Y_estimate - sigma_sphere(3)) <= 0.01 * sigma_sphere(3));
  const YamabeResult yf = minimize_yamabe(DiscreteOperator(flattened_round_sphere(4, 2.0), grid(256)));
  CHECK(std::abs(yf.Y_estimate - sigma_sphere(4)) <= 0.01 * sigma_sphere(4));
}

TEST_CASE("negative Yamabe constant follows lambda_1") {
  const auto f = make_family("sphere-squash", 4);
  const YamabeResult y = minimize_yamabe(DiscreteOperator(f(std::vector<double>{2.0, 1.5}).primary, grid(256)));
  CHECK(y.lambda1 < 0.0);
  CHECK(y.Y_estimate < 0.0);
}

TEST_CASE("blend experiment") {
  const auto g = round_profile(3, 1.0);
  const BlendTable same = blend_convergence_experiment(g, g, {0.4, 0.2}, grid(256));
  for (const auto& r : same.rows) CHECK(r.deviation <= 1e-10);

  const BlendPair trivial = blend_pair("round-flat");
  const BlendTable t = blend_convergence_experiment(trivial.g, trivial.h, {0.4, 0.2, 0.1, 0.05}, grid(256));
  CHECK(t.max_deviation <= 1e-7);

  const BlendPair sq = blend_pair("squash");
  const BlendTable s = blend_convergence_experiment(sq.g, sq.h, {0.4, 0.2, 0.1, 0.05}, grid(256));
  CHECK(s.tail_decreasing);
  CHECK(s.fitted_rate >= 1.0);
  for (std::size_t i = 1; i < s.rows.size(); ++i) CHECK(s.rows[i].deviation < s.rows[i - 1].deviation);
}
