#include <doctest.h>

#include <cmath>
#include <numbers>

#include "masslab/error.hpp"
#include "masslab/families.hpp"
#include "masslab/profile.hpp"
#include "masslab/profile_io.hpp"

using namespace masslab;
using std::numbers::pi;

TEST_CASE("round profile closed form") {
  const auto p = round_profile(3, 1.0);
  CHECK(p.length() == doctest::Approx(pi).epsilon(1e-15));
  CHECK(p.f(pi / 2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(closure_residual(p) < 1e-12);
  for (double t : {0.3, 1.1, 2.9}) CHECK(p.f(t) == doctest::Approx(std::sin(t)).epsilon(1e-11));
}

TEST_CASE("scalar curvature of round spheres is n(n-1)/R^2") {
  CHECK(scalar_curvature(round_profile(3, 1.0), pi / 2) == doctest::Approx(6.0).epsilon(1e-9));
  const auto r2 = round_profile(3, 2.0);
  for (double t : {0.01, 0.7, 3.0, 6.2}) CHECK(scalar_curvature(r2, t) == doctest::Approx(1.5).epsilon(1e-8));
  const auto r4 = round_profile(4, 1.0);
  for (int i = 1; i < 20; ++i) CHECK(scalar_curvature(r4, pi * i / 20.0) == doctest::Approx(12.0).epsilon(1e-7));
}

TEST_CASE("flat region has zero scalar curvature") {
  const auto p = flattened_round_sphere(3, 2.0);
  REQUIRE(p.flat_radius() >= 1.0);
  CHECK(std::abs(scalar_curvature(p, 0.5)) < 1e-10);
  CHECK(p.f(0.5) == doctest::Approx(0.5).epsilon(1e-13));
}

TEST_CASE("scalar curvature of a Berger-squashed warped 4-metric") {
  // dt^2 + sin^2 t (k^2 s1^2 + s2^2 + s3^2): the fiber has scalar curvature 8 - 2k^2, so
  // s = (8 - 2k^2)/sin^2 t + 6 - 6 cot^2 t.
  const double k = 0.8;
  const auto knots = chebyshev_knots(0.0, pi, 256);
  const auto p = profile_from_jet(
      4, knots, [](double t) { return Jet{std::sin(t), std::cos(t), -std::sin(t)}; }, 0.0, {}, Closure::Pole,
      [k](double) { return Jet{k, 0.0, 0.0}; });
  for (double t : {0.7, 1.3, 2.2}) {
    const double s = std::sin(t), c = std::cos(t);
    CHECK(scalar_curvature(p, t) == doctest::Approx((8 - 2 * k * k) / (s * s) + 6 - 6 * c * c / (s * s)).epsilon(1e-8));
  }
}

TEST_CASE("rescale") {
  const auto r1 = round_profile(3, 1.0);
  CHECK(rescale(r1, 1.0) == r1);
  const auto r4 = rescale(r1, 4.0);
  const auto r2 = round_profile(3, 2.0);
  CHECK(r4.length() == doctest::Approx(r2.length()).epsilon(1e-14));
  for (double t : {0.2, 1.7, 4.4}) CHECK(r4.f(t) == doctest::Approx(r2.f(t)).epsilon(1e-10));
  const auto flat = flattened_round_sphere(3, 2.0);
  CHECK(rescale(flat, 4.0).flat_radius() == doctest::Approx(2.0 * flat.flat_radius()));
  CHECK_THROWS_AS(rescale(r1, 0.5), Error);
}

TEST_CASE("conformal flattening near the pole") {
  const double R = 6.0;
  const auto p = conformal_flatten_near_pole(round_profile(3, R), 1.0, 1.5);
  CHECK(p.flat_radius() >= 1.0);
  for (double t : {0.1, 0.5, 0.99}) CHECK(std::abs(scalar_curvature(p, t)) < 1e-9);
  // beyond the transition the profile is a translate of the round one
  CHECK(scalar_curvature(p, p.length() - 1.0) == doctest::Approx(6.0 / (R * R)).epsilon(1e-6));

  const auto flat = flattened_round_sphere(3, 2.0);
  const auto again = conformal_flatten_near_pole(flat, 1.0, flat.flat_radius());
  CHECK(again.length() == doctest::Approx(flat.length()).epsilon(1e-12));
  for (double t : {0.4, 2.0, 5.0}) CHECK(again.f(t) == doctest::Approx(flat.f(t)).epsilon(1e-10));
}

TEST_CASE("conformal transform by a constant is a rescale") {
  const auto p = conformal_transform(round_profile(3, 1.0), [](double) { return Jet{2.0, 0.0, 0.0}; }, {});
  CHECK(p.length() == doctest::Approx(2 * pi).epsilon(1e-10));
  CHECK(scalar_curvature(p, 2.0) == doctest::Approx(1.5).epsilon(1e-7));
}

TEST_CASE("blend identities") {
  const auto g = round_profile(3, 1.0);
  const auto h = profile_from_jet(3, chebyshev_knots(0.0, 2.0, 64), [](double t) { return Jet{t, 1.0, 0.0}; }, 2.0, {});
  const auto same = blend_profiles(g, g, BlendSpec{0.1});
  for (double t : {0.05, 0.15, 1.0, 3.0}) CHECK(same.f(t) == doctest::Approx(g.f(t)).epsilon(1e-12));
  const auto off = blend_profiles(g, h, BlendSpec{0.1, 0.0});
  for (double t : {0.05, 0.15, 1.0}) CHECK(off.f(t) == doctest::Approx(g.f(t)).epsilon(1e-12));

  // |s_eps - s_g| <= C / eps on the blend annulus
  const double eps = 0.1;
  const auto b = blend_profiles(g, h, BlendSpec{eps});
  double worst = 0.0;
  for (int i = 1; i < 200; ++i) {
    const double t = eps + eps * i / 200.0;
    worst = std::max(worst, std::abs(scalar_curvature(b, t) - 6.0));
  }
  MESSAGE("C = eps max |s_eps - s_g| = " << worst * eps);
  CHECK(worst * eps <= BlendSpec::derivative_constant());
  CHECK(std::abs(scalar_curvature(b, 0.05)) < 1e-8);
}

TEST_CASE("degenerate profile rejected") {
  const auto p = profile_from_jet(
      3, chebyshev_knots(0.0, pi, 64),
      [](double t) { return Jet{std::sin(t) * std::cos(2 * t), std::cos(t) * std::cos(2 * t) - 2 * std::sin(t) * std::sin(2 * t),
                                -5 * std::sin(t) * std::cos(2 * t) - 4 * std::cos(t) * std::sin(2 * t)}; },
      0.0, {});
  try {
    validate_profile(p);
    FAIL("expected DegenerateProfile");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateProfile);
  }
}

TEST_CASE("profile JSON round trip is bitwise") {
  const auto p = make_family("rp-bump", 3)(std::vector<double>{2.2, 0.1, -0.05}).primary;
  const auto q = profile_from_json(nlohmann::json::parse(profile_to_json(p).dump()));
  CHECK(q == p);
}
