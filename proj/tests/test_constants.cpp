#include <doctest.h>

#include <cmath>
#include <numbers>

#include "masslab/constants.hpp"
#include "masslab/error.hpp"
#include "masslab/mass.hpp"
#include "masslab/quadrature.hpp"
#include "masslab/yamabe.hpp"

using namespace masslab;
using std::numbers::pi;

namespace {
double om(int n) { return 2 * std::pow(pi, n / 2.0) / std::tgamma(n / 2.0); }

// composite Gauss-Legendre, independent of the library's adaptive rules
double composite(const std::function<double(double)>& f, double a, double b, int panels) {
  double s = 0.0;
  for (int k = 0; k < panels; ++k) s += integrate_gauss(f, a + (b - a) * k / panels, a + (b - a) * (k + 1) / panels, 32);
  return s;
}
}  // namespace

TEST_CASE("base constants") {
  for (int n : {3, 4, 5}) {
    const CutoffEta eta{n, 5};
    const BaseConstants b = compute_base_constants(eta);
    CHECK(b.C_n >= 0.0);
    const double N = 2.0 * n / (n - 2);
    const double q = N / (N - 1);
    const auto integrand = [&](double r) { return std::pow(std::abs(F_eta(eta, r)), q) * om(n) * std::pow(r, n - 1); };
    // |F|^q is only Hoelder at the sign changes of F: split there
    std::vector<double> cuts{0.5};
    for (int i = 0; i < 1000; ++i) {
      double lo = 0.5 + 0.5 * i / 1000, hi = lo + 0.0005;
      if (F_eta(eta, lo + 1e-12) * F_eta(eta, hi - 1e-12) >= 0) continue;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (F_eta(eta, lo + 1e-12) * F_eta(eta, mid) <= 0 ? hi : lo) = mid;
      }
      cuts.push_back(0.5 * (lo + hi));
    }
    cuts.push_back(1.0);
    const auto total = [&](int panels) {
      double s = 0.0;
      for (std::size_t i = 0; i + 1 < cuts.size(); ++i) s += composite(integrand, cuts[i], cuts[i + 1], panels);
      return s;
    };
    const double D1 = 2 * std::pow(total(256), 1 / q);
    const double D2 = 2 * std::pow(total(512), 1 / q);
    CHECK(std::abs(D1 - D2) <= 1e-9);
    CHECK(b.D_n == doctest::Approx(D2).epsilon(1e-9));
    const double vol_ball = om(n) / n;
    CHECK(b.B_n / b.D_n == doctest::Approx(std::pow(6.0, n / N) * std::pow(vol_ball, -1 / N)).epsilon(1e-13));
  }
  const BaseConstants b3 = compute_base_constants(CutoffEta{3, 5});
  CHECK(b3.B_n / b3.D_n == doctest::Approx(std::sqrt(6.0) * std::pow(4 * pi / 3, -1.0 / 6)).epsilon(1e-13));
}

TEST_CASE("cutoff energy alpha_0") {
  for (int n : {3, 4}) {
    const double I = composite([&](double x) { return std::pow(smoothstep(x).d1, n) * std::pow(1 + x, n - 1); }, 0.0, 1.0, 32);
    CHECK(alpha0_cutoff(n) == doctest::Approx(std::pow(om(n) * I, 2.0 / n)).epsilon(1e-10));
  }
}

TEST_CASE("chain examples") {
  const DimensionalConstants c = compute_chain(3, 1.0);
  CHECK(c.F_n == doctest::Approx(pi * pi / 4).epsilon(1e-12));
  CHECK(std::abs(F_n_quadrature(3) - F_n_closed_form(3)) <= 1e-10);
  CHECK(c.zeta == doctest::Approx(std::sqrt(4 * pi) / 2).epsilon(1e-15));
  CHECK(c.sigma == doctest::Approx(sigma_sphere(3)));
  for (int n : {3, 4, 5})
    for (double a : {0.5, 1.0, 2.0, 0.9 * sigma_sphere(n)}) {
      const DimensionalConstants k = compute_chain(n, a);
      CHECK(k.alpha_n < k.sigma);
      CHECK(k.G_n > 0.0);
      for (const auto& ch : verify_chain(k)) {
        INFO(ch.name << " n=" << n << " a=" << a);
        CHECK(ch.holds());
      }
      // Step 1 constraint re-checked by hand
      const double E = step1_constant(n, k.delta, a);
      CHECK(E * E * k.alpha0 <= (n - 2) * om(n) / 4);
      CHECK(k.d_n == doctest::Approx(std::max(2 * k.B_n * k.sigma / k.G_n, k.D_n * k.D_n / (2 * k.G_n))));
    }
}

TEST_CASE("bubble radius stays below 1/6") {
  for (int n : {3, 4}) {
    const DimensionalConstants k = compute_chain(n, 1.0);
    for (double e = -6; e <= 6; e += 0.25) {
      const double A = std::pow(10.0, e);
      CHECK(k.rho(A) < 1.0 / 6);
      CHECK(std::pow(k.rho(A), n - 2) == doctest::Approx(k.delta * A / std::pow(k.B_n + A, 2)).epsilon(1e-12));
    }
    // rho ~ A^{1/(n-2)} as A -> 0
    CHECK(k.rho(1e-10) / k.rho(1e-11) == doctest::Approx(std::pow(10.0, 1.0 / (n - 2))).epsilon(1e-6));
  }
}

TEST_CASE("doubling a does not decrease delta") {
  for (double a : {0.25, 0.5, 1.0, 2.0}) CHECK(compute_chain(3, 2 * a).delta >= compute_chain(3, a).delta);
}

TEST_CASE("mass upper bounds") {
  const double s = sigma_sphere(3);
  const auto b2 = mass_upper_bounds(3, s / 2), b4 = mass_upper_bounds(3, s / 4);
  CHECK(b4.simple == doctest::Approx(2 * b2.simple).epsilon(1e-14));
  CHECK(mass_upper_bounds(3, s * (1 - 1e-9)).refined < 1e-2 * b2.refined);
  CHECK_THROWS_AS(mass_upper_bounds(3, s), Error);
  CHECK_THROWS_AS(mass_upper_bounds(3, 0.0), Error);
}

TEST_CASE("sigma gap criterion") {
  try {
    (void)sigma_gap_criterion(3, {}, sigma_sphere(3));
    FAIL("expected InsufficientSamples");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientSamples);
  }
  const double s = sigma_sphere(3);
  std::vector<std::pair<double, double>> sphere, big;
  for (double eps : {0.4, 0.2, 0.1, 0.05}) {
    sphere.push_back({s - eps, 1e-10});
    // mass / gap^{1/3} must beat d_3 / sigma ~ 77
    big.push_back({s - eps * 2.5e-6, 1.0});
  }
  CHECK_FALSE(sigma_gap_criterion(3, sphere, s).hypothesis_met);
  CHECK(sigma_gap_criterion(3, big, s).hypothesis_met);
}
