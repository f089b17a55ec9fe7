#include "masslab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "masslab/error.hpp"

namespace masslab {

namespace {

// Legendre P_k(x) and P_{k-1}(x) by the three-term recurrence.
std::pair<double, double> legendre_pair(std::size_t k, double x) {
  double p_prev = 1.0;
  double p = x;
  if (k == 0) return {1.0, 0.0};
  for (std::size_t j = 2; j <= k; ++j) {
    const double p_next = ((2.0 * j - 1.0) * x * p - (j - 1.0) * p_prev) / j;
    p_prev = p;
    p = p_next;
  }
  return {p, p_prev};
}

}  // namespace

QuadratureRule gauss_legendre(std::size_t count) {
  require(count >= 1, ErrorKind::InvalidArgument, "gauss_legendre needs at least one point");
  QuadratureRule rule;
  rule.nodes.resize(count);
  rule.weights.resize(count);
  const double n = static_cast<double>(count);
  for (std::size_t i = 0; i < count; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      auto [p, pm] = legendre_pair(count, x);
      const double dp = n * (x * p - pm) / (x * x - 1.0);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    auto [p, pm] = legendre_pair(count, x);
    const double dp = n * (x * p - pm) / (x * x - 1.0);
    rule.nodes[count - 1 - i] = x;
    rule.weights[count - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

QuadratureRule gauss_lobatto(std::size_t count) {
  require(count >= 2, ErrorKind::InvalidArgument, "gauss_lobatto needs at least two points");
  const std::size_t degree = count - 1;
  const double N = static_cast<double>(degree);
  QuadratureRule rule;
  rule.nodes.resize(count);
  rule.weights.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    // Chebyshev-Gauss-Lobatto initial guess, Newton on (1-x^2) P_N'(x).
    double x = -std::cos(std::numbers::pi * static_cast<double>(i) / N);
    if (i != 0 && i != degree) {
      for (int it = 0; it < 100; ++it) {
        auto [p, pm] = legendre_pair(degree, x);
        const double dx = (x * p - pm) / (count * p);
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
    }
    auto [p, pm] = legendre_pair(degree, x);
    (void)pm;
    rule.nodes[i] = x;
    rule.weights[i] = 2.0 / (N * (N + 1.0) * p * p);
  }
  return rule;
}

std::vector<double> barycentric_weights(std::span<const double> nodes) {
  const std::size_t n = nodes.size();
  std::vector<double> w(n, 1.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) {
      if (k != j) w[j] /= (nodes[j] - nodes[k]);
    }
  }
  // Rescale to avoid overflow for high degree; interpolation is scale invariant.
  const double scale = *std::max_element(w.begin(), w.end(),
                                         [](double a, double b) { return std::abs(a) < std::abs(b); });
  for (auto& v : w) v /= std::abs(scale);
  return w;
}

std::vector<double> differentiation_matrix(std::span<const double> nodes) {
  const std::size_t n = nodes.size();
  const auto bary = barycentric_weights(nodes);
  std::vector<double> D(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double diag = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double v = (bary[j] / bary[i]) / (nodes[i] - nodes[j]);
      D[i * n + j] = v;
      diag -= v;  // negative sum trick keeps D * 1 = 0 to rounding
    }
    D[i * n + i] = diag;
  }
  return D;
}

double barycentric_eval(std::span<const double> nodes, std::span<const double> bary,
                        std::span<const double> values, double x) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    const double d = x - nodes[j];
    if (d == 0.0) return values[j];
    const double c = bary[j] / d;
    num += c * values[j];
    den += c;
  }
  return num / den;
}

double integrate_gauss(const std::function<double(double)>& f, double a, double b,
                       std::size_t points) {
  // Keyed cache: integrands may themselves call integrate_gauss with another rule size.
  static thread_local std::map<std::size_t, QuadratureRule> rules;
  auto it = rules.find(points);
  if (it == rules.end()) it = rules.emplace(points, gauss_legendre(points)).first;
  const QuadratureRule& cached = it->second;
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double sum = 0.0;
  for (std::size_t i = 0; i < points; ++i) sum += cached.weights[i] * f(mid + half * cached.nodes[i]);
  return sum * half;
}

double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double rel_tol, double abs_tol) {
  if (a == b) return 0.0;
  double error = 0.0;
  double l1 = 0.0;
  // Boost's error estimate degrades on short intervals far from 0; work on [-1, 1].
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  const auto g = [&](double x) { return f(mid + half * x) * half; };
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  // Boost only knows relative tolerances; translate abs_tol through a one-panel L1 estimate.
  double tol = rel_tol;
  if (abs_tol > 0.0) {
    GK::integrate(g, -1.0, 1.0, 0, rel_tol, &error, &l1);
    if (l1 > 0.0) tol = std::max(rel_tol, abs_tol / l1);
  }
  const double value = GK::integrate(g, -1.0, 1.0, 18, tol, &error, &l1);
  error = std::abs(error);
  l1 = std::abs(l1);
  // Boost reports the error estimate even when max_depth is exhausted; accept anything
  // within a loose envelope of the request and reject the rest.
  const double allowed = std::max(1e4 * rel_tol * l1, abs_tol) + 1e-300;
  if (!std::isfinite(value) || error > allowed) {
    fail(ErrorKind::NonConvergence, "adaptive quadrature error estimate " + std::to_string(error) +
                                        " on [" + std::to_string(a) + ", " + std::to_string(b) + "]");
  }
  return value;
}

double integrate_tanh_sinh(const std::function<double(double)>& f, double a, double b, double rel_tol) {
  if (a == b) return 0.0;
  boost::math::quadrature::tanh_sinh<double> rule;
  double error = 0.0;
  double l1 = 0.0;
  const double value = rule.integrate(f, a, b, rel_tol, &error, &l1);
  if (!std::isfinite(value) || error > std::max(1e3 * rel_tol * l1, 1e-300)) {
    fail(ErrorKind::NonConvergence, "tanh-sinh error estimate " + std::to_string(error));
  }
  return value;
}

double integrate_piecewise(const std::function<double(double)>& f, std::span<const double> breaks,
                           double rel_tol) {
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    sum += integrate_adaptive(f, breaks[i], breaks[i + 1], rel_tol);
  }
  return sum;
}

Jet smoothstep(double x) {
  if (x <= 0.0) return {0.0, 0.0, 0.0};
  if (x >= 1.0) return {1.0, 0.0, 0.0};
  const double x2 = x * x;
  const double x3 = x2 * x;
  return {x3 * (10.0 + x * (-15.0 + 6.0 * x)), 30.0 * x2 * (1.0 - x) * (1.0 - x),
          60.0 * x * (1.0 - x) * (1.0 - 2.0 * x)};
}

Jet smoothstep7(double x) {
  if (x <= 0.0) return {0.0, 0.0, 0.0};
  if (x >= 1.0) return {1.0, 0.0, 0.0};
  const double x2 = x * x;
  const double x3 = x2 * x;
  const double x4 = x3 * x;
  const double v = x4 * (35.0 + x * (-84.0 + x * (70.0 - 20.0 * x)));
  const double d1 = 140.0 * x3 * std::pow(1.0 - x, 3);
  const double d2 = 420.0 * x2 * std::pow(1.0 - x, 2) * (1.0 - 2.0 * x);
  return {v, d1, d2};
}

}  // namespace masslab
