#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace masslab {

struct QuadratureRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

/// Gauss-Legendre rule with `count` points on [-1, 1].
QuadratureRule gauss_legendre(std::size_t count);

/// Legendre-Gauss-Lobatto rule with `count` >= 2 points (endpoints included).
QuadratureRule gauss_lobatto(std::size_t count);

/// Barycentric weights for Lagrange interpolation through `nodes`.
std::vector<double> barycentric_weights(std::span<const double> nodes);

/// Spectral differentiation matrix (row-major, count x count) for `nodes`.
std::vector<double> differentiation_matrix(std::span<const double> nodes);

/// Evaluates the interpolant through (nodes, values) at x.
double barycentric_eval(std::span<const double> nodes, std::span<const double> bary,
                        std::span<const double> values, double x);

/// Integral of f over [a, b] with a fixed Gauss-Legendre rule.
double integrate_gauss(const std::function<double(double)>& f, double a, double b,
                       std::size_t points = 64);

/// Adaptive Gauss-Kronrod (61-point) integral over [a, b]; throws NonConvergence
/// when the error estimate stays above `rel_tol * |I| + abs_tol`.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double rel_tol = 1e-13, double abs_tol = 0.0);

/// Tanh-sinh integral over [a, b]; tolerates algebraic endpoint singularities and kinks placed
/// at the endpoints.
double integrate_tanh_sinh(const std::function<double(double)>& f, double a, double b,
                           double rel_tol = 1e-13);

/// Adaptive integral over consecutive break points (sorted); integrand need only be
/// smooth between breaks.
double integrate_piecewise(const std::function<double(double)>& f, std::span<const double> breaks,
                           double rel_tol = 1e-13);

/// Quintic smoothstep 6x^5 - 15x^4 + 10x^3 on [0,1], clamped outside; returns value and
/// first two derivatives.
struct Jet {
  double v = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};
Jet smoothstep(double x);

/// Higher-order smoothstep (degree 7, C3 joins); used to test shape independence of m.
Jet smoothstep7(double x);

}  // namespace masslab
