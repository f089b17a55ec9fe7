#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "masslab/quadrature.hpp"

namespace masslab {

/// Volume of the round unit sphere S^k.
double sphere_volume(int k);

/// omega_{n-1}: volume of the unit (n-1)-sphere bounding the n-ball.
inline double omega(int n) { return sphere_volume(n - 1); }

/// Coefficient (n-2)/(4(n-1)) of the scalar curvature term in L_g.
inline double conformal_coupling(int n) { return (n - 2.0) / (4.0 * (n - 1.0)); }

/// Critical Sobolev exponent 2n/(n-2).
inline double critical_exponent(int n) { return 2.0 * n / (n - 2.0); }

/// How the far end t = T closes up.
///  Pole:     f(T) = 0, f'(T) = -1; the manifold is S^n.
///  CrossCap: f(T) > 0, f'(T) = 0, antipodal identification of the sphere t = T; RP^n.
enum class Closure { Pole, CrossCap };

/// Rotationally symmetric metric dt^2 + f(t)^2 g_{S^{n-1}} on [0, T].
///
/// f is stored as a C2 piecewise quintic (Hermite data f, f', f'' at every knot), one row of
/// six local monomial coefficients per segment in the variable t - knot[k]. `breaks` lists the
/// points where f is only C2 (smoothstep joins, bump supports); solvers put element boundaries
/// there.
///
/// For n = 4 an optional squash factor k(t) (same knots and layout) turns the metric into the
/// U(2)-invariant dt^2 + f^2 (k^2 s1^2 + s2^2 + s3^2), with s_i the left-invariant coframe of the
/// unit S^3. k must equal 1 near both ends; an empty table means k = 1.
class WarpedProfile {
 public:
  WarpedProfile(int n, std::vector<double> knots, std::vector<double> coefficients, double flat_radius,
                std::vector<double> breaks, Closure closure = Closure::Pole,
                std::vector<double> squash = {});

  int dimension() const { return n_; }
  double length() const { return knots_.back(); }
  double flat_radius() const { return flat_radius_; }
  Closure closure() const { return closure_; }
  bool squashed() const { return !squash_.empty(); }
  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& coefficients() const { return coeffs_; }
  const std::vector<double>& squash_coefficients() const { return squash_; }
  const std::vector<double>& breaks() const { return breaks_; }
  std::size_t segment_count() const { return knots_.size() - 1; }

  Jet eval(double t) const;
  double f(double t) const { return eval(t).v; }
  double third_derivative(double t) const;
  Jet squash(double t) const;
  /// f^{n-1} k: the volume density relative to omega_{n-1} dt.
  double density(double t) const;

 private:
  std::size_t segment_of(double t) const;

  int n_;
  std::vector<double> knots_;
  std::vector<double> coeffs_;
  double flat_radius_;
  std::vector<double> breaks_;
  Closure closure_;
  std::vector<double> squash_;
};

bool operator==(const WarpedProfile& a, const WarpedProfile& b);

/// Chebyshev-Gauss-Lobatto clustered points on [a, b] (segments + 1 values).
std::vector<double> chebyshev_knots(double a, double b, std::size_t segments);

/// Quintic Hermite interpolation of an analytic jet t -> (f, f', f'') on the given knots.
/// `squash_jet` may be empty.
WarpedProfile profile_from_jet(int n, std::span<const double> knots,
                               const std::function<Jet(double)>& jet, double flat_radius,
                               std::vector<double> breaks, Closure closure = Closure::Pole,
                               const std::function<Jet(double)>& squash_jet = {});

/// Round sphere of radius R: f(t) = R sin(t/R) on [0, pi R].
WarpedProfile round_profile(int n, double radius, std::size_t segments = 1024);

/// Round RP^n of radius R: f(t) = R sin(t/R) on [0, pi R / 2] with a cross-cap at the end.
WarpedProfile round_projective_profile(int n, double radius, std::size_t segments = 1024);

/// Scalar curvature of the warped metric; pole values are the Taylor limits.
double scalar_curvature(const WarpedProfile& p, double t);

/// Closure residual: max(|f(0)|, |f'(0)-1|) plus |f(T)|, |f'(T)+1| for a pole or |f'(T)| for a
/// cross-cap, and |k-1|, |k'| at both ends when squashed.
double closure_residual(const WarpedProfile& p);

/// Throws DegenerateProfile unless f > 0 on all interior knots and the ends close smoothly.
void validate_profile(const WarpedProfile& p, double tol = 1e-10);

/// f_b(t) = sqrt(b) f(t / sqrt(b)); rejects b < 1.
WarpedProfile rescale(const WarpedProfile& p, double b);

/// Conformal change g -> lambda^2 g for a radial factor lambda(t) > 0 (value, d/dt, d2/dt2),
/// re-expressed in the new arclength. `extra_breaks` are input-coordinate points where lambda is
/// only C2.
WarpedProfile conformal_transform(const WarpedProfile& p, const std::function<Jet(double)>& lambda,
                                  std::span<const double> extra_breaks);

/// Conformal-flatness coordinate of the pole: rho(t) = t exp(int_0^t (1/f - 1/s) ds), in which
/// g = (f/rho)^2 (d rho^2 + rho^2 g_{S^{n-1}}). Requires k = 1 on [0, t].
double flat_coordinate(const WarpedProfile& p, double t);

/// Produces a metric conformal to `p` that is exactly Euclidean on [0, r0] (pre-rescale
/// coordinates) and equal to `p` beyond r1, rescaled when needed so that the flat ball has
/// radius >= 1.
WarpedProfile conformal_flatten_near_pole(const WarpedProfile& p, double r0, double r1);

/// Cutoff chi_eps: 1 on [0, eps], quintic smoothstep to 0 on [eps, 2 eps].
struct BlendSpec {
  double epsilon = 0.1;
  /// 1 for the standard cutoff, 0 gives chi == 0.
  double amplitude = 1.0;

  Jet chi(double t) const;
  /// C with |chi'| <= C/eps and |chi''| <= C/eps^2.
  static double derivative_constant();
};

/// g_eps = chi h + (1 - chi) g acting on the metric coefficients (dt^2 and f^2).
WarpedProfile blend_profiles(const WarpedProfile& g, const WarpedProfile& h, const BlendSpec& spec);

/// Metric combination t g + (1 - t) h of two profiles on the same interval.
WarpedProfile interpolate_metrics(const WarpedProfile& g, const WarpedProfile& h, double t);

}  // namespace masslab
