#include "masslab/profile.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "masslab/error.hpp"

namespace masslab {

namespace {

constexpr std::size_t kCoeffs = 6;
const Jet kOne{1.0, 0.0, 0.0};

// Local quintic matching (y, y', y'') at both ends of a segment of width h.
std::array<double, kCoeffs> hermite_quintic(const Jet& a, const Jet& b, double h) {
  const double c0 = a.v;
  const double c1 = a.d1;
  const double c2 = 0.5 * a.d2;
  const double delta = b.v - (c0 + h * (c1 + h * c2));
  const double delta1 = b.d1 - (c1 + 2.0 * c2 * h);
  const double delta2 = b.d2 - 2.0 * c2;
  const double C = 0.5 * (delta2 * h * h - 6.0 * delta1 * h + 12.0 * delta);
  const double B = delta1 * h - 3.0 * delta - 2.0 * C;
  const double A = delta - B - C;
  const double h3 = h * h * h;
  return {c0, c1, c2, A / h3, B / (h3 * h), C / (h3 * h * h)};
}

std::vector<double> hermite_table(std::span<const double> t, std::span<const Jet> jets) {
  std::vector<double> coeffs;
  coeffs.reserve(kCoeffs * (t.size() - 1));
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    const auto c = hermite_quintic(jets[i], jets[i + 1], t[i + 1] - t[i]);
    coeffs.insert(coeffs.end(), c.begin(), c.end());
  }
  return coeffs;
}

Jet eval_table(const std::vector<double>& coeffs, std::size_t k, double x) {
  const double* c = &coeffs[kCoeffs * k];
  const double v = c[0] + x * (c[1] + x * (c[2] + x * (c[3] + x * (c[4] + x * c[5]))));
  const double d1 = c[1] + x * (2.0 * c[2] + x * (3.0 * c[3] + x * (4.0 * c[4] + x * 5.0 * c[5])));
  const double d2 = 2.0 * c[2] + x * (6.0 * c[3] + x * (12.0 * c[4] + x * 20.0 * c[5]));
  return {v, d1, d2};
}

std::vector<double> sorted_unique(std::vector<double> v, double tol) {
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  for (double x : v) {
    if (out.empty() || x - out.back() > tol) out.push_back(x);
  }
  return out;
}

// Adds `extra` points into `knots` (both sorted), dropping near-duplicates.
std::vector<double> merge_points(std::vector<double> knots, std::span<const double> extra) {
  const double tol = 1e-12 * std::max(1.0, knots.empty() ? 1.0 : knots.back());
  knots.insert(knots.end(), extra.begin(), extra.end());
  return sorted_unique(std::move(knots), tol);
}

std::vector<double> interior_breaks(std::vector<double> breaks, double T) {
  std::vector<double> kept;
  for (double b : breaks) {
    if (b > 0.0 && b < T) kept.push_back(b);
  }
  return sorted_unique(std::move(kept), 1e-12 * T);
}

// Assembles a profile from Hermite data; kjets empty means no squash.
WarpedProfile from_hermite(int n, std::vector<double> t, const std::vector<Jet>& fjets,
                           const std::vector<Jet>& kjets, double flat, std::vector<double> breaks,
                           Closure closure) {
  auto coeffs = hermite_table(t, fjets);
  std::vector<double> squash;
  if (!kjets.empty()) squash = hermite_table(t, kjets);
  const double T = t.back();
  return WarpedProfile(n, std::move(t), std::move(coeffs), flat, interior_breaks(std::move(breaks), T),
                       closure, std::move(squash));
}

// sqrt of a combination F of squared coefficients, with derivatives.
Jet sqrt_jet(double F, double dF, double d2F) {
  const double f = std::sqrt(F);
  const double df = dF / (2.0 * f);
  return {f, df, (d2F - 2.0 * df * df) / (2.0 * f)};
}

Jet square_jet(const Jet& a) { return {a.v * a.v, 2.0 * a.v * a.d1, 2.0 * (a.d1 * a.d1 + a.v * a.d2)}; }

Jet product_jet(const Jet& a, const Jet& b) {
  return {a.v * b.v, a.d1 * b.v + a.v * b.d1, a.d2 * b.v + 2.0 * a.d1 * b.d1 + a.v * b.d2};
}

Jet quotient_jet(const Jet& a, const Jet& f) {
  const double q = a.v / f.v;
  const double dq = (a.d1 - q * f.d1) / f.v;
  return {q, dq, (a.d2 - 2.0 * dq * f.d1 - q * f.d2) / f.v};
}

bool squash_is_trivial_on(const WarpedProfile& p, double a, double b) {
  if (!p.squashed()) return true;
  for (double t : p.knots()) {
    if (t < a || t > b) continue;
    const Jet k = p.squash(t);
    if (std::abs(k.v - 1.0) > 1e-14 || std::abs(k.d1) > 1e-14 || std::abs(k.d2) > 1e-12) return false;
  }
  return true;
}

}  // namespace

double sphere_volume(int k) {
  const double m = k + 1.0;
  return 2.0 * std::pow(std::numbers::pi, 0.5 * m) / std::tgamma(0.5 * m);
}

WarpedProfile::WarpedProfile(int n, std::vector<double> knots, std::vector<double> coefficients,
                             double flat_radius, std::vector<double> breaks, Closure closure,
                             std::vector<double> squash)
    : n_(n), knots_(std::move(knots)), coeffs_(std::move(coefficients)), flat_radius_(flat_radius),
      breaks_(std::move(breaks)), closure_(closure), squash_(std::move(squash)) {
  require(n_ >= 3, ErrorKind::InvalidArgument, "dimension must be >= 3");
  require(knots_.size() >= 2, ErrorKind::InvalidArgument, "profile needs at least one segment");
  require(knots_.front() == 0.0, ErrorKind::InvalidArgument, "profile must start at t = 0");
  require(coeffs_.size() == kCoeffs * (knots_.size() - 1), ErrorKind::InvalidArgument,
          "coefficient table size mismatch");
  require(squash_.empty() || squash_.size() == coeffs_.size(), ErrorKind::InvalidArgument,
          "squash table size mismatch");
  require(squash_.empty() || n_ == 4, ErrorKind::InvalidArgument, "squashed profiles need n = 4");
  for (std::size_t i = 0; i + 1 < knots_.size(); ++i) {
    require(knots_[i + 1] > knots_[i], ErrorKind::InvalidArgument, "knots must increase strictly");
  }
  require(flat_radius_ >= 0.0, ErrorKind::InvalidArgument, "flat radius must be >= 0");
}

std::size_t WarpedProfile::segment_of(double t) const {
  auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
  std::size_t k = (it == knots_.begin()) ? 0 : static_cast<std::size_t>(it - knots_.begin()) - 1;
  return std::min(k, knots_.size() - 2);
}

Jet WarpedProfile::eval(double t) const {
  const std::size_t k = segment_of(t);
  return eval_table(coeffs_, k, t - knots_[k]);
}

Jet WarpedProfile::squash(double t) const {
  if (squash_.empty()) return kOne;
  const std::size_t k = segment_of(t);
  return eval_table(squash_, k, t - knots_[k]);
}

double WarpedProfile::density(double t) const {
  const double f = eval(t).v;
  const double d = std::pow(f, n_ - 1);
  return squash_.empty() ? d : d * squash(t).v;
}

double WarpedProfile::third_derivative(double t) const {
  const std::size_t k = segment_of(t);
  const double x = t - knots_[k];
  const double* c = &coeffs_[kCoeffs * k];
  return 6.0 * c[3] + x * (24.0 * c[4] + x * 60.0 * c[5]);
}

bool operator==(const WarpedProfile& a, const WarpedProfile& b) {
  return a.dimension() == b.dimension() && a.flat_radius() == b.flat_radius() &&
         a.closure() == b.closure() && a.knots() == b.knots() && a.coefficients() == b.coefficients() &&
         a.squash_coefficients() == b.squash_coefficients() && a.breaks() == b.breaks();
}

std::vector<double> chebyshev_knots(double a, double b, std::size_t segments) {
  std::vector<double> t(segments + 1);
  for (std::size_t i = 0; i <= segments; ++i) {
    const double x = -std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(segments));
    t[i] = a + 0.5 * (b - a) * (x + 1.0);
  }
  t.front() = a;
  t.back() = b;
  return t;
}

WarpedProfile profile_from_jet(int n, std::span<const double> knots,
                               const std::function<Jet(double)>& jet, double flat_radius,
                               std::vector<double> breaks, Closure closure,
                               const std::function<Jet(double)>& squash_jet) {
  // breaks become knots so the C2 joins sit between Hermite segments
  std::vector<double> t =
      merge_points(std::vector<double>(knots.begin(), knots.end()), interior_breaks(breaks, knots.back()));
  std::vector<Jet> fj(t.size());
  std::vector<Jet> kj;
  for (std::size_t i = 0; i < t.size(); ++i) fj[i] = jet(t[i]);
  if (squash_jet) {
    kj.resize(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) kj[i] = squash_jet(t[i]);
  }
  return from_hermite(n, std::move(t), fj, kj, flat_radius, std::move(breaks), closure);
}

namespace {

WarpedProfile sine_profile(int n, double radius, double T, std::size_t segments, Closure closure) {
  require(n >= 3, ErrorKind::InvalidArgument, "round profile: n must be >= 3");
  require(radius > 0.0, ErrorKind::InvalidArgument, "round profile: radius must be > 0");
  const auto knots = chebyshev_knots(0.0, T, segments);
  auto jet = [radius](double t) {
    const double s = std::sin(t / radius);
    return Jet{radius * s, std::cos(t / radius), -s / radius};
  };
  return profile_from_jet(n, knots, jet, 0.0, {}, closure);
}

}  // namespace

WarpedProfile round_profile(int n, double radius, std::size_t segments) {
  return sine_profile(n, radius, std::numbers::pi * radius, segments, Closure::Pole);
}

WarpedProfile round_projective_profile(int n, double radius, std::size_t segments) {
  return sine_profile(n, radius, 0.5 * std::numbers::pi * radius, segments, Closure::CrossCap);
}

double scalar_curvature(const WarpedProfile& p, double t) {
  const int n = p.dimension();
  const double T = p.length();
  const double pole_band = 1e-9 * T;
  if (t <= pole_band) {
    if (p.flat_radius() > 0.0) return 0.0;
    return -n * (n - 1.0) * p.third_derivative(0.0);
  }
  if (p.closure() == Closure::Pole && t >= T - pole_band) return n * (n - 1.0) * p.third_derivative(T);
  if (t < p.flat_radius()) return 0.0;
  const Jet j = p.eval(t);
  if (!(j.v > 0.0)) {
    fail(ErrorKind::DegenerateProfile, "f(t) <= 0 at interior t = " + std::to_string(t));
  }
  if (!p.squashed()) {
    return -2.0 * (n - 1.0) * j.d2 / j.v + (n - 1.0) * (n - 2.0) * (1.0 - j.d1 * j.d1) / (j.v * j.v);
  }
  // Bianchi IX form dt^2 + a1^2 s1^2 + a2^2 s2^2 + a3^2 s3^2, a1 = k f, a2 = a3 = f:
  // s = s_fibre - 2 sum(a''/a - (a'/a)^2) - (sum a'/a)^2 - sum (a'/a)^2.
  const Jet k = p.squash(t);
  const double lf = j.d1 / j.v;
  const double l1 = k.d1 / k.v + lf;
  const double q1 = k.d2 / k.v + 2.0 * k.d1 * j.d1 / (k.v * j.v) + j.d2 / j.v;
  const double qf = j.d2 / j.v;
  const double fibre = (8.0 - 2.0 * k.v * k.v) / (j.v * j.v);
  const double H = l1 + 2.0 * lf;
  return fibre - 2.0 * ((q1 - l1 * l1) + 2.0 * (qf - lf * lf)) - H * H - (l1 * l1 + 2.0 * lf * lf);
}

double closure_residual(const WarpedProfile& p) {
  const Jet a = p.eval(0.0);
  const Jet b = p.eval(p.length());
  double r = std::max(std::abs(a.v), std::abs(a.d1 - 1.0));
  if (p.closure() == Closure::Pole) {
    r = std::max({r, std::abs(b.v), std::abs(b.d1 + 1.0)});
  } else {
    r = std::max(r, std::abs(b.d1));
  }
  if (p.squashed()) {
    const Jet k0 = p.squash(0.0);
    const Jet k1 = p.squash(p.length());
    r = std::max({r, std::abs(k0.v - 1.0), std::abs(k0.d1), std::abs(k1.v - 1.0), std::abs(k1.d1)});
  }
  return r;
}

void validate_profile(const WarpedProfile& p, double tol) {
  const double res = closure_residual(p);
  if (!(res <= tol)) {
    fail(ErrorKind::DegenerateProfile, "closure residual " + std::to_string(res));
  }
  const auto& k = p.knots();
  const std::size_t last = p.closure() == Closure::Pole ? k.size() - 1 : k.size();
  for (std::size_t i = 1; i < last; ++i) {
    if (!(p.f(k[i]) > 0.0)) {
      fail(ErrorKind::DegenerateProfile, "f <= 0 at interior knot t = " + std::to_string(k[i]));
    }
    if (p.squashed() && !(p.squash(k[i]).v > 0.0)) {
      fail(ErrorKind::DegenerateProfile, "squash <= 0 at t = " + std::to_string(k[i]));
    }
  }
}

WarpedProfile rescale(const WarpedProfile& p, double b) {
  require(b >= 1.0, ErrorKind::InvalidArgument, "rescale factor must be >= 1");
  const double s = std::sqrt(b);
  std::vector<double> knots(p.knots());
  for (auto& t : knots) t *= s;
  knots.front() = 0.0;
  std::vector<double> coeffs(p.coefficients());
  const double scale[kCoeffs] = {s, 1.0, 1.0 / s, 1.0 / b, 1.0 / (b * s), 1.0 / (b * b)};
  for (std::size_t i = 0; i < coeffs.size(); ++i) coeffs[i] *= scale[i % kCoeffs];
  std::vector<double> squash(p.squash_coefficients());
  const double kscale[kCoeffs] = {1.0, 1.0 / s, 1.0 / b, 1.0 / (b * s), 1.0 / (b * b), 1.0 / (b * b * s)};
  for (std::size_t i = 0; i < squash.size(); ++i) squash[i] *= kscale[i % kCoeffs];
  std::vector<double> breaks(p.breaks());
  for (auto& t : breaks) t *= s;
  return WarpedProfile(p.dimension(), std::move(knots), std::move(coeffs), p.flat_radius() * s,
                       std::move(breaks), p.closure(), std::move(squash));
}

namespace {

// Output jet of f~ = lambda f in the new arclength dt~ = lambda dt.
Jet transformed_jet(const Jet& f, const Jet& lam) {
  const double l = lam.v;
  const double g = lam.d1 * f.v + l * f.d1;  // (lambda f)'
  const double gp = lam.d2 * f.v + 2.0 * lam.d1 * f.d1 + l * f.d2;
  return {l * f.v, g / l, (gp * l - g * lam.d1) / (l * l * l)};
}

// k~(t~) = k(t): only the parametrization changes.
Jet reparametrized_jet(const Jet& k, const Jet& lam) {
  return {k.v, k.d1 / lam.v, (k.d2 * lam.v - k.d1 * lam.d1) / (lam.v * lam.v * lam.v)};
}

}  // namespace

WarpedProfile conformal_transform(const WarpedProfile& p, const std::function<Jet(double)>& lambda,
                                  std::span<const double> extra_breaks) {
  std::vector<double> pts = merge_points(p.knots(), extra_breaks);
  pts = merge_points(std::move(pts), p.breaks());
  std::vector<double> tt(pts.size());
  tt[0] = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    tt[i + 1] = tt[i] + integrate_gauss([&](double t) { return lambda(t).v; }, pts[i], pts[i + 1], 20);
  }
  std::vector<Jet> fj(pts.size());
  std::vector<Jet> kj;
  if (p.squashed()) kj.resize(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Jet lam = lambda(pts[i]);
    require(lam.v > 0.0, ErrorKind::DegenerateProfile, "conformal factor must stay positive");
    fj[i] = transformed_jet(p.eval(pts[i]), lam);
    if (p.squashed()) kj[i] = reparametrized_jet(p.squash(pts[i]), lam);
  }
  // Poles: lambda f vanishes and the new slope is f'(pole) regardless of lambda.
  fj.front() = {0.0, 1.0, 0.0};
  if (p.closure() == Closure::Pole) fj.back() = {0.0, -1.0, 0.0};
  auto map_point = [&](double t) {
    const auto it = std::lower_bound(pts.begin(), pts.end(), t);
    const std::size_t idx = static_cast<std::size_t>(it - pts.begin());
    return tt[std::min(idx, tt.size() - 1)];
  };
  std::vector<double> breaks;
  for (double b : p.breaks()) breaks.push_back(map_point(b));
  for (double b : extra_breaks) breaks.push_back(map_point(b));
  // A factor equal to 1 on the flat ball keeps it flat.
  double flat = 0.0;
  if (p.flat_radius() > 0.0) {
    bool unit = true;
    for (double t : pts) {
      if (t > p.flat_radius()) break;
      const Jet l = lambda(t);
      unit = unit && l.v == 1.0 && l.d1 == 0.0 && l.d2 == 0.0;
    }
    if (unit) flat = map_point(p.flat_radius());
  }
  return from_hermite(p.dimension(), std::move(tt), fj, kj, flat, std::move(breaks), p.closure());
}

double flat_coordinate(const WarpedProfile& p, double t) {
  require(t > 0.0, ErrorKind::InvalidArgument, "flat_coordinate needs t > 0");
  require(p.closure() == Closure::CrossCap ? t <= p.length() : t < p.length(), ErrorKind::InvalidArgument,
          "flat_coordinate: t outside the profile");
  require(squash_is_trivial_on(p, 0.0, t), ErrorKind::InvalidArgument,
          "flat_coordinate: metric is squashed inside the ball");
  const double start = std::min(p.flat_radius(), t);
  std::vector<double> pts{start, t};
  for (double k : p.knots()) {
    if (k > start && k < t) pts.push_back(k);
  }
  std::sort(pts.begin(), pts.end());
  auto integrand = [&p](double s) { return 1.0 / p.f(s) - 1.0 / s; };
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    if (pts[i + 1] > pts[i]) acc += integrate_gauss(integrand, pts[i], pts[i + 1], 24);
  }
  return t * std::exp(acc);
}

WarpedProfile conformal_flatten_near_pole(const WarpedProfile& p, double r0, double r1) {
  const double T = p.length();
  require(r0 >= 1.0 && r1 > r0, ErrorKind::InvalidArgument, "transition window must satisfy 1 <= r0 < r1");
  require(r1 < T, ErrorKind::InvalidArgument, "transition window must lie inside (0, T)");
  if (p.flat_radius() >= r1) return p;
  require(squash_is_trivial_on(p, 0.0, r1), ErrorKind::InvalidArgument,
          "flattening needs an unsquashed metric on [0, r1]");

  // rho(t) = t exp(int_0^t (1/f - 1/s) ds) puts the metric in the form (f/rho)^2 (drho^2 + rho^2 dtheta^2).
  const std::size_t window_segments = 96;
  auto window = chebyshev_knots(r0, r1, window_segments);
  std::vector<double> inner;  // sample points on (0, r1]
  for (double t : p.knots()) {
    if (t > 0.0 && t < r0) inner.push_back(t);
  }
  inner.insert(inner.end(), window.begin(), window.end());
  inner = sorted_unique(std::move(inner), 1e-13 * T);
  std::vector<double> log_ratio(inner.size());
  double acc = 0.0;
  double prev = 0.0;
  auto integrand = [&p](double s) { return 1.0 / p.f(s) - 1.0 / s; };
  for (std::size_t i = 0; i < inner.size(); ++i) {
    acc += integrate_gauss(integrand, prev, inner[i], 24);
    log_ratio[i] = acc;
    prev = inner[i];
  }
  auto rho_at = [&](std::size_t i) { return inner[i] * std::exp(log_ratio[i]); };

  // Exact flat zone: t~ = rho(t), f~ = t~.
  std::vector<double> out_t{0.0};
  std::vector<Jet> out_j{{0.0, 1.0, 0.0}};
  std::size_t i = 0;
  for (; i < inner.size() && inner[i] <= r0; ++i) {
    const double rho = rho_at(i);
    out_t.push_back(rho);
    out_j.push_back({rho, 1.0, 0.0});
  }
  const double flat = out_t.back();  // rho(r0)

  // Transition zone: lambda = chi rho/f + (1 - chi), chi = 1 - S((t - r0)/(r1 - r0)).
  const double w = r1 - r0;
  auto lambda_at = [&](double t, double rho) {
    const Jet f = p.eval(t);
    const Jet s = smoothstep((t - r0) / w);
    const double chi = 1.0 - s.v;
    const double dchi = -s.d1 / w;
    const double d2chi = -s.d2 / (w * w);
    const double q = rho / f.v;
    const double dq = rho * (1.0 - f.d1) / (f.v * f.v);
    const double d2q = rho * ((1.0 - f.d1) * (1.0 - 2.0 * f.d1) / (f.v * f.v * f.v) - f.d2 / (f.v * f.v));
    return Jet{chi * q + (1.0 - chi), dchi * (q - 1.0) + chi * dq,
               d2chi * (q - 1.0) + 2.0 * dchi * dq + chi * d2q};
  };
  double t_prev = r0;
  double rho_prev = flat;
  double tt_prev = flat;
  for (; i < inner.size(); ++i) {
    const double t = inner[i];
    const double rho = rho_at(i);
    const double log_prev = std::log(rho_prev / t_prev);
    auto lam_v = [&](double s) {
      const double lr = log_prev + integrate_gauss(integrand, t_prev, s, 24);
      return lambda_at(s, s * std::exp(lr)).v;
    };
    const double tt = tt_prev + integrate_gauss(lam_v, t_prev, t, 20);
    const Jet lam = lambda_at(t, rho);
    require(lam.v > 0.0, ErrorKind::DegenerateProfile, "flattening factor became non-positive");
    out_t.push_back(tt);
    out_j.push_back(transformed_jet(p.eval(t), lam));
    t_prev = t;
    rho_prev = rho;
    tt_prev = tt;
  }
  const std::size_t n_inner = out_t.size();
  const double shift = tt_prev - r1;
  for (double t : p.knots()) {
    if (t > r1) {
      out_t.push_back(t + shift);
      out_j.push_back(p.eval(t));
    }
  }
  if (p.closure() == Closure::Pole) out_j.back() = {0.0, -1.0, 0.0};
  std::vector<Jet> out_k;
  if (p.squashed()) {
    out_k.assign(n_inner, kOne);
    for (double t : p.knots()) {
      if (t > r1) out_k.push_back(p.squash(t));
    }
  }
  std::vector<double> breaks{flat, r1 + shift};
  for (double b : p.breaks()) {
    if (b > r1) breaks.push_back(b + shift);
  }
  WarpedProfile out = from_hermite(p.dimension(), std::move(out_t), out_j, out_k, flat, std::move(breaks),
                                   p.closure());
  if (flat < 1.0) {
    const double b = (1.0 / (flat * flat)) * (1.0 + 1e-14);
    out = rescale(out, b);
  }
  if (out.flat_radius() < 1.0) fail(ErrorKind::DegenerateProfile, "flattening failed to reach radius 1");
  return out;
}

Jet BlendSpec::chi(double t) const {
  const Jet s = smoothstep((t - epsilon) / epsilon);
  return {amplitude * (1.0 - s.v), -amplitude * s.d1 / epsilon, -amplitude * s.d2 / (epsilon * epsilon)};
}

double BlendSpec::derivative_constant() {
  // max |S'| = 15/8, max |S''| = 10/sqrt(3)
  return std::max(15.0 / 8.0, 10.0 / std::sqrt(3.0));
}

WarpedProfile blend_profiles(const WarpedProfile& g, const WarpedProfile& h, const BlendSpec& spec) {
  require(g.dimension() == h.dimension(), ErrorKind::InvalidArgument, "blend: dimension mismatch");
  require(spec.epsilon > 0.0, ErrorKind::InvalidArgument, "blend: epsilon must be > 0");
  require(spec.amplitude >= 0.0 && spec.amplitude <= 1.0, ErrorKind::InvalidArgument,
          "blend: amplitude must lie in [0, 1]");
  const double eps = spec.epsilon;
  require(2.0 * eps < g.length() && 2.0 * eps <= h.length(), ErrorKind::InvalidArgument,
          "blend: 2 eps must lie inside both profiles");
  const Jet g0 = g.eval(0.0);
  const Jet h0 = h.eval(0.0);
  require(std::abs(g0.v - h0.v) < 1e-12 && std::abs(g0.d1 - h0.d1) < 1e-12, ErrorKind::InvalidArgument,
          "blend: metrics must coincide at the pole");
  if (g == h || spec.amplitude == 0.0) return g;

  auto jet = [&](double t) -> Jet {
    const Jet c = spec.chi(t);
    if (c.v == 1.0 && c.d1 == 0.0) return h.eval(t);
    if (c.v == 0.0 && c.d1 == 0.0 && c.d2 == 0.0) return g.eval(t);
    const Jet a = square_jet(g.eval(t));
    const Jet b = square_jet(h.eval(t));
    const double F = c.v * b.v + (1.0 - c.v) * a.v;
    const double dF = c.d1 * (b.v - a.v) + c.v * b.d1 + (1.0 - c.v) * a.d1;
    const double d2F = c.d2 * (b.v - a.v) + 2.0 * c.d1 * (b.d1 - a.d1) + c.v * b.d2 + (1.0 - c.v) * a.d2;
    return sqrt_jet(F, dF, d2F);
  };
  std::vector<double> knots;
  for (double t : h.knots()) {
    if (t < eps) knots.push_back(t);
  }
  const auto mid = chebyshev_knots(eps, 2.0 * eps, 64);
  knots.insert(knots.end(), mid.begin(), mid.end());
  for (double t : g.knots()) {
    if (t > 2.0 * eps) knots.push_back(t);
  }
  knots = sorted_unique(std::move(knots), 1e-13 * g.length());
  std::vector<double> breaks{eps, 2.0 * eps};
  for (double b : g.breaks()) {
    if (b > 2.0 * eps) breaks.push_back(b);
  }
  for (double b : h.breaks()) {
    if (b < eps) breaks.push_back(b);
  }
  const double flat = std::min(h.flat_radius(), eps);
  std::function<Jet(double)> kjet;
  if (g.squashed() || h.squashed()) {
    // the squashed direction carries (f k)^2, blended like f^2
    kjet = [&](double t) -> Jet {
      const Jet c = spec.chi(t);
      if (c.v == 1.0 && c.d1 == 0.0) return h.squash(t);
      if (c.v == 0.0 && c.d1 == 0.0 && c.d2 == 0.0) return g.squash(t);
      if (t <= 0.0) return kOne;
      const Jet a = square_jet(product_jet(g.squash(t), g.eval(t)));
      const Jet b = square_jet(product_jet(h.squash(t), h.eval(t)));
      const double F = c.v * b.v + (1.0 - c.v) * a.v;
      const double dF = c.d1 * (b.v - a.v) + c.v * b.d1 + (1.0 - c.v) * a.d1;
      const double d2F = c.d2 * (b.v - a.v) + 2.0 * c.d1 * (b.d1 - a.d1) + c.v * b.d2 + (1.0 - c.v) * a.d2;
      return quotient_jet(sqrt_jet(F, dF, d2F), jet(t));
    };
  }
  return profile_from_jet(g.dimension(), knots, jet, flat, std::move(breaks), g.closure(), kjet);
}

WarpedProfile interpolate_metrics(const WarpedProfile& g, const WarpedProfile& h, double t) {
  require(g.dimension() == h.dimension(), ErrorKind::InvalidArgument, "interpolate: dimension mismatch");
  require(g.closure() == h.closure(), ErrorKind::InvalidArgument, "interpolate: closure mismatch");
  require(std::abs(g.length() - h.length()) <= 1e-12 * g.length(), ErrorKind::InvalidArgument,
          "interpolate: profiles must share the interval");
  require(t >= 0.0 && t <= 1.0, ErrorKind::InvalidArgument, "interpolate: t must lie in [0, 1]");
  if (t == 1.0) return g;
  if (t == 0.0) return h;
  const double T = g.length();
  const bool pole = g.closure() == Closure::Pole;
  auto fjet = [&](double s) -> Jet {
    if (s <= 0.0) return {0.0, 1.0, 0.0};
    if (pole && s >= T) return {0.0, -1.0, 0.0};
    const Jet a = square_jet(g.eval(s));
    const Jet b = square_jet(h.eval(s));
    return sqrt_jet(t * a.v + (1.0 - t) * b.v, t * a.d1 + (1.0 - t) * b.d1, t * a.d2 + (1.0 - t) * b.d2);
  };
  std::function<Jet(double)> kjet;
  if (g.squashed() || h.squashed()) {
    kjet = [&](double s) -> Jet {
      if (s <= 0.0 || (pole && s >= T)) return kOne;
      const Jet a = square_jet(product_jet(g.squash(s), g.eval(s)));
      const Jet b = square_jet(product_jet(h.squash(s), h.eval(s)));
      const Jet a1 = sqrt_jet(t * a.v + (1.0 - t) * b.v, t * a.d1 + (1.0 - t) * b.d1, t * a.d2 + (1.0 - t) * b.d2);
      return quotient_jet(a1, fjet(s));
    };
  }
  std::vector<double> knots(g.knots());
  knots = merge_points(std::move(knots), h.knots());
  knots.back() = T;
  std::vector<double> breaks(g.breaks());
  breaks.insert(breaks.end(), h.breaks().begin(), h.breaks().end());
  return profile_from_jet(g.dimension(), knots, fjet, std::min(g.flat_radius(), h.flat_radius()),
                          std::move(breaks), g.closure(), kjet);
}

}  // namespace masslab
