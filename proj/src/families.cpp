#include "masslab/families.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "masslab/error.hpp"
#include "masslab/quadrature.hpp"

namespace masslab {

namespace {

Jet scaled_bump(double t, double center, double width) {
  const Jet b = poly_bump((t - center) / width);
  return {b.v, b.d1 / width, b.d2 / (width * width)};
}

Jet exp_of(double a, const Jet& b) {
  const double e = std::exp(a * b.v);
  return {e, e * a * b.d1, e * (a * b.d2 + a * a * b.d1 * b.d1)};
}

Jet times(const Jet& a, const Jet& b) { return {a.v * b.v, a.d1 * b.v + a.v * b.d1, a.d2 * b.v + 2.0 * a.d1 * b.d1 + a.v * b.d2}; }

std::function<Jet(double)> squash_of(const WarpedProfile& p) {
  if (!p.squashed()) return {};
  return [p](double t) { return p.squash(t); };
}

}  // namespace

Jet poly_bump(double x) {
  if (std::abs(x) >= 1.0) return {0.0, 0.0, 0.0};
  const double u = 1.0 - x * x;
  return {u * u * u, -6.0 * x * u * u, -6.0 * u * u + 24.0 * x * x * u};
}

double curved_region_start(const WarpedProfile& p) {
  double s = p.flat_radius();
  for (double b : p.breaks())
    if (b < 0.5 * p.length()) s = std::max(s, b);
  return s;
}

WarpedProfile flattened_round_sphere(int n, double radius, double window) {
  return conformal_flatten_near_pole(round_profile(n, radius), 1.0, 1.0 + window);
}

WarpedProfile flattened_round_projective(int n, double radius, double window) {
  return conformal_flatten_near_pole(round_projective_profile(n, radius), 1.0, 1.0 + window);
}

WarpedProfile with_bumps(const WarpedProfile& base, std::span<const double> amplitudes,
                         std::span<const double> centers, double width) {
  require(amplitudes.size() == centers.size(), ErrorKind::InvalidArgument, "bump amplitude/center mismatch");
  const double s0 = curved_region_start(base);
  std::vector<double> breaks(base.breaks());
  for (double c : centers) {
    require(c - width >= s0 && c + width <= base.length(), ErrorKind::InvalidArgument,
            "bump must lie inside the curved region");
    breaks.push_back(c - width);
    breaks.push_back(c + width);
  }
  const std::vector<double> a(amplitudes.begin(), amplitudes.end());
  const std::vector<double> c(centers.begin(), centers.end());
  const auto jet = [&](double t) {
    Jet e{1.0, 0.0, 0.0};
    for (std::size_t k = 0; k < a.size(); ++k) e = times(e, exp_of(a[k], scaled_bump(t, c[k], width)));
    return times(base.eval(t), e);
  };
  return profile_from_jet(base.dimension(), base.knots(), jet, base.flat_radius(), std::move(breaks),
                          base.closure(), squash_of(base));
}

WarpedProfile with_conformal_bump(const WarpedProfile& base, double amplitude, double center, double width) {
  require(center - width >= curved_region_start(base) && center + width <= base.length(),
          ErrorKind::InvalidArgument, "conformal bump must lie inside the curved region");
  if (amplitude == 0.0) return base;
  const std::vector<double> edges{center - width, center + width};
  return conformal_transform(
      base, [=](double t) { return exp_of(amplitude, scaled_bump(t, center, width)); }, edges);
}

WarpedProfile with_squash(const WarpedProfile& base, double amplitude, double center, double width) {
  require(base.dimension() == 4, ErrorKind::InvalidArgument, "squash needs n = 4");
  require(!base.squashed(), ErrorKind::InvalidArgument, "profile is already squashed");
  require(center - width > 0.0 && center + width < base.length(), ErrorKind::InvalidArgument,
          "squash support must avoid both ends");
  std::vector<double> breaks(base.breaks());
  breaks.push_back(center - width);
  breaks.push_back(center + width);
  return profile_from_jet(
      4, base.knots(), [&](double t) { return base.eval(t); }, base.flat_radius(), std::move(breaks),
      base.closure(), [=](double t) { return exp_of(amplitude, scaled_bump(t, center, width)); });
}

WarpedProfile squashed_round_sphere(double amplitude) {
  return with_squash(round_profile(4, 1.0), amplitude, 0.5 * std::numbers::pi, 0.8);
}

WarpedProfile squashed_euclidean(double k_end, double a, double b, double length) {
  require(0.0 < a && a < b && b < length, ErrorKind::InvalidArgument, "squash ramp must satisfy 0 < a < b < length");
  const auto knots = chebyshev_knots(0.0, length, 256);
  return profile_from_jet(
      4, knots, [](double t) { return Jet{t, 1.0, 0.0}; }, a, {a, b}, Closure::Pole, [=](double t) {
        const Jet s = smoothstep((t - a) / (b - a));
        const double d = k_end - 1.0;
        return Jet{1.0 + d * s.v, d * s.d1 / (b - a), d * s.d2 / ((b - a) * (b - a))};
      });
}

bool MetricFamily::in_bounds(std::span<const double> theta) const {
  if (theta.size() != lower.size()) return false;
  for (std::size_t i = 0; i < theta.size(); ++i)
    if (!(theta[i] >= lower[i] && theta[i] <= upper[i])) return false;
  return true;
}

FamilyMember MetricFamily::operator()(std::span<const double> theta) const {
  require(in_bounds(theta), ErrorKind::InvalidArgument, "parameter outside the box of family " + id);
  return build(theta);
}

namespace {

WarpedProfile sphere_flat(int n, double radius, double window, double conformal) {
  const WarpedProfile base = flattened_round_sphere(n, radius, window);
  const double s0 = curved_region_start(base);
  const double L = base.length() - s0;
  return with_conformal_bump(base, conformal, s0 + 0.5 * L, 0.3 * L);
}

WarpedProfile rp_bump(int n, double radius, double a1, double a2) {
  const WarpedProfile base = flattened_round_projective(n, radius);
  const double s0 = curved_region_start(base);
  const double L = base.length() - s0;
  const double amps[] = {a1, a2};
  const double centers[] = {s0 + 0.3 * L, s0 + 0.7 * L};
  return with_bumps(base, amps, centers, 0.25 * L);
}

WarpedProfile sphere_squash(double radius, double squash) {
  const WarpedProfile base = flattened_round_sphere(4, radius);
  const double s0 = curved_region_start(base);
  const double L = base.length() - s0;
  return with_squash(base, squash, s0 + 0.5 * L, 0.3 * L);
}

}  // namespace

MetricFamily make_family(const std::string& id, int n) {
  require(n >= 3, ErrorKind::InvalidArgument, "families need n >= 3");
  MetricFamily f;
  f.id = id;
  f.n = n;
  if (id == "sphere-flat") {
    f.description = "conformally round S^n flat on B_p(1): radius, flattening window, conformal bump";
    f.names = {"radius", "window", "conformal"};
    f.lower = {1.0, 0.3, -0.5};
    f.upper = {3.0, 1.0, 0.5};
    f.reference = {2.0, 0.5, 0.0};
    f.build = [n](std::span<const double> th) { return FamilyMember{sphere_flat(n, th[0], th[1], th[2]), {}}; };
  } else if (id == "rp-bump") {
    f.description = "flattened round RP^n with two warping bumps: radius, bump amplitudes";
    f.names = {"radius", "bump1", "bump2"};
    f.lower = {1.5, -0.15, -0.15};
    f.upper = {3.0, 0.15, 0.15};
    f.reference = {2.0, 0.0, 0.0};
    f.build = [n](std::span<const double> th) { return FamilyMember{rp_bump(n, th[0], th[1], th[2]), {}}; };
  } else if (id == "sphere-squash") {
    require(n == 4, ErrorKind::InvalidArgument, "sphere-squash needs n = 4");
    f.description = "flattened S^4 with a U(2) squash bump: radius, squash amplitude";
    f.names = {"radius", "squash"};
    f.lower = {1.5, -0.3};
    f.upper = {3.0, 1.5};
    f.reference = {2.0, 0.0};
    f.build = [](std::span<const double> th) { return FamilyMember{sphere_squash(th[0], th[1]), {}}; };
  } else if (id == "union") {
    if (n == 4) {
      f.description = "sphere-squash disjoint with a round S^4 of radius R2";
      f.names = {"radius", "squash", "R2"};
      f.lower = {1.5, -0.3, 0.5};
      f.upper = {3.0, 1.5, 3.0};
      f.reference = {2.0, 0.0, 1.0};
      f.build = [](std::span<const double> th) {
        return FamilyMember{sphere_squash(th[0], th[1]), round_profile(4, th[2])};
      };
    } else {
      f.description = "rp-bump disjoint with a round S^n of radius R2";
      f.names = {"radius", "bump1", "bump2", "R2"};
      f.lower = {1.5, -0.15, -0.15, 0.5};
      f.upper = {3.0, 0.15, 0.15, 3.0};
      f.reference = {2.0, 0.0, 0.0, 1.0};
      f.build = [n](std::span<const double> th) {
        return FamilyMember{rp_bump(n, th[0], th[1], th[2]), round_profile(n, th[3])};
      };
    }
  } else {
    fail(ErrorKind::InvalidArgument, "unknown family '" + id + "'");
  }
  return f;
}

std::vector<std::string> family_ids() { return {"sphere-flat", "rp-bump", "sphere-squash", "union"}; }

WarpedProfile fem_reference_profile(const std::string& id) {
  if (id == "s3-flat") return flattened_round_sphere(3, 2.0, 1.0);
  if (id == "rp3-flat") return flattened_round_projective(3, 2.0, 1.0);
  if (id == "rp3-warp") {
    const WarpedProfile base = flattened_round_projective(3, 2.0, 1.0);
    const double s0 = curved_region_start(base);
    const double L = base.length() - s0;
    const double amp[] = {0.1};
    const double center[] = {s0 + 0.5 * L};
    return with_bumps(base, amp, center, 0.45 * L);
  }
  fail(ErrorKind::InvalidArgument, "unknown reference metric '" + id + "'");
}

std::vector<std::string> fem_reference_ids() { return {"s3-flat", "rp3-flat", "rp3-warp"}; }

BlendPair blend_pair(const std::string& id) {
  if (id == "round-flat") {
    return {round_profile(3, 1.0), profile_from_jet(
                                       3, chebyshev_knots(0.0, 2.0, 64), [](double t) { return Jet{t, 1.0, 0.0}; }, 2.0,
                                       {}, Closure::Pole),
            true};
  }
  if (id == "squash") return {squashed_round_sphere(0.3), squashed_euclidean(1.2, 0.02, 0.04), false};
  fail(ErrorKind::InvalidArgument, "unknown blend pair '" + id + "'");
}

std::vector<std::string> blend_pair_ids() { return {"round-flat", "squash"}; }

}  // namespace masslab
