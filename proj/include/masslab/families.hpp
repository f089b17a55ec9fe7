#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "masslab/profile.hpp"

namespace masslab {

/// Compact C2 bump (1 - x^2)^3 on |x| < 1 with derivatives in x.
Jet poly_bump(double x);

/// Start of the region where a flattened profile is no longer Euclidean or in transition:
/// the largest break (or the flat radius when there are none).
double curved_region_start(const WarpedProfile& p);

/// conformal_flatten_near_pole(round_profile(n, R), 1, 1 + w).
WarpedProfile flattened_round_sphere(int n, double radius, double window = 0.5);
/// Same for the round RP^n (cross-cap closure).
WarpedProfile flattened_round_projective(int n, double radius, double window = 0.5);

/// f -> f exp(sum_k a_k bump((t - c_k)/w)); bumps must sit in the curved region.
WarpedProfile with_bumps(const WarpedProfile& base, std::span<const double> amplitudes,
                         std::span<const double> centers, double width);

/// Radial conformal change by exp(c bump((t - center)/width)) outside the flat ball.
WarpedProfile with_conformal_bump(const WarpedProfile& base, double amplitude, double center, double width);

/// n = 4: sets the U(2) squash k = exp(s bump((t - center)/width)) on an unsquashed profile.
WarpedProfile with_squash(const WarpedProfile& base, double amplitude, double center, double width);

/// n = 4 round S^4 of radius 1 with squash amplitude s on [pi/2 - 0.8, pi/2 + 0.8].
WarpedProfile squashed_round_sphere(double amplitude);

/// n = 4 Euclidean R^4 on [0, length] whose squash ramps from 1 to `k_end` across [a, b]
/// (quintic smoothstep). Used as the local metric h of blend experiments.
WarpedProfile squashed_euclidean(double k_end, double a, double b, double length = 1.0);

/// A family member: the component containing the flat pole, and optionally a second closed
/// component of a disjoint union.
struct FamilyMember {
  WarpedProfile primary;
  std::optional<WarpedProfile> other;
};

struct MetricFamily {
  std::string id;
  std::string description;
  int n = 3;
  std::vector<std::string> names;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> reference;  // theta_0
  std::function<FamilyMember(std::span<const double>)> build;

  std::size_t dimension() const { return lower.size(); }
  bool in_bounds(std::span<const double> theta) const;
  /// Throws InvalidArgument when theta is outside the box.
  FamilyMember operator()(std::span<const double> theta) const;
};

/// Shipped families:
///  sphere-flat     conformally round S^n flat near p (radius, flattening window, conformal bump)
///  rp-bump         flattened round RP^n with two warping bumps (radius, bump amplitudes)
///  sphere-squash   n = 4: flattened S^4 with a U(2) squash bump (radius, squash amplitude)
///  union           rp-bump (n = 3) or sphere-squash (n = 4) disjoint with a round sphere of
///                  radius R2
MetricFamily make_family(const std::string& id, int n);
std::vector<std::string> family_ids();

/// n = 3 profiles gentle enough for the level-3 simplicial mesh (flattening window 1):
///  s3-flat    flattened round S^3 of radius 2 (m = 0)
///  rp3-flat   flattened round RP^3 of radius 2 (m = 1/(16 pi))
///  rp3-warp   rp3-flat with one wide warping bump of amplitude 0.1
WarpedProfile fem_reference_profile(const std::string& id);
std::vector<std::string> fem_reference_ids();

/// Background g and local metric h of a blend experiment:
///  round-flat   round S^3 of radius 1 and Euclidean R^3 (conformally trivial blend)
///  squash       squashed_round_sphere(0.3) and Euclidean R^4 with squash ramp 1 -> 1.2 on
///               [0.02, 0.04]
struct BlendPair {
  WarpedProfile g;
  WarpedProfile h;
  /// Every blend is conformal to g, so Y(g_eps) = Y(g) up to discretization.
  bool conformally_trivial = false;
};
BlendPair blend_pair(const std::string& id);
std::vector<std::string> blend_pair_ids();

}  // namespace masslab
