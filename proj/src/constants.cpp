#include "masslab/constants.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

#include "masslab/error.hpp"
#include "masslab/yamabe.hpp"

namespace masslab {

double unit_ball_volume(int n) { return omega(n) / n; }

double F_n_quadrature(int n) {
  require(n >= 3, ErrorKind::InvalidArgument, "F_n needs n >= 3");
  // s = tan(theta) turns the integrand into sin^{n-1} cos^{n-1}, a trigonometric polynomial
  const auto f = [n](double th) { return std::pow(std::sin(th) * std::cos(th), n - 1.0); };
  return omega(n) * integrate_gauss(f, 0.0, 0.5 * std::numbers::pi, 96);
}

double F_n_closed_form(int n) { return omega(n) * 0.5 * std::beta(0.5 * n, 0.5 * n); }

BaseConstants compute_base_constants(const CutoffEta& eta) {
  const int n = eta.n;
  require(n >= 3, ErrorKind::InvalidArgument, "constants need n >= 3");
  const double N = critical_exponent(n);
  const double q = N / (N - 1.0);
  BaseConstants b;
  b.C_n = eta_energy(eta);
  // |F|^q has kinks at the sign changes of F; integrate between them
  std::vector<double> cuts{0.5};
  const std::size_t samples = 2048;
  for (std::size_t i = 1; i + 1 < samples; ++i) {
    double lo = 0.5 + 0.5 * static_cast<double>(i) / samples;
    double hi = 0.5 + 0.5 * static_cast<double>(i + 1) / samples;
    if ((F_eta(eta, lo) > 0.0) == (F_eta(eta, hi) > 0.0)) continue;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      ((F_eta(eta, mid) > 0.0) == (F_eta(eta, lo) > 0.0) ? lo : hi) = mid;
    }
    cuts.push_back(0.5 * (lo + hi));
  }
  cuts.push_back(1.0);
  double I = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    I += integrate_tanh_sinh(
        [&](double r) { return std::pow(std::abs(F_eta(eta, r)), q) * std::pow(r, n - 1.0); }, cuts[i], cuts[i + 1],
        1e-14);
  }
  I *= omega(n);
  b.D_n = 2.0 * std::pow(I, (N - 1.0) / N);
  b.B_n = std::pow(6.0, n / N) * std::pow(unit_ball_volume(n), -1.0 / N) * b.D_n;
  return b;
}

double alpha0_cutoff(int n) {
  const auto f = [n](double x) { return std::pow(smoothstep(x - 1.0).d1, n) * std::pow(x, n - 1.0); };
  return std::pow(omega(n) * integrate_adaptive(f, 1.0, 2.0, 1e-14), 2.0 / n);
}

double cutoff_gradient_constant() { return smoothstep(0.5).d1; }

double step1_constant(int n, double delta, double a) {
  const double N = critical_exponent(n);
  return std::pow(std::pow(2.0, n) - 1.0, 1.0 / N) * std::sqrt(delta) * std::pow(unit_ball_volume(n), 1.0 / N) *
         std::max(1.0, 2.0 / a);
}

double choose_delta(int n, double a, double alpha0, double B_n) {
  require(a > 0.0, ErrorKind::InvalidArgument, "choose_delta needs a > 0");
  const double nw = (n - 2.0) * omega(n);
  // E_n(a)^2 alpha0 <= (n-2) omega / 4, E_n^2 linear in delta
  const double step1 = 0.25 * nw / (alpha0 * std::pow(step1_constant(n, 1.0, a), 2));
  // sup_x delta x/(B+x)^2 = delta/(4B) < 6^{-(n-2)}
  const double small_rho = 4.0 * B_n * std::pow(6.0, -(n - 2.0));
  // A rho^{n-2} <= delta keeps the bubble predicates true for every A
  const double zeta2 = 0.25 * nw;
  const double s1 = 0.5 / zeta2;
  const double s3 = 1.0 / nw;
  return 0.999 * std::min({step1, small_rho, s1, s3});
}

double DimensionalConstants::rho(double A) const {
  return std::pow(delta * std::abs(A) / ((B_n + std::abs(A)) * (B_n + std::abs(A))), 1.0 / (n - 2.0));
}

double DimensionalConstants::width(double A) const {
  return zeta * std::sqrt(std::abs(A)) * std::pow(rho(A), 0.5 * n);
}

namespace {

DimensionalConstants build_chain(int n, double a, int smoothness) {
  require(n >= 3, ErrorKind::InvalidArgument, "constants need n >= 3");
  require(a > 0.0 && std::isfinite(a), ErrorKind::InvalidArgument, "level a must be positive");
  const CutoffEta eta{n, smoothness};
  const BaseConstants base = compute_base_constants(eta);
  DimensionalConstants c;
  c.n = n;
  c.a = a;
  c.omega = omega(n);
  c.vol_ball = unit_ball_volume(n);
  c.N = critical_exponent(n);
  c.C_n = base.C_n;
  c.D_n = base.D_n;
  c.B_n = base.B_n;
  c.zeta = 0.5 * std::sqrt((n - 2.0) * c.omega);
  c.alpha0 = alpha0_cutoff(n);
  c.delta = choose_delta(n, a, c.alpha0, c.B_n);
  c.E_step1 = step1_constant(n, c.delta, a);
  c.Eprime = std::pow(4.0, -n) * std::pow((n - 2.0) * c.omega, 0.5 * (n + 2.0)) * std::pow(c.delta, 0.5 * n);
  c.F_n = F_n_quadrature(n);
  c.F_n_closed = F_n_closed_form(n);
  c.G_n = std::pow(c.Eprime * std::pow(c.F_n, -2.0 / c.N), 1.0 / n);
  c.sigma = sigma_sphere(n);
  c.alpha_n = c.sigma - std::pow(c.G_n, n) / std::pow(2.0, n);
  c.d_n = std::max(2.0 * c.B_n * c.sigma / c.G_n, c.D_n * c.D_n / (2.0 * c.G_n));
  c.eta_profile_id = eta.id();
  c.cutoff_profile_id = "h=1-smoothstep5((r-rho)/rho)";
  return c;
}

}  // namespace

DimensionalConstants compute_chain(int n, double a, int eta_smoothness) {
  static std::mutex mutex;
  static std::map<std::tuple<int, double, int>, DimensionalConstants> cache;
  const auto key = std::make_tuple(n, a, eta_smoothness);
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  DimensionalConstants c = build_chain(n, a, eta_smoothness);
  std::lock_guard lock(mutex);
  cache.emplace(key, c);
  return c;
}

std::vector<ChainCheck> verify_chain(const DimensionalConstants& c) {
  const int n = c.n;
  const double nw = (n - 2.0) * c.omega;
  std::vector<ChainCheck> out;
  out.push_back({"C_n >= 0", -c.C_n, 0.0, false});
  out.push_back({"step1: E_n^2 alpha0 <= (n-2) omega/4", c.E_step1 * c.E_step1 * c.alpha0, 0.25 * nw, false});
  out.push_back({"rho < 1/6: delta/(4 B_n) < 6^{-(n-2)}", c.delta / (4.0 * c.B_n), std::pow(6.0, -(n - 2.0)), true});
  out.push_back({"s1: zeta^2 delta <= 1/2", c.zeta * c.zeta * c.delta, 0.5, false});
  out.push_back({"s3b: delta <= 1/((n-2) omega)", c.delta, 1.0 / nw, false});
  out.push_back({"alpha_n < sigma", c.alpha_n, c.sigma, true});
  for (auto [name, v] : {std::pair{"D_n", c.D_n}, {"B_n", c.B_n}, {"zeta", c.zeta}, {"alpha0", c.alpha0},
                         {"delta", c.delta}, {"E_n", c.E_step1}, {"E'_n", c.Eprime}, {"F_n", c.F_n},
                         {"G_n", c.G_n}, {"d_n", c.d_n}}) {
    out.push_back({std::string(name) + " > 0 finite", -v, std::isfinite(v) ? 0.0 : -1.0, true});
  }
  return out;
}

MassUpperBounds mass_upper_bounds(int n, double a) {
  const double sigma = sigma_sphere(n);
  require(a > 0.0 && a < sigma, ErrorKind::InvalidArgument, "level a must lie in (0, sigma(S^n))");
  const DimensionalConstants c = compute_chain(n, a);
  return {c.D_n * c.D_n / (4.0 * a), c.d_n * std::pow(sigma - a, 1.0 / n) / a};
}

GapVerdict sigma_gap_criterion(int n, const std::vector<std::pair<double, double>>& samples, double sigma_M) {
  std::vector<std::pair<double, double>> usable;
  for (const auto& s : samples)
    if (s.first > 0.0 && s.first < sigma_M) usable.push_back(s);
  require(!usable.empty(), ErrorKind::InsufficientSamples, "no samples with 0 < a < sigma_M");
  std::sort(usable.begin(), usable.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
  const std::size_t tail = std::max<std::size_t>(1, (usable.size() + 1) / 2);
  GapVerdict v;
  v.used = tail;
  v.estimate = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tail; ++i) {
    const double ratio = usable[i].second / std::pow(sigma_M - usable[i].first, 1.0 / n);
    if (ratio > v.estimate) {
      v.estimate = ratio;
      v.best_a = usable[i].first;
    }
  }
  const DimensionalConstants c = compute_chain(n, usable.back().first);
  v.threshold = c.d_n / c.sigma;
  v.hypothesis_met = v.threshold < v.estimate;
  return v;
}

nlohmann::json to_json(const DimensionalConstants& c) {
  return {{"n", c.n},
          {"a", c.a},
          {"omega", c.omega},
          {"vol_ball", c.vol_ball},
          {"N", c.N},
          {"C_n", c.C_n},
          {"D_n", c.D_n},
          {"B_n", c.B_n},
          {"zeta", c.zeta},
          {"alpha0", c.alpha0},
          {"delta", c.delta},
          {"E_n", c.E_step1},
          {"Eprime_n", c.Eprime},
          {"F_n", c.F_n},
          {"F_n_closed_form", c.F_n_closed},
          {"G_n", c.G_n},
          {"alpha_n", c.alpha_n},
          {"d_n", c.d_n},
          {"sigma_sphere", c.sigma},
          {"eta_profile", c.eta_profile_id},
          {"cutoff_profile", c.cutoff_profile_id}};
}

}  // namespace masslab
