#include "masslab/mass.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "masslab/error.hpp"
#include "masslab/kernels.hpp"

namespace masslab {

double CutoffEta::plateau() const { return 1.0 / ((n - 2.0) * omega(n)); }

Jet CutoffEta::eval(double r) const {
  const Jet s = smoothness == 7 ? smoothstep7(2.0 * r - 1.0) : smoothstep(2.0 * r - 1.0);
  const double c = plateau();
  return {c * (1.0 - s.v), -2.0 * c * s.d1, -4.0 * c * s.d2};
}

std::string CutoffEta::id() const {
  return smoothness == 7 ? "plateau-[0,1/2]-smoothstep7-[1/2,1]" : "plateau-[0,1/2]-smoothstep5-[1/2,1]";
}

double F_eta(const CutoffEta& eta, double r) {
  if (r <= 0.5 || r >= 1.0) return 0.0;
  const Jet e = eta.eval(r);
  const int n = eta.n;
  return std::pow(r, 2.0 - n) * (-e.d2 + (n - 3.0) * e.d1 / r);
}

double eta_energy(const CutoffEta& eta) {
  const int n = eta.n;
  auto integrand = [&](double r) { return eta.eval(r).v * std::pow(r, 2.0 - n) * F_eta(eta, r) * std::pow(r, n - 1.0); };
  return omega(n) * integrate_adaptive(integrand, 0.5, 1.0, 1e-14);
}

double eta_sup(const CutoffEta& eta) {
  // |F| is a smooth bump on [1/2, 1]; dense sampling plus golden-section polish of the best cell.
  const std::size_t samples = 4000;
  double best = 0.0;
  double best_r = 0.75;
  for (std::size_t i = 1; i < samples; ++i) {
    const double r = 0.5 + 0.5 * static_cast<double>(i) / samples;
    const double v = std::abs(F_eta(eta, r));
    if (v > best) {
      best = v;
      best_r = r;
    }
  }
  double a = std::max(0.5, best_r - 0.5 / samples);
  double b = std::min(1.0, best_r + 0.5 / samples);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 60; ++it) {
    const double c = b - g * (b - a);
    const double d = a + g * (b - a);
    if (std::abs(F_eta(eta, c)) > std::abs(F_eta(eta, d))) b = d; else a = c;
  }
  return std::max(best, std::abs(F_eta(eta, 0.5 * (a + b))));
}

namespace {

void require_flat_ball(const DiscreteOperator& op) {
  require(op.profile().flat_radius() >= 1.0, ErrorKind::InvalidArgument,
          "mass needs a metric that is flat on the unit ball (flat_radius >= 1)");
}

}  // namespace

Eigen::VectorXd compute_F_eta(const DiscreteOperator& op, const CutoffEta& eta) {
  require_flat_ball(op);
  require(eta.n == op.dimension(), ErrorKind::InvalidArgument, "eta dimension mismatch");
  return op.sample([&](double t) { return F_eta(eta, t); });
}

double J_value(const DiscreteOperator& op, const CutoffEta& eta, const Eigen::VectorXd& u) {
  const Eigen::VectorXd F = compute_F_eta(op, eta);
  return eta_energy(eta) + 2.0 * op.weights().dot(u.cwiseProduct(F)) + op.form(u, u);
}

MassResult solve_mass(const DiscreteOperator& op, const CutoffEta& eta) {
  const Eigen::VectorXd F = compute_F_eta(op, eta);
  MassResult r;
  r.n = op.dimension();
  r.nodes = op.size();
  r.eta_id = eta.id();
  r.C_n = eta_energy(eta);
  r.beta = op.solve(-F);
  r.residual = op.residual(r.beta, -F);
  r.m_from_pole = r.beta[0];
  r.m = r.m_from_pole;
  r.J_at_beta = r.C_n + 2.0 * op.weights().dot(r.beta.cwiseProduct(F)) + op.form(r.beta, r.beta);
  r.m_from_J = -r.J_at_beta;

  const Eigen::VectorXd alpha = r.beta.array() - r.m;
  const Eigen::VectorXd Ka = op.stiffness() * alpha;
  const Eigen::MatrixXd absK = op.stiffness().cwiseAbs();
  const Eigen::VectorXd scale = absK * r.beta.cwiseAbs();
  double defect = 0.0;
  for (std::size_t i = 1; i < op.size(); ++i) {
    if (op.nodes()[i] >= 0.5) break;
    const auto k = static_cast<Eigen::Index>(i);
    if (scale[k] > 0.0) defect = std::max(defect, std::abs(Ka[k]) / scale[k]);
  }
  r.harmonic_defect = defect;
  return r;
}

nlohmann::json to_json(const MassResult& r, bool include_field) {
  nlohmann::json j{{"n", r.n},
                   {"m", r.m},
                   {"m_from_pole", r.m_from_pole},
                   {"m_from_J", r.m_from_J},
                   {"J_at_beta", r.J_at_beta},
                   {"C_n", r.C_n},
                   {"residual", r.residual},
                   {"harmonic_defect", r.harmonic_defect},
                   {"extraction_gap", r.extraction_gap()},
                   {"nodes", r.nodes},
                   {"eta", r.eta_id}};
  if (include_field) j["beta"] = std::vector<double>(r.beta.data(), r.beta.data() + r.beta.size());
  return j;
}

double critical_norm(const DiscreteOperator& op, const Eigen::VectorXd& u) {
  const double N = critical_exponent(op.dimension());
  double s = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) s += op.weights()[i] * std::pow(std::abs(u[i]), N);
  return std::pow(s, 1.0 / N);
}

Eigen::VectorXd random_radial_field(const DiscreteOperator& op, std::uint64_t seed, std::size_t index) {
  // splitmix-style stream separation so that field k does not depend on how many were drawn before.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  std::mt19937_64 rng(z ^ (z >> 31));
  auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  const double T = op.length();
  double c[6];
  for (double& v : c) v = 2.0 * uniform() - 1.0;
  const double center = uniform() * T;
  const double width = 0.1 + 0.5 * uniform();
  const double bump = 2.0 * uniform() - 1.0;
  const double scale = std::pow(10.0, 4.0 * uniform() - 2.0);
  return op.sample([&](double t) {
    double v = c[0];
    for (int k = 1; k < 6; ++k) v += c[k] * std::cos(k * std::numbers::pi * t / T) / k;
    const double x = (t - center) / width;
    v += bump * std::exp(-x * x);
    return scale * v;
  });
}

JgeqReport quadratic_lower_bound_audit(const DiscreteOperator& op, const CutoffEta& eta, double a,
                                       std::size_t trials, std::uint64_t seed) {
  require(a > 0.0, ErrorKind::InvalidArgument, "Jgeq audit needs a > 0");
  const int n = op.dimension();
  const double N = critical_exponent(n);
  const Eigen::VectorXd F = compute_F_eta(op, eta);
  JgeqReport rep;
  rep.C = eta_energy(eta);
  rep.Cprime = 2.0 * eta_sup(eta) * std::pow(omega(n) / n, (N - 1.0) / N);
  rep.Csecond = a;
  rep.trials = trials + 1;
  rep.mass_bound = rep.Cprime * rep.Cprime / (4.0 * a) - rep.C;
  rep.min_slack = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd U = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(op.size()), static_cast<Eigen::Index>(trials + 1));
  for (std::size_t k = 1; k <= trials; ++k) U.col(static_cast<Eigen::Index>(k)) = random_radial_field(op, seed, k - 1);
  const FormBatch forms = form_batch_parallel(op.stiffness(), op.weights(), F, U, N);
  for (std::size_t k = 0; k <= trials; ++k) {
    const double X = std::pow(forms.power[k], 1.0 / N);
    const double J = rep.C + 2.0 * forms.linear[k] + forms.quadratic[k];
    const double rhs = rep.C - rep.Cprime * X + a * X * X;
    // relative slack keeps huge random amplitudes comparable
    const double slack = (J - rhs) / std::max(1.0, std::abs(J) + std::abs(rhs));
    if (slack < -1e-12) ++rep.violations;
    if (slack < rep.min_slack) {
      rep.min_slack = slack;
      rep.witness = k;
    }
  }
  return rep;
}

double test_function_lower_bound(const CutoffEta& eta) {
  const int n = eta.n;
  auto u0 = [](double r) { return 1.0 - smoothstep(2.0 * r - 0.5).v; };
  auto du0 = [](double r) { return -2.0 * smoothstep(2.0 * r - 0.5).d1; };
  const double flux = omega(n) * integrate_adaptive([&](double r) { return u0(r) * F_eta(eta, r) * std::pow(r, n - 1.0); },
                                                    0.5, 0.75, 1e-14);
  const double energy = omega(n) * integrate_adaptive([&](double r) { return du0(r) * du0(r) * std::pow(r, n - 1.0); },
                                                      0.25, 0.75, 1e-14);
  return flux * flux / energy - eta_energy(eta);
}

}  // namespace masslab
