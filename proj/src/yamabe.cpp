#include "masslab/yamabe.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <exception>
#include <limits>
#include <sstream>

#include "masslab/constants.hpp"
#include "masslab/error.hpp"

namespace masslab {

namespace {

double power_sum(const DiscreteOperator& op, const Eigen::VectorXd& u, double N) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) s += op.weights()[i] * std::pow(std::abs(u[i]), N);
  return s;
}

Eigen::VectorXd normalized(const DiscreteOperator& op, const Eigen::VectorXd& u, double N) {
  const double s = power_sum(op, u, N);
  require(s > 0.0 && std::isfinite(s), ErrorKind::ZeroFunction, "iterate vanished");
  return u / std::pow(s, 1.0 / N);
}

Eigen::VectorXd signed_power(const Eigen::VectorXd& u, double p) {
  return u.unaryExpr([p](double x) { return std::copysign(std::pow(std::abs(x), p), x); });
}

bool stalled(const std::vector<double>& h, const YamabeOptions& o) {
  if (h.size() <= o.window) return false;
  const double now = h.back();
  const double then = h[h.size() - 1 - o.window];
  return std::abs(then - now) <= o.tolerance * std::max(std::abs(now), 1e-300);
}

/// Constrained Newton step for Q on the sphere sum w |u|^N = 1, with a Levenberg shift `mu` (in
/// units of W). Returns nullopt when the bordered system is singular.
std::optional<Eigen::VectorXd> newton_candidate(const DiscreteOperator& op, const Eigen::VectorXd& u, double Q,
                                                double N, double mu) {
  const Eigen::Index m = u.size();
  const Eigen::VectorXd& w = op.weights();
  const Eigen::VectorXd g = w.cwiseProduct(signed_power(u, N - 1.0));
  const Eigen::VectorXd Ku = op.stiffness() * u;
  const Eigen::VectorXd grad = 2.0 * (Ku - Q * g);
  Eigen::MatrixXd H = 2.0 * op.stiffness();
  H -= 4.0 * (Ku * g.transpose() + g * Ku.transpose());
  H.diagonal() -= 2.0 * (N - 1.0) * Q * w.cwiseProduct(u.cwiseAbs().array().pow(N - 2.0).matrix());
  H += 2.0 * (N + 2.0) * Q * g * g.transpose();
  H.diagonal() += mu * w;
  Eigen::MatrixXd B(m + 1, m + 1);
  B.topLeftCorner(m, m) = H;
  B.topRightCorner(m, 1) = g;
  B.bottomLeftCorner(1, m) = g.transpose();
  B(m, m) = 0.0;
  Eigen::VectorXd rhs(m + 1);
  rhs.head(m) = -grad;
  rhs[m] = 0.0;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
  const Eigen::VectorXd d = lu.solve(rhs).head(m);
  if (!d.allFinite()) return std::nullopt;
  const Eigen::VectorXd v = u + d;
  const double s = power_sum(op, v, N);
  if (!(s > 0.0) || !std::isfinite(s)) return std::nullopt;
  return v / std::pow(s, 1.0 / N);
}

}  // namespace

double yamabe_quotient(const DiscreteOperator& op, const Eigen::VectorXd& u) {
  const double N = critical_exponent(op.dimension());
  const double s = power_sum(op, u, N);
  require(s > 0.0, ErrorKind::ZeroFunction, "Yamabe quotient of the zero function");
  return op.form(u, u) / std::pow(s, 2.0 / N);
}

YamabeResult minimize_yamabe(const DiscreteOperator& op, const YamabeOptions& options) {
  const double N = critical_exponent(op.dimension());
  auto [lambda1, phi] = op.ground_state();
  YamabeResult r;
  r.lambda1 = lambda1;
  Eigen::VectorXd u = normalized(op, phi, N);
  double Q = op.form(u, u);
  r.history.push_back(Q);

  std::optional<Eigen::LLT<Eigen::MatrixXd>> precond;
  if (!op.positive()) {
    const double mu = 2.0 * std::abs(lambda1) + 1.0;
    Eigen::MatrixXd P = op.stiffness();
    P.diagonal() += mu * op.weights();
    precond.emplace(P);
    require(precond->info() == Eigen::Success, ErrorKind::IllConditioned, "shifted operator not positive");
  }

  double step = 1.0;
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    Eigen::VectorXd candidate;
    if (!precond) {
      candidate = normalized(op, op.solve(signed_power(u, N - 1.0)), N);
    } else {
      const Eigen::VectorXd residual = op.stiffness() * u - Q * op.weights().cwiseProduct(signed_power(u, N - 1.0));
      candidate = normalized(op, u - step * precond->solve(residual), N);
    }
    double Qc = op.form(candidate, candidate);
    // Newton handles the nearly flat directions (conformal motions of near-round metrics) that
    // stall the fixed point; keep whichever candidate is lower
    for (double mu : {0.0, 1.0, 100.0}) {
      const auto nc = newton_candidate(op, u, Q, N, mu * std::max(1.0, std::abs(Q)));
      if (!nc) continue;
      const double Qn = op.form(*nc, *nc);
      if (Qn < std::min(Q, Qc) || (Qn <= Q && !(Qc <= Q))) {
        candidate = *nc;
        Qc = Qn;
        break;
      }
    }
    if (!(Qc <= Q)) {
      // backtrack along the segment towards the candidate
      bool found = false;
      const Eigen::VectorXd dir = candidate - u;
      double tau = 0.5;
      for (int k = 0; k < 40 && !found; ++k, tau *= 0.5) {
        const Eigen::VectorXd w = normalized(op, u + tau * dir, N);
        const double Qw = op.form(w, w);
        if (Qw <= Q) {
          candidate = w;
          Qc = Qw;
          found = true;
        }
      }
      if (precond) step *= 0.5;
      if (!found) {
        // no descent left at this resolution: stationary
        r.converged = true;
        r.iterations = it;
        break;
      }
    } else if (precond) {
      step = std::min(step * 1.5, 1e6);
    }
    u = candidate;
    Q = Qc;
    r.history.push_back(Q);
    r.iterations = it + 1;
    if (stalled(r.history, options)) {
      r.converged = true;
      break;
    }
  }
  if (u.sum() < 0.0) u = -u;
  r.minimizer = u;
  r.Y_estimate = yamabe_quotient(op, u);
  if (!r.converged) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "Yamabe minimization not converged after " << r.iterations << " iterations; best Q = " << r.Y_estimate;
    fail(ErrorKind::MaxIterations, msg.str());
  }
  return r;
}

double sigma_sphere(int n) {
  require(n >= 3, ErrorKind::InvalidArgument, "sigma_sphere needs n >= 3");
  return n * (n - 2.0) * std::pow(F_n_quadrature(n), 2.0 / n);
}

double sigma_sphere_closed_form(int n) {
  return conformal_coupling(n) * n * (n - 1.0) * std::pow(sphere_volume(n), 2.0 / n);
}

BlendTable blend_convergence_experiment(const WarpedProfile& g, const WarpedProfile& h,
                                        const std::vector<double>& epsilons, const GridOptions& grid,
                                        const YamabeOptions& options) {
  require(g.dimension() == h.dimension(), ErrorKind::InvalidArgument, "dimension mismatch");
  BlendTable table;
  table.Y_reference = minimize_yamabe(DiscreteOperator(g, grid), options).Y_estimate;
  table.rows.resize(epsilons.size());
  std::vector<std::exception_ptr> errors(epsilons.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    try {
      const WarpedProfile ge = blend_profiles(g, h, BlendSpec{epsilons[i]});
      const double Y = minimize_yamabe(DiscreteOperator(ge, grid), options).Y_estimate;
      table.rows[i] = {epsilons[i], Y, std::abs(Y - table.Y_reference)};
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<BlendRow> sorted = table.rows;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.epsilon > b.epsilon; });
  table.tail_decreasing = sorted.size() >= 2;
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (!(sorted[i].deviation < sorted[i - 1].deviation)) table.tail_decreasing = false;

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t k = 0;
  for (const auto& row : table.rows) {
    table.max_deviation = std::max(table.max_deviation, row.deviation);
    if (row.deviation <= 0.0) continue;
    const double x = std::log(row.epsilon);
    const double y = std::log(row.deviation);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++k;
  }
  if (k >= 2) {
    const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    table.fitted_rate = slope;
    table.fitted_constant = std::exp((sy - slope * sx) / k);
  } else {
    table.fitted_rate = std::numeric_limits<double>::quiet_NaN();
  }
  return table;
}

}  // namespace masslab
