#include "masslab/sem_operator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "masslab/error.hpp"

namespace masslab {

std::vector<double> element_breaks(const WarpedProfile& profile, const GridOptions& options) {
  const double T = profile.length();
  std::vector<double> b{0.0, T};
  b.insert(b.end(), profile.breaks().begin(), profile.breaks().end());
  if (profile.flat_radius() > 0.0) b.push_back(profile.flat_radius());
  if (profile.flat_radius() >= 1.0) {
    b.push_back(0.5);
    b.push_back(1.0);
  }
  b.insert(b.end(), options.extra_breaks.begin(), options.extra_breaks.end());
  if (options.pole_grading_levels > 0 && options.pole_grading_radius > 0.0) {
    double r = options.pole_grading_radius;
    for (std::size_t k = 0; k <= options.pole_grading_levels; ++k) {
      b.push_back(r);
      r *= options.pole_grading_ratio;
    }
  }
  std::vector<double> kept;
  for (double x : b) {
    if (x >= 0.0 && x <= T) kept.push_back(x);
  }
  std::sort(kept.begin(), kept.end());
  std::vector<double> out;
  // Relative merge tolerance is tied to the smallest requested feature, not to T.
  for (double x : kept) {
    if (out.empty() || x - out.back() > 1e-13 * std::max(x, 1e-300)) out.push_back(x);
  }
  if (out.back() != T) out.back() = T;
  return out;
}

DiscreteOperator::DiscreteOperator(const WarpedProfile& profile, const GridOptions& options)
    : profile_(profile), n_(profile.dimension()) {
  require(options.resolution >= 64, ErrorKind::InvalidArgument, "resolution must be >= 64");
  require(options.min_degree >= 2 && options.max_degree >= options.min_degree, ErrorKind::InvalidArgument,
          "invalid element degree bounds");
  const double T = profile.length();
  const auto breaks = element_breaks(profile, options);
  const double total = static_cast<double>(options.resolution - 1);

  std::size_t offset = 0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double a = breaks[k];
    const double b = breaks[k + 1];
    const double share = total * (b - a) / T;
    const std::size_t want = std::max(options.min_degree, static_cast<std::size_t>(std::lround(share)));
    const std::size_t parts = (want + options.max_degree - 1) / options.max_degree;
    const std::size_t deg = std::max(options.min_degree, (want + parts - 1) / parts);
    for (std::size_t j = 0; j < parts; ++j) {
      Element e;
      e.a = a + (b - a) * static_cast<double>(j) / static_cast<double>(parts);
      e.b = (j + 1 == parts) ? b : a + (b - a) * static_cast<double>(j + 1) / static_cast<double>(parts);
      e.degree = deg;
      e.offset = offset;
      offset += deg;
      elements_.push_back(e);
    }
  }
  const std::size_t m = offset + 1;
  nodes_.assign(m, 0.0);
  weights_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  potential_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  K_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));

  const double area = omega(n_);
  const double cn = conformal_coupling(n_);
  for (const auto& e : elements_) {
    const auto rule = gauss_lobatto(e.degree + 1);
    const auto Dref = differentiation_matrix(rule.nodes);
    ref_nodes_.push_back(rule.nodes);
    ref_bary_.push_back(barycentric_weights(rule.nodes));
    const std::size_t q = e.degree + 1;
    const double half = 0.5 * (e.b - e.a);
    std::vector<double> w(q);
    std::vector<double> pot(q);
    for (std::size_t j = 0; j < q; ++j) {
      double t = e.a + half * (rule.nodes[j] + 1.0);
      if (j == 0) t = e.a;
      if (j + 1 == q) t = e.b;
      nodes_[e.offset + j] = t;
      const bool pole = t <= 0.0 || (t >= T && profile.closure() == Closure::Pole);
      const double fw = pole ? 0.0 : profile.density(t);
      if (!pole && !(fw > 0.0)) {
        fail(ErrorKind::IllConditioned, "f^(n-1) underflows at t = " + std::to_string(t));
      }
      w[j] = rule.weights[j] * half * area * fw;
      pot[j] = cn * scalar_curvature(profile, t);
    }
    for (std::size_t j = 0; j < q; ++j) {
      const auto gj = static_cast<Eigen::Index>(e.offset + j);
      weights_[gj] += w[j];
      potential_[gj] = pot[j];
      K_(gj, gj) += w[j] * pot[j];
    }
    // Gradient part: sum_l w_l (D u)_l (D v)_l with D = Dref / half.
    for (std::size_t i = 0; i < q; ++i) {
      for (std::size_t j = i; j < q; ++j) {
        double s = 0.0;
        for (std::size_t l = 0; l < q; ++l) s += w[l] * Dref[l * q + i] * Dref[l * q + j];
        s /= half * half;
        const auto gi = static_cast<Eigen::Index>(e.offset + i);
        const auto gj = static_cast<Eigen::Index>(e.offset + j);
        K_(gi, gj) += s;
        if (i != j) K_(gj, gi) += s;
      }
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(K_);
  if (llt.info() == Eigen::Success) llt_.emplace(std::move(llt));
}

std::size_t DiscreteOperator::element_of(double t) const {
  auto it = std::lower_bound(elements_.begin(), elements_.end(), t,
                             [](const Element& e, double x) { return e.b < x; });
  if (it == elements_.end()) return elements_.size() - 1;
  return static_cast<std::size_t>(it - elements_.begin());
}

double DiscreteOperator::interpolate(const Eigen::VectorXd& u, double t) const {
  const std::size_t k = element_of(t);
  const auto& e = elements_[k];
  const double x = 2.0 * (t - e.a) / (e.b - e.a) - 1.0;
  return barycentric_eval(ref_nodes_[k], ref_bary_[k],
                          std::span<const double>(u.data() + e.offset, e.degree + 1), x);
}

Eigen::VectorXd DiscreteOperator::derivative_values(const Eigen::VectorXd& u) const {
  // element k owns slots [offset + k, offset + k + degree]
  Eigen::VectorXd out(static_cast<Eigen::Index>(nodes_.size() + elements_.size() - 1));
  for (std::size_t k = 0; k < elements_.size(); ++k) {
    const auto& e = elements_[k];
    const auto& xs = ref_nodes_[k];
    const auto& bw = ref_bary_[k];
    const double* v = u.data() + e.offset;
    const std::size_t q = e.degree + 1;
    for (std::size_t j = 0; j < q; ++j) {
      double d = 0.0;
      for (std::size_t l = 0; l < q; ++l) {
        if (l == j) continue;
        d += (bw[l] / bw[j]) * (v[l] - v[j]) / (xs[j] - xs[l]);
      }
      out[static_cast<Eigen::Index>(e.offset + k + j)] = d * 2.0 / (e.b - e.a);
    }
  }
  return out;
}

double DiscreteOperator::interpolate_derivative(const Eigen::VectorXd& du, double t) const {
  const std::size_t k = element_of(t);
  const auto& e = elements_[k];
  const double x = 2.0 * (t - e.a) / (e.b - e.a) - 1.0;
  return barycentric_eval(ref_nodes_[k], ref_bary_[k],
                          std::span<const double>(du.data() + e.offset + k, e.degree + 1), x);
}

double DiscreteOperator::derivative(const Eigen::VectorXd& u, double t) const {
  // Interpolating nodal derivatives; differentiating the barycentric quotient directly cancels
  // catastrophically next to a node.
  return interpolate_derivative(derivative_values(u), t);
}

Eigen::VectorXd DiscreteOperator::apply(const Eigen::VectorXd& u) const {
  Eigen::VectorXd r = K_ * u;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    r[i] = weights_[i] > 0.0 ? r[i] / weights_[i] : std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

Eigen::VectorXd DiscreteOperator::solve(const Eigen::VectorXd& rhs) const {
  if (!llt_) fail(ErrorKind::NotPositive, "conformal Laplacian is not positive (lambda_1 <= 0)");
  Eigen::VectorXd b = weights_.cwiseProduct(rhs);
  Eigen::VectorXd u = llt_->solve(b);
  // One step of iterative refinement keeps the residual at the 1e-13 level for stiff grids.
  u += llt_->solve(b - K_ * u);
  return u;
}

double DiscreteOperator::residual(const Eigen::VectorXd& u, const Eigen::VectorXd& rhs) const {
  const Eigen::VectorXd r = K_ * u - weights_.cwiseProduct(rhs);
  double num = 0.0;
  double den = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (weights_[i] > 0.0) {
      num += r[i] * r[i] / weights_[i];
      den += weights_[i] * rhs[i] * rhs[i];
    } else {
      num += r[i] * r[i];
    }
  }
  if (den == 0.0) return std::sqrt(num);
  return std::sqrt(num / den);
}

namespace {

struct Condensed {
  std::vector<Eigen::Index> interior;
  std::vector<Eigen::Index> poles;
  Eigen::MatrixXd Kpp_inv_Kpi;
  Eigen::MatrixXd A;  // W^{-1/2} (K_II - K_IP K_PP^{-1} K_PI) W^{-1/2}
  Eigen::VectorXd winv_sqrt;
};

Condensed condense(const Eigen::MatrixXd& K, const Eigen::VectorXd& w) {
  Condensed c;
  for (Eigen::Index i = 0; i < w.size(); ++i) (w[i] > 0.0 ? c.interior : c.poles).push_back(i);
  const auto ni = static_cast<Eigen::Index>(c.interior.size());
  const auto np = static_cast<Eigen::Index>(c.poles.size());
  Eigen::MatrixXd Kii(ni, ni), Kip(ni, np), Kpp(np, np);
  for (Eigen::Index a = 0; a < ni; ++a) {
    for (Eigen::Index b = 0; b < ni; ++b) Kii(a, b) = K(c.interior[a], c.interior[b]);
    for (Eigen::Index b = 0; b < np; ++b) Kip(a, b) = K(c.interior[a], c.poles[b]);
  }
  for (Eigen::Index a = 0; a < np; ++a) {
    for (Eigen::Index b = 0; b < np; ++b) Kpp(a, b) = K(c.poles[a], c.poles[b]);
  }
  c.Kpp_inv_Kpi = np > 0 ? Eigen::MatrixXd(Kpp.ldlt().solve(Kip.transpose())) : Eigen::MatrixXd(0, ni);
  Eigen::MatrixXd Kc = Kii;
  if (np > 0) Kc -= Kip * c.Kpp_inv_Kpi;
  c.winv_sqrt.resize(ni);
  for (Eigen::Index a = 0; a < ni; ++a) c.winv_sqrt[a] = 1.0 / std::sqrt(w[c.interior[a]]);
  c.A = c.winv_sqrt.asDiagonal() * Kc * c.winv_sqrt.asDiagonal();
  c.A = 0.5 * (c.A + c.A.transpose());
  return c;
}

}  // namespace

std::vector<double> DiscreteOperator::smallest_eigenvalues(std::size_t k) const {
  require(k >= 1 && k <= size() / 4, ErrorKind::InvalidArgument, "eigenvalue count must lie in [1, m/4]");
  const auto c = condense(K_, weights_);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.A, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) fail(ErrorKind::NonConvergence, "dense symmetric eigensolver failed");
  std::vector<double> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = es.eigenvalues()[static_cast<Eigen::Index>(i)];
  return out;
}

std::pair<double, Eigen::VectorXd> DiscreteOperator::ground_state() const {
  const auto c = condense(K_, weights_);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.A);
  if (es.info() != Eigen::Success) fail(ErrorKind::NonConvergence, "dense symmetric eigensolver failed");
  const Eigen::VectorXd y = es.eigenvectors().col(0);
  const Eigen::VectorXd ui = c.winv_sqrt.cwiseProduct(y);
  Eigen::VectorXd u(static_cast<Eigen::Index>(size()));
  for (std::size_t a = 0; a < c.interior.size(); ++a) u[c.interior[a]] = ui[static_cast<Eigen::Index>(a)];
  if (!c.poles.empty()) {
    const Eigen::VectorXd up = -c.Kpp_inv_Kpi * ui;
    for (std::size_t a = 0; a < c.poles.size(); ++a) u[c.poles[a]] = up[static_cast<Eigen::Index>(a)];
  }
  if (u.sum() < 0.0) u = -u;
  u /= std::sqrt(weights_.dot(u.cwiseProduct(u)));
  return {es.eigenvalues()[0], u};
}

}  // namespace masslab
