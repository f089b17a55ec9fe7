#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "masslab/profile.hpp"

namespace masslab {

struct GridOptions {
  /// Target number of global nodes m.
  std::size_t resolution = 256;
  std::size_t min_degree = 8;
  std::size_t max_degree = 24;
  /// Extra element boundaries beyond the profile's own breaks (and 1/2, 1 when flat).
  std::vector<double> extra_breaks;
  /// Geometric refinement towards t = 0: elements [r q^{k+1}, r q^k] down to r q^levels.
  double pole_grading_radius = 0.0;
  double pole_grading_ratio = 0.5;
  std::size_t pole_grading_levels = 0;
};

struct Element {
  double a = 0.0;
  double b = 0.0;
  std::size_t degree = 0;
  std::size_t offset = 0;  // global index of the left node
};

/// Radial realization of L_g on a warped profile: C0 spectral elements on Legendre-Gauss-Lobatto
/// nodes, lumped volume weights w_i, and the symmetric stiffness K with
/// u^T K v ~ int (u' v' + c_n s u v) dv.
class DiscreteOperator {
 public:
  DiscreteOperator(const WarpedProfile& profile, const GridOptions& options);

  int dimension() const { return n_; }
  std::size_t size() const { return nodes_.size(); }
  double length() const { return nodes_.back(); }
  const std::vector<double>& nodes() const { return nodes_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const Eigen::VectorXd& potential() const { return potential_; }  // c_n s at nodes
  const Eigen::MatrixXd& stiffness() const { return K_; }
  const std::vector<Element>& elements() const { return elements_; }
  const WarpedProfile& profile() const { return profile_; }

  /// True when K is positive definite (equivalently lambda_1 > 0).
  bool positive() const { return llt_.has_value(); }

  /// Quadratic form u^T K v.
  double form(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const { return u.dot(K_ * v); }
  /// Sum_i w_i u_i.
  double integrate(const Eigen::VectorXd& u) const { return weights_.dot(u); }
  /// Nodal values of L u (W^{-1} K u); pole entries are NaN since their weight vanishes.
  Eigen::VectorXd apply(const Eigen::VectorXd& u) const;
  /// Solves L u = rhs in the weak sense K u = W rhs. Throws NotPositive when lambda_1 <= 0.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  /// Weighted residual ||K u - W rhs||_{W^-1} / ||rhs||_W.
  double residual(const Eigen::VectorXd& u, const Eigen::VectorXd& rhs) const;

  /// Ascending k smallest eigenvalues of K u = lambda W u.
  std::vector<double> smallest_eigenvalues(std::size_t k) const;
  /// Lowest eigenpair; the eigenvector is normalized positive with sum w u^2 = 1.
  std::pair<double, Eigen::VectorXd> ground_state() const;

  /// Samples a function at the nodes.
  template <typename F>
  Eigen::VectorXd sample(F&& fn) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(nodes_.size()));
    for (std::size_t i = 0; i < nodes_.size(); ++i) v[static_cast<Eigen::Index>(i)] = fn(nodes_[i]);
    return v;
  }

  /// Piecewise polynomial interpolant of nodal values at t.
  double interpolate(const Eigen::VectorXd& u, double t) const;
  /// Derivative of the interpolant at t (one-sided at element boundaries: left element wins).
  double derivative(const Eigen::VectorXd& u, double t) const;
  /// Per-element nodal derivatives of u (element k at slots offset + k ...), for repeated
  /// evaluation through interpolate_derivative.
  Eigen::VectorXd derivative_values(const Eigen::VectorXd& u) const;
  double interpolate_derivative(const Eigen::VectorXd& du, double t) const;

 private:
  std::size_t element_of(double t) const;

  WarpedProfile profile_;
  int n_;
  std::vector<Element> elements_;
  std::vector<std::vector<double>> ref_nodes_;  // per element, on [-1, 1]
  std::vector<std::vector<double>> ref_bary_;
  std::vector<double> nodes_;
  Eigen::VectorXd weights_;
  Eigen::VectorXd potential_;
  Eigen::MatrixXd K_;
  std::optional<Eigen::LLT<Eigen::MatrixXd>> llt_;
};

/// Element boundaries used for a profile: 0, T, profile breaks, the flat-ball marks 1/2 and 1,
/// and any extras.
std::vector<double> element_breaks(const WarpedProfile& profile, const GridOptions& options);

}  // namespace masslab
