#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <json.hpp>

#include "masslab/kernels.hpp"
#include "masslab/mass.hpp"
#include "masslab/profile.hpp"

namespace masslab {

struct MeshCounts {
  std::size_t vertices = 0;
  std::size_t edges = 0;
  std::size_t faces = 0;
  std::size_t tets = 0;
  long euler() const {
    return static_cast<long>(vertices) - static_cast<long>(edges) + static_cast<long>(faces) -
           static_cast<long>(tets);
  }
};

/// Triangulated unit S^3 in R^4. Vertex 0 is +e0 (the pole p), vertex 1 is -e0. Tets are
/// oriented so that det(x0, x1, x2, x3) > 0.
struct SphereMesh {
  int level = 0;
  std::vector<Eigen::Vector4d> vertices;
  std::vector<Tet> tets;

  MeshCounts counts() const;
  /// Every interior face shared by two tets inducing opposite orientations.
  bool orientable() const;
  /// Smallest number of tets around an edge.
  std::size_t min_edge_valence() const;
};

/// Level 0 is the boundary of the 16-cell; each level splits every tet into 8 (red refinement,
/// shortest octahedron diagonal) and projects the new vertices back to the sphere.
SphereMesh build_sphere_mesh(int level);

nlohmann::json mesh_to_json(const SphereMesh& mesh);
SphereMesh mesh_from_json(const nlohmann::json& j);

/// A metric on S^3 given pointwise in ambient terms: g(v, w) = v^T tensor(x) w for v, w tangent
/// at x, plus its scalar curvature. `chart_radius` is the distance from the pole in the flat chart
/// (meaningful where it is below flat_radius). With `antipodal` the metric is invariant under
/// x -> -x and stands for its quotient RP^3; sources are then placed at both p and -p.
struct FemMetric {
  std::string id;
  std::function<Eigen::Matrix4d(const Eigen::Vector4d&)> tensor;
  std::function<double(const Eigen::Vector4d&)> scalar_curvature;
  std::function<double(const Eigen::Vector4d&)> chart_radius;
  double flat_radius = 0.0;
  /// Polar angle of the unit chart sphere (0 when there is no flat chart).
  double chart_angle = 0.0;
  bool antipodal = false;
};

FemMetric round_fem_metric();

/// Pullback of a warped profile about p: distance t = t(theta) from the round polar angle, with
/// t(theta) = (L/pi)(theta + k1 sin 2 theta + k2 sin 4 theta), L = T for a pole closure and 2T
/// for a cross-cap (the double cover). When flat_radius >= 1 the coefficients place the chart
/// unit ball at theta <= chart_angle with t'(0) = 1/chart_angle. InvalidArgument when the map is
/// not monotone.
FemMetric warped_fem_metric(const WarpedProfile& profile, double chart_angle = 0.93);

/// The metric b g on the same mesh: tensor times b, s / b, chart radius times sqrt(b).
FemMetric scaled_fem_metric(const FemMetric& metric, double b);

/// Mesh plus the metric data: Gram matrices at the 4-point tet quadrature nodes, scalar
/// curvature, and the assembled P1 system.
struct SimplicialManifold {
  SphereMesh mesh;
  FemMetric metric;
  std::vector<Eigen::Matrix3d> grams;  // tet-major, 4 per tet
  Eigen::VectorXd scalar;     // s at the vertices
  Eigen::VectorXd potential;  // lumped int c_3 s phi_i dv
  Eigen::VectorXd chart_radius;
  Eigen::VectorXd chart_radius_antipode;  // distance from -p (antipodal metrics only)
  double flat_radius = 0.0;
  bool antipodal = false;
  P1System p1;

  Eigen::VectorXd lumped() const { return p1.lumped; }
  double volume() const { return p1.volume; }
};

/// Throws NonSPDGram naming the first bad tet.
SimplicialManifold attach_metric(const SphereMesh& mesh, const FemMetric& metric, bool parallel = true);

/// K = P1 stiffness + diag(potential) (lumped c_3 s term); W lumped volumes; M consistent mass.
struct FemOperator {
  Eigen::SparseMatrix<double> K;
  Eigen::VectorXd W;
  Eigen::SparseMatrix<double> M;
};

FemOperator fem_operator(const SimplicialManifold& mfd);

/// Operator of phi^4 g from that of g via L_{phi^4 g} u = phi^{-5} L_g(phi u): K -> Phi K Phi,
/// W -> phi^6 W, M -> Phi^3 M Phi^3.
FemOperator conformal_fem_operator(const FemOperator& background, const Eigen::VectorXd& phi);

/// Conformal factor of the Moebius map of S^3 with parameter |b| < 1, raised to the power that
/// makes phi^4 g_round isometric to g_round.
double moebius_phi(const Eigen::Vector4d& b, const Eigen::Vector4d& x);

/// max |K - K^T| relative to max |K|.
double symmetry_defect(const Eigen::SparseMatrix<double>& K);

double fem_quadratic_form(const FemOperator& op, const Eigen::VectorXd& u);

/// Lowest eigenvalue of K u = lambda W u by shifted inverse iteration with a sparse LDL^T.
double fem_lambda1(const FemOperator& op);

/// Vertices with chart radius < 1 around p.
std::size_t chart_vertex_count(const SimplicialManifold& mfd);

/// Load vector b_i = int F_eta phi_i dv (plus the source at -p for antipodal metrics), by a
/// 64-subtet quadrature on every tet that reaches the chart annulus.
Eigen::VectorXd fem_source(const SimplicialManifold& mfd, const CutoffEta& eta);

/// Solves K beta = -b (F at both p and -p for antipodal metrics) and returns beta(p).
/// NotPositive when K is not positive definite; ChartTooCoarse below `min_chart_vertices`.
double fem_mass_value(const SimplicialManifold& mfd, const CutoffEta& eta, std::size_t min_chart_vertices = 200);

struct FemMassResult {
  int level = 0;
  double m = 0.0;
  double m_coarse = 0.0;       // level - 1, without the chart-size gate
  double error_estimate = 0.0; // |m - m_coarse|
  double lambda1 = 0.0;
  std::size_t chart_vertices = 0;
  std::size_t vertices = 0;
};

/// Mass at `level` (>= 1) with the a posteriori estimate from level - 1.
FemMassResult fem_mass(const FemMetric& metric, int level, const CutoffEta& eta);

}  // namespace masslab
