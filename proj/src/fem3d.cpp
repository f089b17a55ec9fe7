#include "masslab/fem3d.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include <Eigen/SparseCholesky>

#include "masslab/error.hpp"

namespace masslab {

namespace {

using Edge = std::pair<int, int>;

Edge edge_key(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

double orientation(const std::vector<Eigen::Vector4d>& v, const Tet& t) {
  Eigen::Matrix4d m;
  for (int i = 0; i < 4; ++i) m.col(i) = v[t[i]];
  return m.determinant();
}

void orient(const std::vector<Eigen::Vector4d>& v, Tet& t) {
  if (orientation(v, t) < 0.0) std::swap(t[2], t[3]);
}

SphereMesh refine(const SphereMesh& coarse) {
  SphereMesh fine;
  fine.level = coarse.level + 1;
  fine.vertices = coarse.vertices;
  std::map<Edge, int> mid;
  auto midpoint = [&](int a, int b) {
    const Edge e = edge_key(a, b);
    if (auto it = mid.find(e); it != mid.end()) return it->second;
    fine.vertices.push_back((fine.vertices[a] + fine.vertices[b]).normalized());
    const int id = static_cast<int>(fine.vertices.size()) - 1;
    mid.emplace(e, id);
    return id;
  };
  // midpoints are created tet by tet in edge order, which fixes the vertex numbering
  for (const auto& t : coarse.tets) {
    const int m01 = midpoint(t[0], t[1]), m02 = midpoint(t[0], t[2]), m03 = midpoint(t[0], t[3]);
    const int m12 = midpoint(t[1], t[2]), m13 = midpoint(t[1], t[3]), m23 = midpoint(t[2], t[3]);
    std::vector<Tet> kids{{t[0], m01, m02, m03}, {m01, t[1], m12, m13}, {m02, m12, t[2], m23}, {m03, m13, m23, t[3]}};
    // octahedron: opposite pairs (m01, m23), (m02, m13), (m03, m12); split along the shortest
    const std::array<Edge, 3> pairs{Edge{m01, m23}, Edge{m02, m13}, Edge{m03, m12}};
    std::size_t best = 0;
    double len = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < 3; ++i) {
      const double l = (fine.vertices[pairs[i].first] - fine.vertices[pairs[i].second]).norm();
      if (l < len - 1e-14) {
        len = l;
        best = i;
      }
    }
    const Edge d = pairs[best];
    const Edge c = pairs[(best + 1) % 3];
    const Edge e = pairs[(best + 2) % 3];
    const std::array<int, 4> ring{c.first, e.first, c.second, e.second};
    for (int i = 0; i < 4; ++i) kids.push_back({d.first, d.second, ring[i], ring[(i + 1) % 4]});
    for (auto& k : kids) {
      orient(fine.vertices, k);
      fine.tets.push_back(k);
    }
  }
  return fine;
}

// t(theta) = (L/pi)(theta + k1 sin 2 theta + k2 sin 4 theta)
struct PolarMap {
  double scale = 1.0;
  double k1 = 0.0;
  double k2 = 0.0;

  double t(double th) const { return scale * (th + k1 * std::sin(2 * th) + k2 * std::sin(4 * th)); }
  double dt(double th) const { return scale * (1 + 2 * k1 * std::cos(2 * th) + 4 * k2 * std::cos(4 * th)); }
};

// 4-point degree-2 rule on the reference tet
constexpr double kQa = 0.5854101966249685;
constexpr double kQb = 0.1381966011250105;

// Barycentric quadrature points: the 4-point rule on each subtet of `rounds` red refinements of
// the reference tet; all weights equal.
std::vector<Eigen::Vector4d> subtet_points(int rounds) {
  std::vector<std::array<Eigen::Vector4d, 4>> sub{{Eigen::Vector4d::Unit(0), Eigen::Vector4d::Unit(1),
                                                   Eigen::Vector4d::Unit(2), Eigen::Vector4d::Unit(3)}};
  for (int round = 0; round < rounds; ++round) {
    std::vector<std::array<Eigen::Vector4d, 4>> next;
    for (const auto& c : sub) {
      auto m = [&](int i, int j) { return Eigen::Vector4d(0.5 * (c[i] + c[j])); };
      next.push_back({c[0], m(0, 1), m(0, 2), m(0, 3)});
      next.push_back({m(0, 1), c[1], m(1, 2), m(1, 3)});
      next.push_back({m(0, 2), m(1, 2), c[2], m(2, 3)});
      next.push_back({m(0, 3), m(1, 3), m(2, 3), c[3]});
      next.push_back({m(0, 1), m(0, 2), m(0, 3), m(1, 3)});
      next.push_back({m(0, 1), m(0, 2), m(1, 2), m(1, 3)});
      next.push_back({m(0, 2), m(0, 3), m(1, 3), m(2, 3)});
      next.push_back({m(0, 2), m(1, 2), m(1, 3), m(2, 3)});
    }
    sub = std::move(next);
  }
  std::vector<Eigen::Vector4d> points;
  for (const auto& c : sub)
    for (int q = 0; q < 4; ++q) {
      Eigen::Vector4d b = Eigen::Vector4d::Zero();
      for (int i = 0; i < 4; ++i) b += (i == q ? kQa : kQb) * c[i];
      points.push_back(b);
    }
  return points;
}

}  // namespace

MeshCounts SphereMesh::counts() const {
  std::set<Edge> edges;
  std::set<std::array<int, 3>> faces;
  for (const auto& t : tets) {
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) edges.insert(edge_key(t[i], t[j]));
    for (int skip = 0; skip < 4; ++skip) {
      std::array<int, 3> f{};
      int k = 0;
      for (int i = 0; i < 4; ++i)
        if (i != skip) f[k++] = t[i];
      std::sort(f.begin(), f.end());
      faces.insert(f);
    }
  }
  return {vertices.size(), edges.size(), faces.size(), tets.size()};
}

bool SphereMesh::orientable() const {
  // the face opposite vertex i of (0,1,2,3) inherits orientation sign (-1)^i
  std::map<std::array<int, 3>, std::vector<int>> seen;
  for (const auto& t : tets) {
    for (int skip = 0; skip < 4; ++skip) {
      std::array<int, 3> f{};
      int k = 0;
      for (int i = 0; i < 4; ++i)
        if (i != skip) f[k++] = t[i];
      // parity of the sorting permutation
      int parity = skip % 2;
      for (int a = 0; a < 3; ++a)
        for (int b = a + 1; b < 3; ++b)
          if (f[a] > f[b]) parity ^= 1;
      std::sort(f.begin(), f.end());
      seen[f].push_back(parity);
    }
  }
  for (const auto& [f, p] : seen)
    if (p.size() != 2 || p[0] == p[1]) return false;
  return true;
}

std::size_t SphereMesh::min_edge_valence() const {
  std::map<Edge, std::size_t> count;
  for (const auto& t : tets)
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) ++count[edge_key(t[i], t[j])];
  std::size_t m = std::numeric_limits<std::size_t>::max();
  for (const auto& [e, c] : count) m = std::min(m, c);
  return m;
}

SphereMesh build_sphere_mesh(int level) {
  require(level >= 0 && level <= 4, ErrorKind::InvalidArgument, "mesh level must be in 0..4");
  SphereMesh mesh;
  for (int i = 0; i < 4; ++i) {
    for (double s : {1.0, -1.0}) {
      Eigen::Vector4d v = Eigen::Vector4d::Zero();
      v[i] = s;
      mesh.vertices.push_back(v);
    }
  }
  // one tet per sign pattern: vertex 2i is +e_i, 2i + 1 is -e_i
  for (int mask = 0; mask < 16; ++mask) {
    Tet t{};
    for (int i = 0; i < 4; ++i) t[i] = 2 * i + ((mask >> i) & 1);
    orient(mesh.vertices, t);
    mesh.tets.push_back(t);
  }
  for (int l = 0; l < level; ++l) mesh = refine(mesh);
  return mesh;
}

nlohmann::json mesh_to_json(const SphereMesh& mesh) {
  nlohmann::json v = nlohmann::json::array();
  for (const auto& x : mesh.vertices) v.push_back({x[0], x[1], x[2], x[3]});
  nlohmann::json t = nlohmann::json::array();
  for (const auto& k : mesh.tets) t.push_back({k[0], k[1], k[2], k[3]});
  return {{"level", mesh.level}, {"vertices", v}, {"tets", t}};
}

SphereMesh mesh_from_json(const nlohmann::json& j) {
  SphereMesh mesh;
  try {
    mesh.level = j.at("level").get<int>();
    for (const auto& v : j.at("vertices")) {
      require(v.size() == 4, ErrorKind::InvalidArgument, "vertex needs 4 coordinates");
      mesh.vertices.emplace_back(v[0].get<double>(), v[1].get<double>(), v[2].get<double>(), v[3].get<double>());
    }
    for (const auto& t : j.at("tets")) {
      require(t.size() == 4, ErrorKind::InvalidArgument, "tet needs 4 indices");
      Tet k{t[0].get<int>(), t[1].get<int>(), t[2].get<int>(), t[3].get<int>()};
      for (int i : k)
        require(i >= 0 && static_cast<std::size_t>(i) < mesh.vertices.size(), ErrorKind::InvalidArgument,
                "tet index out of range");
      mesh.tets.push_back(k);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("malformed mesh JSON: ") + e.what());
  }
  return mesh;
}

FemMetric round_fem_metric() {
  FemMetric m;
  m.id = "round";
  m.tensor = [](const Eigen::Vector4d&) { return Eigen::Matrix4d::Identity().eval(); };
  m.scalar_curvature = [](const Eigen::Vector4d&) { return 6.0; };
  m.chart_radius = [](const Eigen::Vector4d& x) { return std::acos(std::clamp(x[0], -1.0, 1.0)); };
  return m;
}

FemMetric warped_fem_metric(const WarpedProfile& profile, double chart_angle) {
  require(profile.dimension() == 3, ErrorKind::InvalidArgument, "fem3d handles n = 3");
  require(!profile.squashed(), ErrorKind::InvalidArgument, "fem3d pullback needs an unsquashed profile");
  const double T = profile.length();
  const bool cross = profile.closure() == Closure::CrossCap;
  const double L = cross ? 2.0 * T : T;
  PolarMap map{L / std::numbers::pi, 0.0, 0.0};
  if (profile.flat_radius() >= 1.0) {
    require(chart_angle > 0.0 && chart_angle < 0.5 * std::numbers::pi, ErrorKind::InvalidArgument,
            "chart angle must lie in (0, pi/2)");
    // t'(0) = 1/chart_angle and t(chart_angle) = 1
    const double s = std::numbers::pi / L;
    Eigen::Matrix2d A;
    A << 2.0, 4.0, std::sin(2 * chart_angle), std::sin(4 * chart_angle);
    const Eigen::Vector2d rhs(s / chart_angle - 1.0, s - chart_angle);
    const Eigen::Vector2d k = A.partialPivLu().solve(rhs);
    map.k1 = k[0];
    map.k2 = k[1];
  }
  for (int i = 0; i <= 2000; ++i) {
    const double th = std::numbers::pi * i / 2000.0;
    require(map.dt(th) > 0.0, ErrorKind::InvalidArgument, "polar map is not monotone for this profile");
  }
  const auto f_of = [profile, T, cross](double t) {
    if (cross && t > T) return profile.f(2.0 * T - t);
    return profile.f(std::min(t, T));
  };
  const auto s_of = [profile, T, cross](double t) {
    if (cross && t > T) return scalar_curvature(profile, 2.0 * T - t);
    return scalar_curvature(profile, std::min(t, T));
  };
  FemMetric m;
  m.id = "warped";
  m.flat_radius = profile.flat_radius();
  m.antipodal = cross;
  if (profile.flat_radius() >= 1.0) m.chart_angle = chart_angle;
  m.tensor = [map, f_of](const Eigen::Vector4d& x) {
    const double c = std::clamp(x[0], -1.0, 1.0);
    const double th = std::acos(c);
    const double sn = std::sqrt(std::max(0.0, 1.0 - c * c));
    const double A = map.dt(th) * map.dt(th);
    Eigen::Matrix4d G = Eigen::Matrix4d::Identity();
    if (sn < 1e-12) return (A * G).eval();
    const double f = f_of(map.t(th));
    const double B = f * f / (sn * sn);
    G *= B;
    // the radial covector is e0 restricted to the tangent space, with length sin(theta)
    G(0, 0) += (A - B) / (sn * sn);
    return G;
  };
  m.scalar_curvature = [map, s_of](const Eigen::Vector4d& x) { return s_of(map.t(std::acos(std::clamp(x[0], -1.0, 1.0)))); };
  m.chart_radius = [map](const Eigen::Vector4d& x) { return map.t(std::acos(std::clamp(x[0], -1.0, 1.0))); };
  return m;
}

FemMetric scaled_fem_metric(const FemMetric& metric, double b) {
  require(b >= 1.0, ErrorKind::InvalidArgument, "scale factor must be >= 1");
  const double sb = std::sqrt(b);
  FemMetric m = metric;
  m.id = metric.id + "*" + std::to_string(b);
  m.tensor = [t = metric.tensor, b](const Eigen::Vector4d& x) { return Eigen::Matrix4d(b * t(x)); };
  m.scalar_curvature = [s = metric.scalar_curvature, b](const Eigen::Vector4d& x) { return s(x) / b; };
  m.chart_radius = [r = metric.chart_radius, sb](const Eigen::Vector4d& x) { return sb * r(x); };
  m.flat_radius = sb * metric.flat_radius;
  // the unit chart ball only shrinks in the mesh, so chart_angle stays an upper bound
  return m;
}

SimplicialManifold attach_metric(const SphereMesh& mesh, const FemMetric& metric, bool parallel) {
  SimplicialManifold out;
  out.mesh = mesh;
  out.metric = metric;
  out.flat_radius = metric.flat_radius;
  out.antipodal = metric.antipodal;
  const std::size_t nt = mesh.tets.size();
  out.grams.resize(4 * nt);
  // the potential c_3 s is integrated against each hat function on 8 subtets: s varies fast in
  // flattening windows, and nodal sampling of it is not accurate enough on coarse levels
  const std::vector<Eigen::Vector4d> fine_points = subtet_points(1);
  std::vector<std::array<double, 4>> pot(nt, {0.0, 0.0, 0.0, 0.0});
  const double cn = conformal_coupling(3);
  const auto fill = [&](std::size_t k) {
    const auto& t = mesh.tets[k];
    Eigen::Matrix<double, 4, 3> E;
    for (int i = 0; i < 3; ++i) E.col(i) = mesh.vertices[t[i + 1]] - mesh.vertices[t[0]];
    const auto at = [&](const Eigen::Vector4d& b, Eigen::Vector4d& x) {
      Eigen::Vector4d y = Eigen::Vector4d::Zero();
      for (int i = 0; i < 4; ++i) y += b[i] * mesh.vertices[t[i]];
      const double r = y.norm();
      x = y / r;
      const Eigen::Matrix<double, 4, 3> J = (Eigen::Matrix4d::Identity() - x * x.transpose()) * E / r;
      return Eigen::Matrix3d(J.transpose() * metric.tensor(x) * J);
    };
    Eigen::Vector4d x;
    for (int q = 0; q < 4; ++q) {
      Eigen::Vector4d b = Eigen::Vector4d::Constant(kQb);
      b[q] = kQa;
      out.grams[4 * k + q] = at(b, x);
    }
    const double w = 1.0 / static_cast<double>(fine_points.size());
    for (const auto& b : fine_points) {
      const Eigen::Matrix3d G = at(b, x);
      const double vol = std::sqrt(std::max(0.0, G.determinant())) / 6.0;
      const double sv = cn * metric.scalar_curvature(x);
      for (int i = 0; i < 4; ++i) pot[k][i] += w * vol * sv * b[i];
    }
  };
  if (parallel) {
    const auto count = static_cast<std::ptrdiff_t>(nt);
#pragma omp parallel for schedule(static) num_threads(kernel_threads())
    for (std::ptrdiff_t k = 0; k < count; ++k) fill(static_cast<std::size_t>(k));
  } else {
    for (std::size_t k = 0; k < nt; ++k) fill(k);
  }
  const std::vector<double> weights(4, 0.25);
  out.p1 = parallel ? assemble_p1_parallel(mesh.vertices.size(), mesh.tets, out.grams, weights)
                    : assemble_p1_serial(mesh.vertices.size(), mesh.tets, out.grams, weights);
  const auto nv = static_cast<Eigen::Index>(mesh.vertices.size());
  out.potential = Eigen::VectorXd::Zero(nv);
  for (std::size_t k = 0; k < nt; ++k)
    for (int i = 0; i < 4; ++i) out.potential[mesh.tets[k][i]] += pot[k][i];
  out.scalar.resize(nv);
  out.chart_radius.resize(nv);
  out.chart_radius_antipode.resize(metric.antipodal ? nv : 0);
  for (Eigen::Index i = 0; i < nv; ++i) {
    const auto& x = mesh.vertices[static_cast<std::size_t>(i)];
    out.scalar[i] = metric.scalar_curvature(x);
    out.chart_radius[i] = metric.chart_radius(x);
    if (metric.antipodal) out.chart_radius_antipode[i] = metric.chart_radius(-x);
  }
  return out;
}

FemOperator fem_operator(const SimplicialManifold& mfd) {
  FemOperator op;
  op.W = mfd.p1.lumped;
  op.M = mfd.p1.consistent;
  const Eigen::VectorXd& pot = mfd.potential;
  Eigen::SparseMatrix<double> D(op.W.size(), op.W.size());
  std::vector<Eigen::Triplet<double>> diag;
  for (Eigen::Index i = 0; i < pot.size(); ++i) diag.emplace_back(i, i, pot[i]);
  D.setFromTriplets(diag.begin(), diag.end());
  op.K = mfd.p1.stiffness + D;
  return op;
}

FemOperator conformal_fem_operator(const FemOperator& background, const Eigen::VectorXd& phi) {
  require(phi.size() == background.W.size(), ErrorKind::InvalidArgument, "conformal factor size mismatch");
  require((phi.array() > 0.0).all(), ErrorKind::InvalidArgument, "conformal factor must be positive");
  FemOperator op;
  const Eigen::VectorXd phi3 = phi.array().cube().matrix();
  op.K = phi.asDiagonal() * background.K * phi.asDiagonal();
  op.W = background.W.cwiseProduct(phi3.cwiseProduct(phi3));
  op.M = phi3.asDiagonal() * background.M * phi3.asDiagonal();
  return op;
}

double moebius_phi(const Eigen::Vector4d& b, const Eigen::Vector4d& x) {
  require(b.norm() < 1.0, ErrorKind::InvalidArgument, "Moebius parameter needs |b| < 1");
  return std::sqrt(std::sqrt(1.0 - b.squaredNorm()) / (1.0 + b.dot(x)));
}

double symmetry_defect(const Eigen::SparseMatrix<double>& K) {
  const Eigen::SparseMatrix<double> Kt = K.transpose();
  const Eigen::SparseMatrix<double> D = K - Kt;
  double dmax = 0.0;
  double kmax = 0.0;
  for (int k = 0; k < D.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(D, k); it; ++it) dmax = std::max(dmax, std::abs(it.value()));
  for (int k = 0; k < K.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(K, k); it; ++it) kmax = std::max(kmax, std::abs(it.value()));
  return kmax > 0.0 ? dmax / kmax : 0.0;
}

double fem_quadratic_form(const FemOperator& op, const Eigen::VectorXd& u) { return u.dot(op.K * u); }

double fem_lambda1(const FemOperator& op) {
  const Eigen::Index n = op.W.size();
  Eigen::SparseMatrix<double> Dw(n, n);
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index i = 0; i < n; ++i) trip.emplace_back(i, i, op.W[i]);
  Dw.setFromTriplets(trip.begin(), trip.end());
  // push the shift down until K - shift W factorizes as positive definite
  double shift = -1.0;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  for (int attempt = 0; attempt < 60; ++attempt, shift *= 2.0) {
    ldlt.compute(op.K - shift * Dw);
    if (ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0.0).all()) break;
  }
  require(ldlt.info() == Eigen::Success, ErrorKind::IllConditioned, "shifted FEM operator not factorizable");
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
  double lambda = fem_quadratic_form(op, v) / v.dot(op.W.cwiseProduct(v));
  for (int it = 0; it < 5000; ++it) {
    const Eigen::VectorXd rhs = op.W.cwiseProduct(v);
    v = ldlt.solve(rhs);
    v /= std::sqrt(v.dot(op.W.cwiseProduct(v)));
    const double next = fem_quadratic_form(op, v);
    const bool done = std::abs(next - lambda) <= 1e-13 * std::max(1.0, std::abs(next));
    lambda = next;
    if (done) return lambda;
  }
  fail(ErrorKind::NonConvergence, "inverse iteration for lambda_1 did not converge");
}

Eigen::VectorXd fem_source(const SimplicialManifold& mfd, const CutoffEta& eta) {
  require(mfd.metric.chart_angle > 0.0, ErrorKind::InvalidArgument, "metric has no flat chart");
  const auto& mesh = mfd.mesh;
  const std::vector<Eigen::Vector4d> points = subtet_points(2);
  const double w = 1.0 / static_cast<double>(points.size());
  const double reach = mfd.metric.chart_angle;
  const auto relevant = [&](const Tet& t) {
    double diam = 0.0;
    double lo = std::numbers::pi;
    double hi = 0.0;
    for (int i = 0; i < 4; ++i) {
      const double th = std::acos(std::clamp(mesh.vertices[t[i]][0], -1.0, 1.0));
      lo = std::min(lo, th);
      hi = std::max(hi, th);
      for (int j = i + 1; j < 4; ++j)
        diam = std::max(diam, 2.0 * std::asin(std::min(1.0, 0.5 * (mesh.vertices[t[i]] - mesh.vertices[t[j]]).norm())));
    }
    return lo - diam <= reach || (mfd.antipodal && hi + diam >= std::numbers::pi - reach);
  };
  const std::size_t nt = mesh.tets.size();
  std::vector<std::array<double, 4>> local(nt, {0.0, 0.0, 0.0, 0.0});
  const auto count = static_cast<std::ptrdiff_t>(nt);
#pragma omp parallel for schedule(dynamic, 64) num_threads(kernel_threads())
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    const auto& t = mesh.tets[static_cast<std::size_t>(k)];
    if (!relevant(t)) continue;
    Eigen::Matrix<double, 4, 3> E;
    for (int i = 0; i < 3; ++i) E.col(i) = mesh.vertices[t[i + 1]] - mesh.vertices[t[0]];
    for (const auto& b : points) {
      Eigen::Vector4d y = Eigen::Vector4d::Zero();
      for (int i = 0; i < 4; ++i) y += b[i] * mesh.vertices[t[i]];
      const double r = y.norm();
      const Eigen::Vector4d x = y / r;
      double F = F_eta(eta, mfd.metric.chart_radius(x));
      if (mfd.antipodal) F += F_eta(eta, mfd.metric.chart_radius(-x));
      if (F == 0.0) continue;
      const Eigen::Matrix<double, 4, 3> J = (Eigen::Matrix4d::Identity() - x * x.transpose()) * E / r;
      const double vol = std::sqrt((J.transpose() * mfd.metric.tensor(x) * J).determinant()) / 6.0;
      for (int i = 0; i < 4; ++i) local[static_cast<std::size_t>(k)][i] += w * vol * F * b[i];
    }
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.vertices.size()));
  for (std::size_t k = 0; k < nt; ++k)
    for (int i = 0; i < 4; ++i) out[mesh.tets[k][i]] += local[k][i];
  return out;
}

std::size_t chart_vertex_count(const SimplicialManifold& mfd) {
  std::size_t c = 0;
  for (Eigen::Index i = 0; i < mfd.chart_radius.size(); ++i)
    if (mfd.chart_radius[i] < 1.0) ++c;
  return c;
}

double fem_mass_value(const SimplicialManifold& mfd, const CutoffEta& eta, std::size_t min_chart_vertices) {
  require(eta.n == 3, ErrorKind::InvalidArgument, "fem3d handles n = 3");
  require(mfd.flat_radius >= 1.0, ErrorKind::InvalidArgument, "metric must be flat on the unit chart ball");
  const std::size_t chart = chart_vertex_count(mfd);
  if (chart < min_chart_vertices)
    fail(ErrorKind::ChartTooCoarse, std::to_string(chart) + " vertices in the unit chart ball, need " +
                                        std::to_string(min_chart_vertices));
  const FemOperator op = fem_operator(mfd);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(op.K);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all())
    fail(ErrorKind::NotPositive, "FEM conformal Laplacian is not positive definite");
  const Eigen::VectorXd beta = ldlt.solve(-fem_source(mfd, eta));
  return beta[0];
}

FemMassResult fem_mass(const FemMetric& metric, int level, const CutoffEta& eta) {
  require(level >= 1 && level <= 4, ErrorKind::InvalidArgument, "fem_mass level must be in 1..4");
  FemMassResult r;
  r.level = level;
  const SimplicialManifold fine = attach_metric(build_sphere_mesh(level), metric);
  r.chart_vertices = chart_vertex_count(fine);
  r.vertices = fine.mesh.vertices.size();
  r.m = fem_mass_value(fine, eta);
  r.lambda1 = fem_lambda1(fem_operator(fine));
  const SimplicialManifold coarse = attach_metric(build_sphere_mesh(level - 1), metric);
  r.m_coarse = fem_mass_value(coarse, eta, 0);
  r.error_estimate = std::abs(r.m - r.m_coarse);
  return r;
}

}  // namespace masslab
