#include "masslab/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string>

#include <omp.h>

#include "masslab/error.hpp"

namespace masslab {

namespace {

std::atomic<int> thread_override{0};

struct LocalP1 {
  double K[4][4];
  double volume;
};

bool local_p1(const Eigen::Matrix3d* G, const std::vector<double>& weights, LocalP1& out) {
  Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
  out.volume = 0.0;
  for (std::size_t q = 0; q < weights.size(); ++q) {
    const Eigen::LLT<Eigen::Matrix3d> llt(G[q]);
    if (llt.info() != Eigen::Success || !G[q].allFinite()) return false;
    const double vol = llt.matrixL().determinant() / 6.0;
    if (!(vol > 0.0)) return false;
    C += weights[q] * vol * llt.solve(Eigen::Matrix3d::Identity());
    out.volume += weights[q] * vol;
  }
  // barycentric gradients in edge coordinates: -(1,1,1), e1, e2, e3
  Eigen::Matrix<double, 4, 3> D;
  D << -1, -1, -1, 1, 0, 0, 0, 1, 0, 0, 0, 1;
  const Eigen::Matrix4d K = D * C * D.transpose();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) out.K[i][j] = K(i, j);
  return true;
}

P1System scatter(std::size_t vertex_count, const std::vector<Tet>& tets, const std::vector<LocalP1>& locals) {
  std::vector<Eigen::Triplet<double>> kt;
  std::vector<Eigen::Triplet<double>> mt;
  kt.reserve(16 * tets.size());
  mt.reserve(16 * tets.size());
  P1System sys;
  sys.tet_volumes.resize(tets.size());
  sys.lumped = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vertex_count));
  for (std::size_t k = 0; k < tets.size(); ++k) {
    const auto& loc = locals[k];
    sys.volume += loc.volume;
    sys.tet_volumes[k] = loc.volume;
    for (int i = 0; i < 4; ++i) {
      sys.lumped[tets[k][i]] += loc.volume / 4.0;
      for (int j = 0; j < 4; ++j) {
        kt.emplace_back(tets[k][i], tets[k][j], loc.K[i][j]);
        mt.emplace_back(tets[k][i], tets[k][j], loc.volume * (i == j ? 0.1 : 0.05));
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(vertex_count);
  sys.stiffness.resize(n, n);
  sys.stiffness.setFromTriplets(kt.begin(), kt.end());
  sys.consistent.resize(n, n);
  sys.consistent.setFromTriplets(mt.begin(), mt.end());
  return sys;
}

void check_input(std::size_t vertex_count, const std::vector<Tet>& tets, const std::vector<Eigen::Matrix3d>& grams,
                 const std::vector<double>& weights) {
  require(!weights.empty() && tets.size() * weights.size() == grams.size(), ErrorKind::InvalidArgument,
          "one Gram matrix per tet and quadrature point");
  for (const auto& t : tets)
    for (int v : t)
      require(v >= 0 && static_cast<std::size_t>(v) < vertex_count, ErrorKind::InvalidArgument,
              "tet references a missing vertex");
}

[[noreturn]] void non_spd(std::size_t k) {
  fail(ErrorKind::NonSPDGram, "Gram matrix of tet " + std::to_string(k) + " is not positive definite");
}

}  // namespace

int kernel_threads() {
  if (const int o = thread_override.load(); o > 0) return o;
  if (const char* env = std::getenv("MASSLAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
  }
  return omp_get_max_threads();
}

void set_kernel_threads(int threads) { thread_override.store(threads > 0 ? threads : 0); }

FormBatch form_batch_serial(const Eigen::MatrixXd& K, const Eigen::VectorXd& w, const Eigen::VectorXd& F,
                            const Eigen::MatrixXd& U, double p) {
  const auto cols = static_cast<std::size_t>(U.cols());
  FormBatch out{std::vector<double>(cols), std::vector<double>(cols), std::vector<double>(cols)};
  for (std::size_t c = 0; c < cols; ++c) {
    const auto u = U.col(static_cast<Eigen::Index>(c));
    out.quadratic[c] = u.dot(K * u);
    out.linear[c] = w.dot(u.cwiseProduct(F));
    double s = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) s += w[i] * std::pow(std::abs(u[i]), p);
    out.power[c] = s;
  }
  return out;
}

FormBatch form_batch_parallel(const Eigen::MatrixXd& K, const Eigen::VectorXd& w, const Eigen::VectorXd& F,
                              const Eigen::MatrixXd& U, double p) {
  const auto cols = static_cast<std::ptrdiff_t>(U.cols());
  FormBatch out{std::vector<double>(U.cols()), std::vector<double>(U.cols()), std::vector<double>(U.cols())};
#pragma omp parallel for schedule(static) num_threads(kernel_threads())
  for (std::ptrdiff_t c = 0; c < cols; ++c) {
    const auto u = U.col(c);
    out.quadratic[c] = u.dot(K * u);
    out.linear[c] = w.dot(u.cwiseProduct(F));
    double s = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) s += w[i] * std::pow(std::abs(u[i]), p);
    out.power[c] = s;
  }
  return out;
}

P1System assemble_p1_serial(std::size_t vertex_count, const std::vector<Tet>& tets,
                            const std::vector<Eigen::Matrix3d>& grams, const std::vector<double>& weights) {
  check_input(vertex_count, tets, grams, weights);
  std::vector<LocalP1> locals(tets.size());
  for (std::size_t k = 0; k < tets.size(); ++k)
    if (!local_p1(&grams[k * weights.size()], weights, locals[k])) non_spd(k);
  return scatter(vertex_count, tets, locals);
}

P1System assemble_p1_parallel(std::size_t vertex_count, const std::vector<Tet>& tets,
                              const std::vector<Eigen::Matrix3d>& grams, const std::vector<double>& weights) {
  check_input(vertex_count, tets, grams, weights);
  std::vector<LocalP1> locals(tets.size());
  std::vector<char> ok(tets.size(), 1);
  const auto count = static_cast<std::ptrdiff_t>(tets.size());
#pragma omp parallel for schedule(static) num_threads(kernel_threads())
  for (std::ptrdiff_t k = 0; k < count; ++k) ok[k] = local_p1(&grams[k * weights.size()], weights, locals[k]) ? 1 : 0;
  for (std::size_t k = 0; k < tets.size(); ++k)
    if (!ok[k]) non_spd(k);
  return scatter(vertex_count, tets, locals);
}

}  // namespace masslab
