#include <doctest.h>

#include <random>
#include <stdexcept>

#include "masslab/error.hpp"
#include "masslab/fem3d.hpp"
#include "masslab/kernels.hpp"

using namespace masslab;

TEST_CASE("form batch: parallel twin equals the serial kernel") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int m = 120, c = 17;
  Eigen::MatrixXd K = Eigen::MatrixXd::NullaryExpr(m, m, [&] { return u(rng); });
  K = (K + K.transpose()).eval();
  const Eigen::MatrixXd U = Eigen::MatrixXd::NullaryExpr(m, c, [&] { return u(rng); });
  const Eigen::VectorXd w = Eigen::VectorXd::NullaryExpr(m, [&] { return 1.5 + u(rng); });
  const Eigen::VectorXd F = Eigen::VectorXd::NullaryExpr(m, [&] { return u(rng); });
  for (int threads : {1, 3}) {
    set_kernel_threads(threads);
    const FormBatch s = form_batch_serial(K, w, F, U, 6.0);
    const FormBatch p = form_batch_parallel(K, w, F, U, 6.0);
    CHECK(s.quadratic == p.quadratic);
    CHECK(s.linear == p.linear);
    CHECK(s.power == p.power);
  }
  set_kernel_threads(0);
  const FormBatch s = form_batch_serial(K, w, F, U, 6.0);
  const Eigen::VectorXd u0 = U.col(3);
  CHECK(s.quadratic[3] == doctest::Approx(u0.dot(K * u0)).epsilon(1e-13));
  CHECK(s.linear[3] == doctest::Approx(w.cwiseProduct(u0).dot(F)).epsilon(1e-13));
  CHECK(s.power[3] == doctest::Approx(w.dot(u0.cwiseAbs().array().pow(6.0).matrix())).epsilon(1e-13));
}

TEST_CASE("P1 assembly: parallel twin is bitwise identical") {
  const auto mfd = attach_metric(build_sphere_mesh(2), round_fem_metric(), false);
  const std::vector<double> weights(4, 0.25);
  set_kernel_threads(3);
  const P1System s = assemble_p1_serial(mfd.mesh.vertices.size(), mfd.mesh.tets, mfd.grams, weights);
  const P1System p = assemble_p1_parallel(mfd.mesh.vertices.size(), mfd.mesh.tets, mfd.grams, weights);
  set_kernel_threads(0);
  CHECK(s.volume == p.volume);
  CHECK(s.tet_volumes == p.tet_volumes);
  CHECK((Eigen::MatrixXd(s.stiffness) - Eigen::MatrixXd(p.stiffness)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((s.lumped - p.lumped).cwiseAbs().maxCoeff() == 0.0);
  // constants lie in the kernel of the stiffness
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(mfd.mesh.vertices.size()));
  CHECK((s.stiffness * one).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("non-SPD Gram matrix names its tet") {
  const auto mesh = build_sphere_mesh(0);
  std::vector<Eigen::Matrix3d> grams(mesh.tets.size() * 4, Eigen::Matrix3d::Identity());
  grams[4 * 5 + 2] = -Eigen::Matrix3d::Identity();
  const std::vector<double> weights(4, 0.25);
  for (bool parallel : {false, true}) {
    try {
      parallel ? (void)assemble_p1_parallel(mesh.vertices.size(), mesh.tets, grams, weights)
               : (void)assemble_p1_serial(mesh.vertices.size(), mesh.tets, grams, weights);
      FAIL("expected NonSPDGram");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::NonSPDGram);
      CHECK(std::string(e.what()).find("5") != std::string::npos);
    }
  }
}

TEST_CASE("parallel map keeps order and rethrows the first error") {
  set_kernel_threads(4);
  const auto v = parallel_map(100, [](std::size_t i) { return static_cast<int>(i * i); });
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(v[i] == static_cast<int>(i * i));
  try {
    (void)parallel_map(50, [](std::size_t i) -> int {
      if (i == 7 || i == 30) throw std::runtime_error("fail " + std::to_string(i));
      return 0;
    });
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "fail 7");
  }
  set_kernel_threads(0);
  CHECK(kernel_threads() >= 1);
}
