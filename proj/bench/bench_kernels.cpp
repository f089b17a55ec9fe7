#include <benchmark/benchmark.h>

#include <random>

#include "masslab/fem3d.hpp"
#include "masslab/kernels.hpp"

namespace {

struct FormInputs {
  Eigen::MatrixXd K, U;
  Eigen::VectorXd w, F;
};

FormInputs form_inputs(int size, int columns) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FormInputs in;
  in.K = Eigen::MatrixXd::NullaryExpr(size, size, [&] { return u(rng); });
  in.K = (in.K + in.K.transpose()).eval();
  in.U = Eigen::MatrixXd::NullaryExpr(size, columns, [&] { return u(rng); });
  in.w = Eigen::VectorXd::NullaryExpr(size, [&] { return 1.0 + u(rng) * 0.5; });
  in.F = Eigen::VectorXd::NullaryExpr(size, [&] { return u(rng); });
  return in;
}

template <bool Parallel>
void BM_form_batch(benchmark::State& state) {
  const FormInputs in = form_inputs(static_cast<int>(state.range(0)), 64);
  for (auto _ : state) {
    auto r = Parallel ? masslab::form_batch_parallel(in.K, in.w, in.F, in.U, 6.0)
                      : masslab::form_batch_serial(in.K, in.w, in.F, in.U, 6.0);
    benchmark::DoNotOptimize(r.quadratic.data());
  }
}

template <bool Parallel>
void BM_assemble_p1(benchmark::State& state) {
  const auto mfd = masslab::attach_metric(masslab::build_sphere_mesh(static_cast<int>(state.range(0))),
                                          masslab::round_fem_metric());
  const std::vector<double> weights(4, 0.25);
  for (auto _ : state) {
    auto sys = Parallel ? masslab::assemble_p1_parallel(mfd.mesh.vertices.size(), mfd.mesh.tets, mfd.grams, weights)
                        : masslab::assemble_p1_serial(mfd.mesh.vertices.size(), mfd.mesh.tets, mfd.grams, weights);
    benchmark::DoNotOptimize(sys.volume);
  }
  state.counters["tets"] = static_cast<double>(mfd.mesh.tets.size());
}

}  // namespace

BENCHMARK(BM_form_batch<false>)->Arg(256)->Arg(1024);
BENCHMARK(BM_form_batch<true>)->Arg(256)->Arg(1024);
BENCHMARK(BM_assemble_p1<false>)->Arg(2)->Arg(3);
BENCHMARK(BM_assemble_p1<true>)->Arg(2)->Arg(3);

BENCHMARK_MAIN();
