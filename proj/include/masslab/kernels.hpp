#pragma once

#include <array>
#include <cstddef>
#include <exception>
#include <optional>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace masslab {

/// Worker count for the parallel kernels: set_kernel_threads, else MASSLAB_THREADS, else the
/// OpenMP default.
int kernel_threads();
/// 0 restores the default.
void set_kernel_threads(int threads);

/// Per column u of U: u^T K u, sum_i w_i u_i F_i and sum_i w_i |u_i|^p.
struct FormBatch {
  std::vector<double> quadratic;
  std::vector<double> linear;
  std::vector<double> power;
};

FormBatch form_batch_serial(const Eigen::MatrixXd& K, const Eigen::VectorXd& w, const Eigen::VectorXd& F,
                            const Eigen::MatrixXd& U, double p);
FormBatch form_batch_parallel(const Eigen::MatrixXd& K, const Eigen::VectorXd& w, const Eigen::VectorXd& F,
                              const Eigen::MatrixXd& U, double p);

using Tet = std::array<int, 4>;

/// P1 matrices of a simplicial complex with a smoothly varying metric. Each tet carries the
/// metric on its edge vectors (x1 - x0, x2 - x0, x3 - x0) at `weights.size()` quadrature points:
/// `grams[k * q + j]` for tet k, point j. Weights sum to 1 over the reference tet.
struct P1System {
  Eigen::SparseMatrix<double> stiffness;   // int <du, dv>
  Eigen::SparseMatrix<double> consistent;  // int u v
  Eigen::VectorXd lumped;                  // row sums of the consistent mass
  std::vector<double> tet_volumes;
  double volume = 0.0;
};

/// Both throw NonSPDGram naming the first offending tet. The parallel twin computes local
/// matrices concurrently and scatters them in tet order, so the result is bitwise identical.
P1System assemble_p1_serial(std::size_t vertex_count, const std::vector<Tet>& tets,
                            const std::vector<Eigen::Matrix3d>& grams, const std::vector<double>& weights);
P1System assemble_p1_parallel(std::size_t vertex_count, const std::vector<Tet>& tets,
                              const std::vector<Eigen::Matrix3d>& grams, const std::vector<double>& weights);

/// Ordered parallel map over [0, count); the first exception (by index) is rethrown.
template <typename Fn>
auto parallel_map(std::size_t count, Fn&& fn) -> std::vector<std::invoke_result_t<Fn&, std::size_t>> {
  using R = std::invoke_result_t<Fn&, std::size_t>;
  std::vector<std::optional<R>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  const int threads = kernel_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::size_t i = 0; i < count; ++i) {
    try {
      slots[i].emplace(fn(i));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<R> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace masslab
