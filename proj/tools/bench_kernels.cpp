// Timing comparison of the serial reference kernels against their OpenMP
// variants. Run with OMP_NUM_THREADS set to taste.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "dbpae/kernels.hpp"
#include "dbpae/rng.hpp"

using namespace dbpae;

namespace {

double time_best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

int main() {
  Rng rng(12345);
  std::printf("threads: %d\n", omp_get_max_threads());
  std::printf("%-28s %12s %12s %8s\n", "kernel", "serial [ms]", "omp [ms]", "speedup");

  struct MatCase {
    std::size_t n, k, m;
  };
  const MatCase cases[] = {{64, 784, 512}, {320, 1824, 1024}, {512, 512, 512}};
  for (const auto& c : cases) {
    auto a = random_vec(c.n * c.k, rng);
    auto b = random_vec(c.k * c.m, rng);
    std::vector<double> out(c.n * c.m);
    double ts = time_best_of(5, [&] {
      kernels::matmul_serial(a.data(), b.data(), out.data(), c.n, c.k, c.m);
    });
    double tp = time_best_of(5, [&] {
      kernels::matmul(a.data(), b.data(), out.data(), c.n, c.k, c.m);
    });
    char name[64];
    std::snprintf(name, sizeof(name), "matmul %zux%zux%zu", c.n, c.k, c.m);
    double gf = 2.0 * double(c.n) * double(c.k) * double(c.m) / tp / 1e9;
    std::printf("%-28s %12.3f %12.3f %7.2fx   (%.2f GFLOP/s)\n", name, ts * 1e3, tp * 1e3,
                ts / tp, gf);
  }

  const std::size_t n = 1 << 22;
  auto a = random_vec(n, rng);
  auto b = random_vec(n, rng);
  std::vector<double> out(n);
  double ts = time_best_of(5, [&] {
    kernels::binary_map_serial(kernels::Binary::Mul, a.data(), b.data(), out.data(), n);
  });
  double tp = time_best_of(5, [&] {
    kernels::binary_map(kernels::Binary::Mul, a.data(), b.data(), out.data(), n);
  });
  std::printf("%-28s %12.3f %12.3f %7.2fx\n", "elementwise mul 4M", ts * 1e3, tp * 1e3, ts / tp);

  ts = time_best_of(5, [&] {
    kernels::unary_map_serial(kernels::Unary::Tanh, a.data(), out.data(), n);
  });
  tp = time_best_of(5, [&] { kernels::unary_map(kernels::Unary::Tanh, a.data(), out.data(), n); });
  std::printf("%-28s %12.3f %12.3f %7.2fx\n", "tanh map 4M", ts * 1e3, tp * 1e3, ts / tp);

  const std::size_t rows = 4096, cols = 1024;
  ts = time_best_of(5, [&] { kernels::col_sums_serial(a.data(), out.data(), rows, cols); });
  tp = time_best_of(5, [&] { kernels::col_sums(a.data(), out.data(), rows, cols); });
  std::printf("%-28s %12.3f %12.3f %7.2fx\n", "col_sums 4096x1024", ts * 1e3, tp * 1e3, ts / tp);

  return 0;
}
