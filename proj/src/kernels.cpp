#include "dbpae/kernels.hpp"

#include <cmath>
#include <cstring>

namespace dbpae::kernels {

double sigmoid(double x) {
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  // log(1 + e^x) without overflow for large |x|
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

namespace {

// One output row of a matmul; both variants run rows through this.
inline void matmul_row(const double* a_row, const double* b, double* out_row, std::size_t k,
                       std::size_t m) {
  std::memset(out_row, 0, m * sizeof(double));
  for (std::size_t kk = 0; kk < k; ++kk) {
    const double aik = a_row[kk];
    const double* b_row = b + kk * m;
    for (std::size_t j = 0; j < m; ++j) out_row[j] += aik * b_row[j];
  }
}

inline double apply_unary(Unary op, double x) {
  switch (op) {
    case Unary::Neg: return -x;
    case Unary::Sigmoid: return sigmoid(x);
    case Unary::Tanh: return std::tanh(x);
    case Unary::Exp: return std::exp(x);
    case Unary::Log: return std::log(x);
    case Unary::Square: return x * x;
    case Unary::Softplus: return softplus(x);
  }
  return 0.0;
}

inline double apply_binary(Binary op, double a, double b) {
  switch (op) {
    case Binary::Add: return a + b;
    case Binary::Sub: return a - b;
    case Binary::Mul: return a * b;
    case Binary::Div: return a / b;
  }
  return 0.0;
}

constexpr std::ptrdiff_t kParallelCutoff = 4096;  // elements below this are not worth a team

}  // namespace

void matmul_serial(const double* a, const double* b, double* out, std::size_t n, std::size_t k,
                   std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) matmul_row(a + i * k, b, out + i * m, k, m);
}

void matmul(const double* a, const double* b, double* out, std::size_t n, std::size_t k,
            std::size_t m) {
  const std::ptrdiff_t ni = static_cast<std::ptrdiff_t>(n);
  if (n * k * m < 32768) {
    matmul_serial(a, b, out, n, k, m);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < ni; ++i)
    matmul_row(a + static_cast<std::size_t>(i) * k, b, out + static_cast<std::size_t>(i) * m, k, m);
}

void transpose_serial(const double* in, double* out, std::size_t n, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = in[i * m + j];
}

void transpose(const double* in, double* out, std::size_t n, std::size_t m) {
  const std::ptrdiff_t nj = static_cast<std::ptrdiff_t>(m);
  if (n * m < static_cast<std::size_t>(kParallelCutoff)) {
    transpose_serial(in, out, n, m);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < nj; ++j)
    for (std::size_t i = 0; i < n; ++i)
      out[static_cast<std::size_t>(j) * n + i] = in[i * m + static_cast<std::size_t>(j)];
}

void unary_map_serial(Unary op, const double* in, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = apply_unary(op, in[i]);
}

void unary_map(Unary op, const double* in, double* out, std::size_t n) {
  const std::ptrdiff_t ni = static_cast<std::ptrdiff_t>(n);
  if (ni < kParallelCutoff) {
    unary_map_serial(op, in, out, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < ni; ++i) out[i] = apply_unary(op, in[i]);
}

void binary_map_serial(Binary op, const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = apply_binary(op, a[i], b[i]);
}

void binary_map(Binary op, const double* a, const double* b, double* out, std::size_t n) {
  const std::ptrdiff_t ni = static_cast<std::ptrdiff_t>(n);
  if (ni < kParallelCutoff) {
    binary_map_serial(op, a, b, out, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < ni; ++i) out[i] = apply_binary(op, a[i], b[i]);
}

void scalar_mul_serial(const double* in, double c, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = c * in[i];
}

void scalar_mul(const double* in, double c, double* out, std::size_t n) {
  const std::ptrdiff_t ni = static_cast<std::ptrdiff_t>(n);
  if (ni < kParallelCutoff) {
    scalar_mul_serial(in, c, out, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < ni; ++i) out[i] = c * in[i];
}

void col_sums_serial(const double* in, double* out, std::size_t n, std::size_t m) {
  for (std::size_t j = 0; j < m; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += in[i * m + j];
    out[j] = s;
  }
}

void col_sums(const double* in, double* out, std::size_t n, std::size_t m) {
  const std::ptrdiff_t nj = static_cast<std::ptrdiff_t>(m);
  if (n * m < static_cast<std::size_t>(kParallelCutoff)) {
    col_sums_serial(in, out, n, m);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < nj; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += in[i * m + static_cast<std::size_t>(j)];
    out[j] = s;
  }
}

void row_sums_serial(const double* in, double* out, std::size_t n, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    const double* row = in + i * m;
    for (std::size_t j = 0; j < m; ++j) s += row[j];
    out[i] = s;
  }
}

void row_sums(const double* in, double* out, std::size_t n, std::size_t m) {
  const std::ptrdiff_t ni = static_cast<std::ptrdiff_t>(n);
  if (n * m < static_cast<std::size_t>(kParallelCutoff)) {
    row_sums_serial(in, out, n, m);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < ni; ++i) {
    double s = 0.0;
    const double* row = in + static_cast<std::size_t>(i) * m;
    for (std::size_t j = 0; j < m; ++j) s += row[j];
    out[i] = s;
  }
}

double total_sum(const double* in, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += in[i];
  return s;
}

void tile_rows_serial(const double* row, double* out, std::size_t n, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) std::memcpy(out + i * m, row, m * sizeof(double));
}

void tile_rows(const double* row, double* out, std::size_t n, std::size_t m) {
  const std::ptrdiff_t ni = static_cast<std::ptrdiff_t>(n);
  if (n * m < static_cast<std::size_t>(kParallelCutoff)) {
    tile_rows_serial(row, out, n, m);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < ni; ++i)
    std::memcpy(out + static_cast<std::size_t>(i) * m, row, m * sizeof(double));
}

void tile_cols_serial(const double* col, double* out, std::size_t n, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double v = col[i];
    double* row = out + i * m;
    for (std::size_t j = 0; j < m; ++j) row[j] = v;
  }
}

void tile_cols(const double* col, double* out, std::size_t n, std::size_t m) {
  const std::ptrdiff_t ni = static_cast<std::ptrdiff_t>(n);
  if (n * m < static_cast<std::size_t>(kParallelCutoff)) {
    tile_cols_serial(col, out, n, m);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < ni; ++i) {
    const double v = col[i];
    double* row = out + static_cast<std::size_t>(i) * m;
    for (std::size_t j = 0; j < m; ++j) row[j] = v;
  }
}

}  // namespace dbpae::kernels
