#pragma once

#include <cstddef>

// Dense numeric kernels. Each kernel has a serial reference implementation and
// an OpenMP variant that splits work across independent outputs only, so both
// produce bitwise-identical results for any thread count. The unsuffixed name
// is the OpenMP variant; callers wanting the reference use *_serial.

namespace dbpae::kernels {

// out[n x m] = a[n x k] * b[k x m]
void matmul_serial(const double* a, const double* b, double* out, std::size_t n, std::size_t k,
                   std::size_t m);
void matmul(const double* a, const double* b, double* out, std::size_t n, std::size_t k,
            std::size_t m);

// out[m x n] = transpose(in[n x m])
void transpose_serial(const double* in, double* out, std::size_t n, std::size_t m);
void transpose(const double* in, double* out, std::size_t n, std::size_t m);

enum class Unary { Neg, Sigmoid, Tanh, Exp, Log, Square, Softplus };
enum class Binary { Add, Sub, Mul, Div };

void unary_map_serial(Unary op, const double* in, double* out, std::size_t n);
void unary_map(Unary op, const double* in, double* out, std::size_t n);

void binary_map_serial(Binary op, const double* a, const double* b, double* out, std::size_t n);
void binary_map(Binary op, const double* a, const double* b, double* out, std::size_t n);

void scalar_mul_serial(const double* in, double c, double* out, std::size_t n);
void scalar_mul(const double* in, double c, double* out, std::size_t n);

// Sum an [n x m] array down to one of: scalar (1x1), column sums (1 x m), or
// row sums (n x 1). Accumulation order per output is fixed (index-ascending).
void col_sums_serial(const double* in, double* out, std::size_t n, std::size_t m);
void col_sums(const double* in, double* out, std::size_t n, std::size_t m);
void row_sums_serial(const double* in, double* out, std::size_t n, std::size_t m);
void row_sums(const double* in, double* out, std::size_t n, std::size_t m);
double total_sum(const double* in, std::size_t n);  // single output, serial by definition

// Tile a row [1 x m] down rows, or a column [n x 1] across columns.
void tile_rows_serial(const double* row, double* out, std::size_t n, std::size_t m);
void tile_rows(const double* row, double* out, std::size_t n, std::size_t m);
void tile_cols_serial(const double* col, double* out, std::size_t n, std::size_t m);
void tile_cols(const double* col, double* out, std::size_t n, std::size_t m);

double sigmoid(double x);
double softplus(double x);

}  // namespace dbpae::kernels
