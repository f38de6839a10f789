#pragma once

// Inner-loop kernels behind a runtime-selected dispatch table.
//
// Every kernel has a scalar reference implementation; SIMD variants must agree
// with it up to floating-point reassociation (see tests/unit/kernels_test.cpp).
// Within one process the selected table is fixed, so repeated calls on equal
// inputs are bit-identical.

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "supsup/tensor.hpp"

namespace supsup::kernels {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
  Isa isa;
  const char* name;
  /// C[m x n] = A[m x k] * B[k x n]; adds into C when `accumulate`.
  void (*gemm_nn)(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                  std::size_t n, bool accumulate);
  /// C[k x n] = A[m x k]^T * B[m x n].
  void (*gemm_tn)(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                  std::size_t n);
  /// C[m x k] = A[m x n] * B[k x n]^T.
  void (*gemm_nt)(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
                  std::size_t k);
  void (*hadamard)(const double* a, const double* b, double* out, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// y += alpha * m for a 0/1 byte mask.
  void (*axpy_mask)(double alpha, const std::uint8_t* m, double* y, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// Sum of a[i] where m[i] != 0.
  double (*masked_sum)(const double* a, const std::uint8_t* m, std::size_t n);
  /// sq = decay*sq + (1-decay)*g^2;  param -= lr * g / (sqrt(sq) + eps).
  void (*rmsprop)(double* param, double* sq, const double* grad, std::size_t n, double lr,
                  double decay, double eps);
};

const KernelTable& scalar_table();

/// AVX2+FMA table, or nullptr when the build or the CPU lacks support.
const KernelTable* avx2_table();

/// Table used by the library. Chosen once from the CPU features; the
/// environment variable SUPSUP_ISA=scalar forces the reference kernels.
const KernelTable& active();

/// Overrides the active table (tests and benchmarks). Returns false when the
/// requested ISA is unavailable.
bool select(Isa isa);

std::string_view isa_name(Isa isa);

// Matrix-level conveniences over the active table.

Matrix matmul(const Matrix& a, const Matrix& b);     // a * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a^T * b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a * b^T
Matrix hadamard(const Matrix& a, const Matrix& b);
double dot(const Matrix& a, const Matrix& b);

}  // namespace supsup::kernels
