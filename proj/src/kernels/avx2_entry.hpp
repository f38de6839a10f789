#pragma once

// Entry points of kernels_avx2.cpp. That translation unit is compiled with
// -mavx2 -mfma and includes nothing but this header and <immintrin.h>, so no
// AVX2-compiled inline code can leak into the rest of the program.

#include <cstddef>
#include <cstdint>

namespace supsup::kernels::avx2 {

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n);
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k);
void hadamard(const double* a, const double* b, double* out, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void axpy_mask(double alpha, const std::uint8_t* m, double* y, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
double masked_sum(const double* a, const std::uint8_t* m, std::size_t n);
void rmsprop(double* param, double* sq, const double* grad, std::size_t n, double lr,
             double decay, double eps);

}  // namespace supsup::kernels::avx2
