#include <atomic>
#include <cstdlib>
#include <cstring>
#include <string>

#include "supsup/errors.hpp"
#include "supsup/kernels.hpp"

#ifdef SUPSUP_HAVE_AVX2
#include "avx2_entry.hpp"
#endif

namespace supsup::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(SUPSUP_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() {
  const char* forced = std::getenv("SUPSUP_ISA");
  if (forced != nullptr && std::strcmp(forced, "scalar") == 0) return &scalar_table();
  if (const KernelTable* t = avx2_table()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable* avx2_table() {
#ifdef SUPSUP_HAVE_AVX2
  static const KernelTable table{Isa::Avx2,      "avx2",         avx2::gemm_nn, avx2::gemm_tn,
                                 avx2::gemm_nt,  avx2::hadamard, avx2::axpy,    avx2::axpy_mask,
                                 avx2::dot,      avx2::masked_sum, avx2::rmsprop};
  static const bool supported = cpu_has_avx2();
  return supported ? &table : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

bool select(Isa isa) {
  const KernelTable* t = isa == Isa::Scalar ? &scalar_table() : avx2_table();
  if (t == nullptr) return false;
  current().store(t, std::memory_order_relaxed);
  return true;
}

std::string_view isa_name(Isa isa) { return isa == Isa::Scalar ? "scalar" : "avx2"; }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  active().gemm_nn(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols(), false);
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw DimensionError("matmul_tn: row counts differ");
  Matrix c(a.cols(), b.cols());
  active().gemm_tn(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw DimensionError("matmul_nt: column counts differ");
  Matrix c(a.rows(), b.rows());
  active().gemm_nt(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.rows());
  return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw DimensionError("hadamard: shape mismatch");
  Matrix c(a.rows(), a.cols());
  active().hadamard(a.data(), b.data(), c.data(), a.size());
  return c;
}

double dot(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw DimensionError("dot: shape mismatch");
  return active().dot(a.data(), b.data(), a.size());
}

}  // namespace supsup::kernels
