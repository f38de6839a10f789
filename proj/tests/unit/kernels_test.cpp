#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "supsup/errors.hpp"
#include "supsup/kernels.hpp"

using namespace supsup;
namespace k = supsup::kernels;

namespace {

// SIMD variants reassociate sums; allow a few ulps relative to the operands.
constexpr double kReassocTol = 1e-12;

std::vector<const k::KernelTable*> tables() {
  std::vector<const k::KernelTable*> t{&k::scalar_table()};
  if (const auto* avx = k::avx2_table()) t.push_back(avx);
  return t;
}

std::vector<std::uint8_t> random_bytes(std::size_t n, Rng& rng) {
  std::vector<std::uint8_t> m(n);
  for (auto& b : m) b = uniform01(rng) < 0.5;
  return m;
}

// Odd sizes exercise every SIMD fringe path.
const std::size_t kSizes[] = {1, 3, 4, 7, 8, 9, 17, 33, 64, 101};

}  // namespace

TEST(Kernels, GemmNnMatchesNaive) {
  Rng rng(1);
  for (const auto* t : tables())
    for (std::size_t m : {1, 5, 8}) for (std::size_t kk : kSizes) for (std::size_t n : {1, 7, 8, 13}) {
      const Matrix a = oracle::random_matrix(m, kk, rng), b = oracle::random_matrix(kk, n, rng);
      const Matrix want = oracle::naive_matmul(a, b);
      Matrix c(m, n, 1.0);
      t->gemm_nn(a.data(), b.data(), c.data(), m, kk, n, false);
      EXPECT_LE(max_abs_diff(c, want), kReassocTol * kk) << t->name;
      Matrix acc(m, n, 1.0);
      t->gemm_nn(a.data(), b.data(), acc.data(), m, kk, n, true);
      for (double& v : acc.flat()) v -= 1.0;
      EXPECT_LE(max_abs_diff(acc, want), kReassocTol * kk) << t->name;
    }
}

TEST(Kernels, GemmTnAndNtMatchNaive) {
  Rng rng(2);
  for (const auto* t : tables())
    for (std::size_t m : {1, 6, 9}) for (std::size_t kk : kSizes) for (std::size_t n : {1, 4, 11}) {
      const Matrix a = oracle::random_matrix(m, kk, rng), b = oracle::random_matrix(m, n, rng);
      Matrix at(kk, m);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < kk; ++j) at(j, i) = a(i, j);
      Matrix c(kk, n);
      t->gemm_tn(a.data(), b.data(), c.data(), m, kk, n);
      EXPECT_LE(max_abs_diff(c, oracle::naive_matmul(at, b)), kReassocTol * m) << t->name;

      const Matrix p = oracle::random_matrix(m, kk, rng), q = oracle::random_matrix(n, kk, rng);
      Matrix qt(kk, n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < kk; ++j) qt(j, i) = q(i, j);
      Matrix d(m, n);
      t->gemm_nt(p.data(), q.data(), d.data(), m, kk, n);
      EXPECT_LE(max_abs_diff(d, oracle::naive_matmul(p, qt)), kReassocTol * kk) << t->name;
    }
}

TEST(Kernels, ElementwiseVariantsAgree) {
  Rng rng(3);
  const auto& ref = k::scalar_table();
  for (const auto* t : tables())
    for (std::size_t n : kSizes) {
      const Matrix a = oracle::random_matrix(1, n, rng), b = oracle::random_matrix(1, n, rng);
      const auto mask = random_bytes(n, rng);

      std::vector<double> h1(n), h2(n);
      ref.hadamard(a.data(), b.data(), h1.data(), n);
      t->hadamard(a.data(), b.data(), h2.data(), n);
      EXPECT_EQ(h1, h2);

      std::vector<double> y1(b.data(), b.data() + n), y2 = y1;
      ref.axpy(0.37, a.data(), y1.data(), n);
      t->axpy(0.37, a.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(y1[i], y2[i], kReassocTol);

      std::vector<double> z1(b.data(), b.data() + n), z2 = z1;
      ref.axpy_mask(-1.5, mask.data(), z1.data(), n);
      t->axpy_mask(-1.5, mask.data(), z2.data(), n);
      EXPECT_EQ(z1, z2);
      for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(z1[i], b.data()[i] + (mask[i] ? -1.5 : 0.0));

      long double want = 0.0L, want_masked = 0.0L;
      for (std::size_t i = 0; i < n; ++i) {
        want += static_cast<long double>(a.data()[i]) * b.data()[i];
        if (mask[i]) want_masked += a.data()[i];
      }
      EXPECT_NEAR(t->dot(a.data(), b.data(), n), static_cast<double>(want), kReassocTol * n);
      EXPECT_NEAR(t->masked_sum(a.data(), mask.data(), n), static_cast<double>(want_masked), kReassocTol * n);
    }
}

TEST(Kernels, RmspropVariantsAgree) {
  Rng rng(4);
  for (const auto* t : tables())
    for (std::size_t n : kSizes) {
      const Matrix g = oracle::random_matrix(1, n, rng);
      Matrix p = oracle::random_matrix(1, n, rng), sq = oracle::random_matrix(1, n, rng, 0.0, 1.0);
      Matrix p_ref = p, sq_ref = sq;
      for (std::size_t i = 0; i < n; ++i) {
        sq_ref.data()[i] = 0.99 * sq_ref.data()[i] + 0.01 * g.data()[i] * g.data()[i];
        p_ref.data()[i] -= 1e-3 * g.data()[i] / (std::sqrt(sq_ref.data()[i]) + 1e-8);
      }
      t->rmsprop(p.data(), sq.data(), g.data(), n, 1e-3, 0.99, 1e-8);
      EXPECT_LE(max_abs_diff(p, p_ref), 1e-15) << t->name;
      EXPECT_LE(max_abs_diff(sq, sq_ref), 1e-15) << t->name;
    }
}

TEST(Kernels, SelectAndWrappers) {
  EXPECT_TRUE(k::select(k::Isa::Scalar));
  EXPECT_EQ(k::active().isa, k::Isa::Scalar);
  Rng rng(5);
  const Matrix a = oracle::random_matrix(4, 6, rng), b = oracle::random_matrix(6, 3, rng);
  const Matrix c_scalar = k::matmul(a, b);
  if (k::select(k::Isa::Avx2)) {
    EXPECT_EQ(k::active().isa, k::Isa::Avx2);
    EXPECT_LE(max_abs_diff(k::matmul(a, b), c_scalar), 1e-13);
  }
  EXPECT_THROW(k::matmul(a, a), DimensionError);
  EXPECT_THROW(k::hadamard(a, b), DimensionError);
  EXPECT_EQ(k::isa_name(k::Isa::Scalar), "scalar");
}
