#include <gtest/gtest.h>

#include "supsup/errors.hpp"
#include "supsup/rng.hpp"
#include "supsup/tensor.hpp"

using namespace supsup;

TEST(Matrix, RowMajorLayout) {
  Matrix m(2, 3);
  m(1, 2) = 5.0;
  EXPECT_EQ(m.data()[5], 5.0);
  EXPECT_EQ(m.row(1)[2], 5.0);
}

TEST(Matrix, GatherAndRepeat) {
  Matrix m(3, 2);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = static_cast<double>(i);
  const std::vector<std::size_t> rows{2, 0};
  const Matrix g = gather_rows(m, rows);
  EXPECT_EQ(g(0, 1), 5.0);
  EXPECT_EQ(g(1, 0), 0.0);

  const Matrix r = repeat_rows(m, 2);
  ASSERT_EQ(r.rows(), 6u);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(r(i + 3, j), m(i, j));
}

TEST(Matrix, MaxAbsDiffRejectsShapeMismatch) {
  EXPECT_THROW(max_abs_diff(Matrix(2, 2), Matrix(2, 3)), DimensionError);
  Matrix a(1, 2), b(1, 2);
  b(0, 1) = -0.25;
  EXPECT_EQ(max_abs_diff(a, b), 0.25);
}

TEST(Seeds, DeriveIsCounterMode) {
  EXPECT_EQ(derive_seed(1, seed_tag::kPermutation, 7), derive_seed(1, seed_tag::kPermutation, 7));
  EXPECT_NE(derive_seed(1, seed_tag::kPermutation, 7), derive_seed(1, seed_tag::kPermutation, 8));
  EXPECT_NE(derive_seed(1, seed_tag::kPermutation, 7), derive_seed(1, seed_tag::kScores, 7));
  for (std::uint64_t i = 0; i < 1000; ++i) EXPECT_NE(derive_seed(0, 0, i), 0u);
}

TEST(Seeds, Uniform01Range) {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = uniform01(rng);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}
