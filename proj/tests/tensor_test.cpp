#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "mhntf/error.hpp"
#include "mhntf/kernels.hpp"
#include "mhntf/tensor.hpp"
#include "support.hpp"

namespace mhntf {
namespace {

using test::Gen;

// Column of entry idx in the mode-`mode` unfolding: remaining modes in
// increasing order, the first one varying fastest.
std::size_t unfold_column(const std::vector<std::size_t>& idx, const std::vector<std::size_t>& shape,
                          std::size_t mode) {
  std::size_t col = 0, stride = 1;
  for (std::size_t m = 0; m < shape.size(); ++m) {
    if (m == mode) continue;
    col += idx[m] * stride;
    stride *= shape[m];
  }
  return col;
}

TEST(DenseTensor, RejectsBadInput) {
  EXPECT_THROW(DenseTensor({4}, std::vector<double>(4, 1.0)), ArgumentError);
  EXPECT_THROW(DenseTensor({2, 2}, std::vector<double>(3, 1.0)), ArgumentError);
  EXPECT_THROW(DenseTensor({2, 0}, {}), ArgumentError);
  EXPECT_THROW(DenseTensor({2, 1}, {1.0, -0.5}), ArgumentError);
  EXPECT_THROW(DenseTensor({2, 1}, {1.0, std::nan("")}), ArgumentError);
}

TEST(DenseTensor, RowMajorLastModeFastest) {
  DenseTensor t({2, 3}, {0, 1, 2, 3, 4, 5});
  const std::size_t idx[] = {1, 0};
  EXPECT_EQ(t.at(idx), 3.0);
  EXPECT_EQ(t.to_matrix()(0, 2), 2.0);
}

TEST(FactorSet, Invariants) {
  EXPECT_THROW(FactorSet({Matrix(2, 2), Matrix(3, 3)}), ArgumentError);
  EXPECT_THROW(FactorSet({Matrix(2, 2, -1.0), Matrix(3, 2)}), ArgumentError);
  FactorSet f({Matrix(2, 3), Matrix(4, 3), Matrix(5, 3)});
  EXPECT_EQ(f.rank(), 3u);
  EXPECT_EQ(f.shape(), (std::vector<std::size_t>{2, 4, 5}));
}

TEST(Unfold, MatrixModeZeroIsTheMatrix) {
  Gen g(1);
  const Matrix m = g.matrix(3, 5);
  EXPECT_EQ(unfold(DenseTensor::from_matrix(m), 0), m);
  EXPECT_EQ(unfold(DenseTensor::from_matrix(m), 1), m.transposed());
}

TEST(Unfold, OneHotPlacement) {
  std::vector<double> v(8, 0.0);
  v[0] = 1.0;
  const Matrix u = unfold(DenseTensor({2, 2, 2}, v), 1);
  ASSERT_EQ(u.rows(), 2u);
  ASSERT_EQ(u.cols(), 4u);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(u(i, j), i == 0 && j == 0 ? 1.0 : 0.0);
}

TEST(Unfold, MatchesBruteForceIndexMap) {
  Gen g(2);
  const DenseTensor t = g.tensor({2, 3, 4});
  const Matrix u = unfold(t, 1);
  ASSERT_EQ(u.rows(), 3u);
  ASSERT_EQ(u.cols(), 8u);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = 0; k < 4; ++k) {
        const std::size_t idx[] = {i, j, k};
        EXPECT_EQ(u(j, i + 2 * k), t.at(idx));
      }
  std::vector<double> a(t.values().begin(), t.values().end());
  std::vector<double> b(u.values().begin(), u.values().end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
}

TEST(Unfold, ModeOutOfRange) {
  Gen g(3);
  EXPECT_THROW(unfold(g.tensor({2, 2, 2}), 3), ArgumentError);
}

TEST(Unfold, FoldRoundTripUpToOrderFour) {
  Gen g(4);
  for (int trial = 0; trial < 60; ++trial) {
    const auto shape = g.shape(g.index(2, 4), 1, 4);
    const DenseTensor t = g.tensor(shape);
    for (std::size_t mode = 0; mode < shape.size(); ++mode) {
      const Matrix u = unfold(t, mode);
      for (std::size_t f = 0; f < t.size(); ++f) {
        const auto idx = test::unravel(f, shape);
        ASSERT_EQ(u(idx[mode], unfold_column(idx, shape, mode)), t.values()[f]);
      }
      EXPECT_EQ(fold(u, mode, shape), t);
    }
  }
}

TEST(KhatriRao, SingleMatrixIsIdentity) {
  Gen g(5);
  const Matrix a = g.matrix(3, 2);
  const Matrix ms[] = {a};
  EXPECT_EQ(khatri_rao(ms), a);
}

TEST(KhatriRao, OneColumnPair) {
  const Matrix ms[] = {Matrix(2, 1, {1, 2}), Matrix(2, 1, {3, 4})};
  EXPECT_EQ(khatri_rao(ms), Matrix(4, 1, {3, 4, 6, 8}));
}

TEST(KhatriRao, MatchesOuterProducts) {
  Gen g(6);
  const Matrix a = g.matrix(2, 2), b = g.matrix(2, 2);
  const Matrix ms[] = {a, b};
  const Matrix k = khatri_rao(ms);
  ASSERT_EQ(k.rows(), 4u);
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t p = 0; p < 2; ++p)
      for (std::size_t q = 0; q < 2; ++q) EXPECT_EQ(k(p * 2 + q, j), a(p, j) * b(q, j));
}

TEST(KhatriRao, ColumnMismatch) {
  const Matrix ms[] = {Matrix(2, 2), Matrix(2, 3)};
  EXPECT_THROW(khatri_rao(ms), ArgumentError);
  EXPECT_THROW(khatri_rao(std::span<const Matrix>{}), ArgumentError);
}

TEST(CpReconstruct, OnesOuterProduct) {
  const DenseTensor t = cp_reconstruct(FactorSet({Matrix(2, 1, 1.0), Matrix(2, 1, 1.0), Matrix(2, 1, 1.0)}));
  EXPECT_EQ(t.shape(), (std::vector<std::size_t>{2, 2, 2}));
  for (double v : t.values()) EXPECT_EQ(v, 1.0);
}

TEST(CpReconstruct, OrderTwoIsMatrixProduct) {
  Gen g(7);
  const Matrix a = g.matrix(4, 3), s = g.matrix(3, 5);
  const Matrix x = cp_reconstruct(FactorSet({a, s.transposed()})).to_matrix();
  EXPECT_LT(test::max_abs_diff(x.values(), test::naive_matmul(a, s).values()), 1e-14);
}

TEST(CpReconstruct, MatchesTripleLoop) {
  Gen g(8);
  const auto f = g.factors({3, 4, 2}, 2);
  const DenseTensor t = cp_reconstruct(FactorSet(f));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t k = 0; k < 2; ++k) {
        double s = 0.0;
        for (std::size_t c = 0; c < 2; ++c) s += f[0](i, c) * f[1](j, c) * f[2](k, c);
        const std::size_t idx[] = {i, j, k};
        EXPECT_NEAR(t.at(idx), s, 1e-15);
      }
}

TEST(CpReconstruct, MatricizationIdentity) {
  Gen g(9);
  for (int trial = 0; trial < 40; ++trial) {
    const auto shape = g.shape(g.index(2, 4), 1, 4);
    const auto f = g.factors(shape, g.index(1, 3));
    const DenseTensor t = cp_reconstruct(FactorSet(f));
    for (std::size_t mode = 0; mode < shape.size(); ++mode) {
      const Matrix lhs = unfold(t, mode);
      const Matrix rhs = test::naive_matmul(f[mode], khatri_rao_except(f, mode).transposed());
      EXPECT_LT(test::max_abs_diff(lhs.values(), rhs.values()), 1e-10);
    }
  }
}

TEST(CpReconstruct, LinearInEachFactor) {
  Gen g(10);
  for (int trial = 0; trial < 20; ++trial) {
    const auto shape = g.shape(3, 1, 4);
    const std::size_t r = g.index(1, 3);
    const auto f = g.factors(shape, r);
    const std::size_t mode = g.index(0, 2);
    const Matrix extra = g.matrix(shape[mode], r);
    auto fg = f, fs = f;
    fg[mode] = extra;
    for (std::size_t i = 0; i < extra.size(); ++i) fs[mode].values()[i] += extra.values()[i];
    const DenseTensor a = cp_reconstruct(FactorSet(f)), b = cp_reconstruct(FactorSet(fg));
    const DenseTensor sum = cp_reconstruct(FactorSet(fs));
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_NEAR(sum.values()[i], a.values()[i] + b.values()[i], 1e-10);
    }
  }
}

TEST(RelativeLoss, Examples) {
  Gen g(11);
  const DenseTensor x = g.tensor({3, 4});
  EXPECT_EQ(relative_loss(x, x), 0.0);
  EXPECT_DOUBLE_EQ(relative_loss(x, DenseTensor({3, 4}, std::vector<double>(12, 0.0))), 1.0);
  const DenseTensor v({2, 1}, {3, 4});
  EXPECT_EQ(relative_loss(v, DenseTensor({2, 1}, {0, 0})), 1.0);
  EXPECT_DOUBLE_EQ(relative_loss(v, DenseTensor({2, 1}, {3, 0})), 0.8);
}

TEST(RelativeLoss, Errors) {
  EXPECT_THROW(relative_loss(DenseTensor({2, 1}, {1, 1}), DenseTensor({1, 2}, {1, 1})), ArgumentError);
  EXPECT_THROW(relative_loss(DenseTensor({2, 1}, {0, 0}), DenseTensor({2, 1}, {1, 1})), ArgumentError);
}

TEST(RelativeLoss, IsDistanceOverNorm) {
  Gen g(12);
  for (int trial = 0; trial < 20; ++trial) {
    const auto shape = g.shape(3, 1, 5);
    const DenseTensor x = g.tensor(shape), y = g.tensor(shape);
    EXPECT_EQ(relative_loss(x, y), frobenius_distance(x, y) / frobenius(x));
  }
}

TEST(PermuteModes, MovesIndices) {
  Gen g(13);
  const DenseTensor t = g.tensor({2, 3, 4});
  const std::size_t perm[] = {2, 0, 1};
  const DenseTensor p = permute_modes(t, perm);
  EXPECT_EQ(p.shape(), (std::vector<std::size_t>{4, 2, 3}));
  for (std::size_t f = 0; f < t.size(); ++f) {
    const auto idx = test::unravel(f, t.shape());
    const std::size_t pidx[] = {idx[2], idx[0], idx[1]};
    EXPECT_EQ(p.at(pidx), t.values()[f]);
  }
  const std::size_t bad[] = {0, 0, 1};
  EXPECT_THROW(permute_modes(t, bad), ArgumentError);
}

}  // namespace
}  // namespace mhntf
