#pragma once

// Random case generators for the property tests, independent of the library's
// own Rng so that test inputs do not share a stream with initialization.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include <unistd.h>

#include "mhntf/tensor.hpp"

namespace mhntf::test {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : engine_(seed ^ 0x5bd1e995u) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return lo + (hi - lo) * (static_cast<double>(engine_() >> 11) * 0x1.0p-53);
  }

  // Inclusive range.
  std::size_t index(std::size_t lo, std::size_t hi) { return lo + engine_() % (hi - lo + 1); }

  Matrix matrix(std::size_t rows, std::size_t cols, double lo = 0.0, double hi = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.values()) v = uniform(lo, hi);
    return m;
  }

  std::vector<std::size_t> shape(std::size_t order, std::size_t lo, std::size_t hi) {
    std::vector<std::size_t> s(order);
    for (auto& n : s) n = index(lo, hi);
    return s;
  }

  DenseTensor tensor(const std::vector<std::size_t>& shape, double lo = 0.0, double hi = 1.0) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    std::vector<double> v(n);
    for (double& x : v) x = uniform(lo, hi);
    return DenseTensor(shape, std::move(v));
  }

  std::vector<Matrix> factors(const std::vector<std::size_t>& shape, std::size_t r, double lo = 0.0,
                              double hi = 1.0) {
    std::vector<Matrix> f;
    for (auto n : shape) f.push_back(matrix(n, r, lo, hi));
    return f;
  }

 private:
  std::mt19937_64 engine_;
};

// Row-major multi-index of a flat offset.
inline std::vector<std::size_t> unravel(std::size_t flat, const std::vector<std::size_t>& shape) {
  std::vector<std::size_t> idx(shape.size());
  for (std::size_t m = shape.size(); m-- > 0;) {
    idx[m] = flat % shape[m];
    flat /= shape[m];
  }
  return idx;
}

// Sum over rank-one terms, written independently of the library.
inline double cp_entry(const std::vector<Matrix>& f, const std::vector<std::size_t>& idx) {
  double s = 0.0;
  for (std::size_t j = 0; j < f[0].cols(); ++j) {
    double p = 1.0;
    for (std::size_t m = 0; m < f.size(); ++m) p *= f[m](idx[m], j);
    s += p;
  }
  return s;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      for (std::size_t k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
  return c;
}

inline double frob(const Matrix& m) {
  double s = 0.0;
  for (double v : m.values()) s += v * v;
  return std::sqrt(s);
}

}  // namespace mhntf::test

namespace mhntf::test {

// Block-diagonal 30x60 matrix with three classes: rows 10c..10c+9 and columns
// 20c..20c+19 hold positive values, everything else is zero.
struct LabeledToy {
  Matrix x;
  std::vector<std::size_t> truth;
};

inline LabeledToy separable_toy(std::uint64_t seed = 1) {
  Gen g(seed);
  LabeledToy toy{Matrix(30, 60), std::vector<std::size_t>(60)};
  for (std::size_t j = 0; j < 60; ++j) {
    const std::size_t c = j / 20;
    toy.truth[j] = c;
    for (std::size_t i = 10 * c; i < 10 * c + 10; ++i) toy.x(i, j) = g.uniform(0.5, 1.5);
  }
  return toy;
}

// Nested block matrix: 3 coarse diagonal blocks (8 rows x 10 columns) of
// ones, each holding 2 fine diagonal blocks (4 x 5) raised by 0.05.
inline Matrix nested_blocks() {
  Matrix x(24, 30);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 8 * c; i < 8 * c + 8; ++i)
      for (std::size_t j = 10 * c; j < 10 * c + 10; ++j) x(i, j) = 1.0 + ((i / 4 == j / 5) ? 0.05 : 0.0);
  return x;
}

// Exact rank-1 tensor written as a rank-2 model with duplicated columns:
// T = [[u 1^T, v 1^T, z 1^T]] = 2 u o v o z.
struct DuplicatedRankOne {
  DenseTensor t;
  FactorSet f;
};

inline DuplicatedRankOne duplicated_rank_one(std::uint64_t seed) {
  Gen g(seed);
  std::vector<Matrix> f;
  for (std::size_t n : {4u, 3u, 5u}) {
    Matrix m(n, 2);
    for (std::size_t i = 0; i < n; ++i) m(i, 0) = m(i, 1) = g.uniform(0.2, 1.0);
    f.push_back(m);
  }
  FactorSet fs(f);
  return {cp_reconstruct(fs), fs};
}

// Best objective of ||T - [[X_1 w, X_2 w, X_3 w]]||^2 over w on the grid
// {0, 0.05, .., 2}^2.
inline double grid_optimum(const DenseTensor& t, const FactorSet& f) {
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a <= 40; ++a)
    for (int b = 0; b <= 40; ++b) {
      const double w0 = 0.05 * a, w1 = 0.05 * b;
      double d = 0.0;
      for (std::size_t flat = 0; flat < t.size(); ++flat) {
        const auto idx = unravel(flat, t.shape());
        double p = 1.0;
        for (std::size_t m = 0; m < 3; ++m) p *= f.factor(m)(idx[m], 0) * w0 + f.factor(m)(idx[m], 1) * w1;
        d += (t.values()[flat] - p) * (t.values()[flat] - p);
      }
      best = std::min(best, d);
    }
  return best;
}

}  // namespace mhntf::test

#include <filesystem>
#include <fstream>
#include <string>

namespace mhntf::test {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("mhntf_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

  std::filesystem::path write(const std::string& name, const std::string& content) const {
    const auto p = path_ / name;
    std::filesystem::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << content;
    return p;
  }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace mhntf::test
