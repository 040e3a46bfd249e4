#include "mhntf/kernels.hpp"

#include <algorithm>
#include <cstdint>
#include <string>

#include "mhntf/error.hpp"

namespace mhntf::kernels {

namespace {

// Below this many multiply-adds a kernel runs on the calling thread.
constexpr std::size_t kParallelWork = 1 << 15;
// Reductions are summed per block of this many entries, then the block sums
// are added in order.
constexpr std::size_t kReduceBlock = 4096;

void require(bool ok, const char* what) {
  if (!ok) throw ArgumentError(what);
}

// Row-wise products of the factors of modes [first, last) over the row-major
// index space of those modes, i.e. P[p, j] = prod_m F_m[i_m(p), j].
Matrix partial_row_products(std::span<const Matrix> factors, std::size_t first,
                            std::size_t last, std::size_t r) {
  Matrix acc(1, r, 1.0);
  for (std::size_t m = first; m < last; ++m) {
    const Matrix& f = factors[m];
    Matrix next(acc.rows() * f.rows(), r);
    const auto n = static_cast<std::int64_t>(acc.rows());
#pragma omp parallel for schedule(static) if (acc.rows() * f.rows() * r > kParallelWork)
    for (std::int64_t p = 0; p < n; ++p) {
      for (std::size_t q = 0; q < f.rows(); ++q) {
        for (std::size_t j = 0; j < r; ++j) {
          next(static_cast<std::size_t>(p) * f.rows() + q, j) =
              acc(static_cast<std::size_t>(p), j) * f(q, j);
        }
      }
    }
    acc = std::move(next);
  }
  return acc;
}

void check_factors_match(const DenseTensor& t, std::span<const Matrix> factors) {
  require(factors.size() == t.order(), "factor count must equal tensor order");
  const std::size_t r = factors.front().cols();
  for (std::size_t m = 0; m < factors.size(); ++m) {
    require(factors[m].rows() == t.dim(m), "factor rows must match tensor dimension");
    require(factors[m].cols() == r, "factors must share a column count");
  }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  const auto n = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static) if (a.rows() * a.cols() * b.cols() > kParallelWork)
  for (std::int64_t ii = 0; ii < n; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "matmul_tn: row counts differ");
  Matrix out(a.cols(), b.cols());
  const auto n = static_cast<std::int64_t>(a.cols());
#pragma omp parallel for schedule(static) if (a.rows() * a.cols() * b.cols() > kParallelWork)
  for (std::int64_t ii = 0; ii < n; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t k = 0; k < a.rows(); ++k) {
      const double aki = a(k, i);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aki * b(k, j);
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "matmul_nt: column counts differ");
  Matrix out(a.rows(), b.rows());
  const auto n = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static) if (a.rows() * a.cols() * b.rows() > kParallelWork)
  for (std::int64_t ii = 0; ii < n; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      out(i, j) = s;
    }
  }
  return out;
}

Matrix gram(const Matrix& a) { return matmul_tn(a, a); }

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard: shapes differ");
  Matrix out(a.rows(), a.cols());
  auto o = out.values();
  auto x = a.values();
  auto y = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  return out;
}

void multiplicative_update(Matrix& x, const Matrix& num, const Matrix& den, double eps) {
  require(x.rows() == num.rows() && x.cols() == num.cols() && x.rows() == den.rows() &&
              x.cols() == den.cols(),
          "multiplicative_update: shapes differ");
  auto v = x.values();
  auto nv = num.values();
  auto dv = den.values();
  const auto n = static_cast<std::int64_t>(v.size());
#pragma omp parallel for schedule(static) if (v.size() > kParallelWork)
  for (std::int64_t i = 0; i < n; ++i) v[i] *= nv[i] / (dv[i] + eps);
}

Matrix mttkrp(const DenseTensor& t, std::span<const Matrix> factors, std::size_t mode) {
  require(mode < t.order(), "mttkrp: mode out of range");
  check_factors_match(t, factors);
  const std::size_t r = factors.front().cols();
  const std::size_t n = t.dim(mode);
  // View t as (left, n, right) blocks around the target mode.
  const Matrix left = partial_row_products(factors, 0, mode, r);
  const Matrix right = partial_row_products(factors, mode + 1, factors.size(), r);
  const std::size_t nl = left.rows();
  const std::size_t nr = right.rows();
  auto vals = t.values();

  Matrix out(n, r);
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (t.size() * r > kParallelWork)
  for (std::int64_t aa = 0; aa < rows; ++aa) {
    const auto a = static_cast<std::size_t>(aa);
    if (nr == 1) {
      // Last mode: the right product is all ones.
      for (std::size_t l = 0; l < nl; ++l) {
        const double v = vals[l * n + a];
        if (v == 0.0) continue;
        for (std::size_t j = 0; j < r; ++j) out(a, j) += left(l, j) * v;
      }
      continue;
    }
    std::vector<double> partial(r);
    for (std::size_t l = 0; l < nl; ++l) {
      std::fill(partial.begin(), partial.end(), 0.0);
      const double* slab = vals.data() + (l * n + a) * nr;
      for (std::size_t q = 0; q < nr; ++q) {
        const double v = slab[q];
        if (v == 0.0) continue;
        for (std::size_t j = 0; j < r; ++j) partial[j] += v * right(q, j);
      }
      for (std::size_t j = 0; j < r; ++j) out(a, j) += left(l, j) * partial[j];
    }
  }
  return out;
}

std::vector<double> cp_values(std::span<const Matrix> factors) {
  require(factors.size() >= 2, "cp_values: need at least two factors");
  const std::size_t r = factors.front().cols();
  for (const Matrix& f : factors) require(f.cols() == r, "cp_values: factors must share a column count");
  const Matrix& last = factors.back();
  const Matrix head = partial_row_products(factors, 0, factors.size() - 1, r);
  Matrix out = matmul_nt(head, last);
  auto v = out.values();
  return {v.begin(), v.end()};
}

namespace {

template <class Term>
double blocked_sum(std::size_t n, Term term) {
  const std::size_t blocks = (n + kReduceBlock - 1) / kReduceBlock;
  std::vector<double> sums(blocks, 0.0);
  const auto nb = static_cast<std::int64_t>(blocks);
#pragma omp parallel for schedule(static) if (n > kParallelWork)
  for (std::int64_t bb = 0; bb < nb; ++bb) {
    const auto b = static_cast<std::size_t>(bb);
    const std::size_t end = std::min(n, (b + 1) * kReduceBlock);
    double s = 0.0;
    for (std::size_t i = b * kReduceBlock; i < end; ++i) s += term(i);
    sums[b] = s;
  }
  double total = 0.0;
  for (double s : sums) total += s;
  return total;
}

}  // namespace

double squared_distance(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "squared_distance: lengths differ");
  return blocked_sum(x.size(), [&](std::size_t i) {
    const double d = x[i] - y[i];
    return d * d;
  });
}

double squared_norm(std::span<const double> x) {
  return blocked_sum(x.size(), [&](std::size_t i) { return x[i] * x[i]; });
}

double cp_residual_squared(const DenseTensor& t, std::span<const Matrix> factors) {
  check_factors_match(t, factors);
  return squared_distance(t.values(), cp_values(factors));
}

}  // namespace mhntf::kernels

namespace mhntf::reference {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ArgumentError("matmul: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) { return matmul(a.transposed(), b); }

Matrix matmul_nt(const Matrix& a, const Matrix& b) { return matmul(a, b.transposed()); }

Matrix gram(const Matrix& a) { return matmul(a.transposed(), a); }

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ArgumentError("hadamard: shapes differ");
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) * b(i, j);
  return out;
}

void multiplicative_update(Matrix& x, const Matrix& num, const Matrix& den, double eps) {
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) *= num(i, j) / (den(i, j) + eps);
}

Matrix mttkrp(const DenseTensor& t, std::span<const Matrix> factors, std::size_t mode) {
  return matmul(unfold(t, mode), khatri_rao_except(factors, mode));
}

std::vector<double> cp_values(std::span<const Matrix> factors) {
  const std::size_t k = factors.size();
  const std::size_t r = factors.front().cols();
  std::size_t total = 1;
  for (const Matrix& f : factors) total *= f.rows();
  std::vector<double> out(total, 0.0);
  std::vector<std::size_t> idx(k, 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat;
    for (std::size_t m = k; m-- > 0;) {
      idx[m] = rem % factors[m].rows();
      rem /= factors[m].rows();
    }
    double s = 0.0;
    for (std::size_t j = 0; j < r; ++j) {
      double p = 1.0;
      for (std::size_t m = 0; m < k; ++m) p *= factors[m](idx[m], j);
      s += p;
    }
    out[flat] = s;
  }
  return out;
}

double squared_distance(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ArgumentError("squared_distance: lengths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return s;
}

double squared_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

double cp_residual_squared(const DenseTensor& t, std::span<const Matrix> factors) {
  return squared_distance(t.values(), cp_values(factors));
}

}  // namespace mhntf::reference
