#include "mhntf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "mhntf/error.hpp"
#include "mhntf/kernels.hpp"

namespace mhntf {

namespace {

std::size_t product(std::span<const std::size_t> dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

// Advances a row-major multi-index; returns false after the last index.
bool next_index(std::vector<std::size_t>& idx, std::span<const std::size_t> shape) {
  for (std::size_t m = shape.size(); m-- > 0;) {
    if (++idx[m] < shape[m]) return true;
    idx[m] = 0;
  }
  return false;
}

// Strides of the unfolding column index for each mode other than `mode`.
std::vector<std::size_t> unfold_strides(std::span<const std::size_t> shape, std::size_t mode) {
  std::vector<std::size_t> strides(shape.size(), 0);
  std::size_t s = 1;
  for (std::size_t m = 0; m < shape.size(); ++m) {
    if (m == mode) continue;
    strides[m] = s;
    s *= shape[m];
  }
  return strides;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ArgumentError("matrix data length " + std::to_string(data_.size()) +
                        " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

double Matrix::min() const {
  if (data_.empty()) return 0.0;
  return *std::min_element(data_.begin(), data_.end());
}

DenseTensor::DenseTensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_.size() < 2) throw ArgumentError("tensor order must be at least 2");
  for (std::size_t n : shape_) {
    if (n == 0) throw ArgumentError("tensor dimensions must be positive");
  }
  if (values_.size() != product(shape_)) {
    throw ArgumentError("tensor has " + std::to_string(values_.size()) +
                        " values but its shape holds " + std::to_string(product(shape_)));
  }
  for (double v : values_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ArgumentError("tensor entries must be finite and nonnegative");
    }
  }
}

DenseTensor DenseTensor::from_matrix(const Matrix& m) {
  auto v = m.values();
  return DenseTensor({m.rows(), m.cols()}, std::vector<double>(v.begin(), v.end()));
}

std::size_t DenseTensor::offset(std::span<const std::size_t> index) const {
  if (index.size() != shape_.size()) throw ArgumentError("index order mismatch");
  std::size_t off = 0;
  for (std::size_t m = 0; m < shape_.size(); ++m) {
    if (index[m] >= shape_[m]) throw ArgumentError("index out of range");
    off = off * shape_[m] + index[m];
  }
  return off;
}

Matrix DenseTensor::to_matrix() const {
  if (order() != 2) throw ArgumentError("to_matrix requires an order-2 tensor");
  return Matrix(shape_[0], shape_[1], values_);
}

FactorSet::FactorSet(std::vector<Matrix> factors) : factors_(std::move(factors)) {
  if (factors_.empty()) throw ArgumentError("factor set needs at least one factor");
  rank_ = factors_.front().cols();
  if (rank_ == 0) throw ArgumentError("factor rank must be positive");
  for (const Matrix& f : factors_) {
    if (f.cols() != rank_) throw ArgumentError("factor matrices must share a column count");
    if (f.rows() == 0) throw ArgumentError("factor matrices must have rows");
    for (double v : f.values()) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw ArgumentError("factor entries must be finite and nonnegative");
      }
    }
  }
}

std::vector<std::size_t> FactorSet::shape() const {
  std::vector<std::size_t> s;
  s.reserve(factors_.size());
  for (const Matrix& f : factors_) s.push_back(f.rows());
  return s;
}

Matrix unfold(const DenseTensor& t, std::size_t mode) {
  if (mode >= t.order()) {
    throw ArgumentError("mode " + std::to_string(mode) + " out of range for order " +
                        std::to_string(t.order()));
  }
  const auto& shape = t.shape();
  const auto strides = unfold_strides(shape, mode);
  Matrix out(shape[mode], t.size() / shape[mode]);
  std::vector<std::size_t> idx(shape.size(), 0);
  auto vals = t.values();
  std::size_t flat = 0;
  do {
    std::size_t col = 0;
    for (std::size_t m = 0; m < shape.size(); ++m) col += idx[m] * strides[m];
    out(idx[mode], col) = vals[flat++];
  } while (next_index(idx, shape));
  return out;
}

DenseTensor fold(const Matrix& m, std::size_t mode, std::vector<std::size_t> shape) {
  if (mode >= shape.size()) throw ArgumentError("mode out of range");
  const std::size_t total = product(shape);
  if (m.rows() != shape[mode] || m.rows() * m.cols() != total) {
    throw ArgumentError("matrix shape does not match the folded shape");
  }
  const auto strides = unfold_strides(shape, mode);
  std::vector<double> values(total);
  std::vector<std::size_t> idx(shape.size(), 0);
  std::size_t flat = 0;
  do {
    std::size_t col = 0;
    for (std::size_t k = 0; k < shape.size(); ++k) col += idx[k] * strides[k];
    values[flat++] = m(idx[mode], col);
  } while (next_index(idx, shape));
  return DenseTensor(std::move(shape), std::move(values));
}

Matrix khatri_rao(std::span<const Matrix> ms) {
  if (ms.empty()) throw ArgumentError("khatri_rao needs at least one matrix");
  const std::size_t r = ms.front().cols();
  for (const Matrix& m : ms) {
    if (m.cols() != r) throw ArgumentError("khatri_rao inputs must share a column count");
  }
  // Build up the product one factor at a time; the newest factor's row index
  // becomes the fastest-varying one.
  Matrix acc = ms.front();
  for (std::size_t f = 1; f < ms.size(); ++f) {
    const Matrix& b = ms[f];
    Matrix next(acc.rows() * b.rows(), r);
    for (std::size_t i = 0; i < acc.rows(); ++i)
      for (std::size_t k = 0; k < b.rows(); ++k)
        for (std::size_t j = 0; j < r; ++j) next(i * b.rows() + k, j) = acc(i, j) * b(k, j);
    acc = std::move(next);
  }
  return acc;
}

Matrix khatri_rao_except(std::span<const Matrix> factors, std::size_t mode) {
  if (mode >= factors.size()) throw ArgumentError("mode out of range");
  std::vector<Matrix> others;
  for (std::size_t m = factors.size(); m-- > 0;) {
    if (m != mode) others.push_back(factors[m]);
  }
  return khatri_rao(others);
}

DenseTensor cp_reconstruct(const FactorSet& f) {
  return DenseTensor(f.shape(), kernels::cp_values(f.factors()));
}

double frobenius(const DenseTensor& t) { return std::sqrt(kernels::squared_norm(t.values())); }

double frobenius_distance(const DenseTensor& x, const DenseTensor& xhat) {
  if (x.shape() != xhat.shape()) throw ArgumentError("tensor shapes differ");
  return std::sqrt(kernels::squared_distance(x.values(), xhat.values()));
}

double relative_loss(const DenseTensor& x, const DenseTensor& xhat) {
  if (x.shape() != xhat.shape()) throw ArgumentError("tensor shapes differ");
  const double norm = frobenius(x);
  if (norm == 0.0) throw ArgumentError("relative loss undefined for a zero tensor");
  return frobenius_distance(x, xhat) / norm;
}

DenseTensor permute_modes(const DenseTensor& t, std::span<const std::size_t> perm) {
  const std::size_t k = t.order();
  if (perm.size() != k) throw ArgumentError("permutation length must equal tensor order");
  std::vector<bool> seen(k, false);
  for (std::size_t p : perm) {
    if (p >= k || seen[p]) throw ArgumentError("not a permutation of the tensor modes");
    seen[p] = true;
  }
  std::vector<std::size_t> out_shape(k);
  for (std::size_t m = 0; m < k; ++m) out_shape[m] = t.dim(perm[m]);

  std::vector<double> values(t.size());
  std::vector<std::size_t> out_idx(k, 0);
  std::vector<std::size_t> in_idx(k, 0);
  std::size_t flat = 0;
  do {
    for (std::size_t m = 0; m < k; ++m) in_idx[perm[m]] = out_idx[m];
    values[flat++] = t.at(in_idx);
  } while (next_index(out_idx, out_shape));
  return DenseTensor(std::move(out_shape), std::move(values));
}

}  // namespace mhntf
