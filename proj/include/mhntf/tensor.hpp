#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mhntf {

/// Dense row-major matrix of doubles. No sign constraint; the solvers keep
/// their iterates nonnegative themselves.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  Matrix transposed() const;
  double min() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Order-k (k >= 2) nonnegative dense tensor, row-major with the last mode
/// varying fastest. Immutable after construction.
class DenseTensor {
 public:
  DenseTensor(std::vector<std::size_t> shape, std::vector<double> values);
  /// Order-2 view of a nonnegative matrix.
  static DenseTensor from_matrix(const Matrix& m);

  std::size_t order() const noexcept { return shape_.size(); }
  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t dim(std::size_t mode) const { return shape_.at(mode); }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }

  /// Multi-index to flat offset.
  std::size_t offset(std::span<const std::size_t> index) const;
  double at(std::span<const std::size_t> index) const { return values_[offset(index)]; }

  Matrix to_matrix() const;

  bool operator==(const DenseTensor&) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

/// Factor matrices of a rank-r CP model, factor i of shape n_i x r.
class FactorSet {
 public:
  explicit FactorSet(std::vector<Matrix> factors);

  std::size_t rank() const noexcept { return rank_; }
  std::size_t order() const noexcept { return factors_.size(); }
  const Matrix& factor(std::size_t mode) const { return factors_.at(mode); }
  const std::vector<Matrix>& factors() const noexcept { return factors_; }
  std::vector<std::size_t> shape() const;

  bool operator==(const FactorSet&) const = default;

 private:
  std::size_t rank_ = 0;
  std::vector<Matrix> factors_;
};

/// Mode-`mode` matricization (0-based mode). Column index of entry
/// (i_1..i_k) is sum over m != mode of i_m * J_m, J_m = prod of n_l for
/// l < m, l != mode: the first remaining mode varies fastest.
Matrix unfold(const DenseTensor& t, std::size_t mode);

/// Inverse of unfold for the given full shape.
DenseTensor fold(const Matrix& m, std::size_t mode, std::vector<std::size_t> shape);

/// Column-wise Kronecker product. In the output, the row index of the last
/// matrix varies fastest.
Matrix khatri_rao(std::span<const Matrix> ms);

/// Khatri-Rao of every factor except `mode`, taken in reverse mode order so
/// that unfold(cp_reconstruct(F), mode) == F_mode * khatri_rao_except(F, mode)^T.
Matrix khatri_rao_except(std::span<const Matrix> factors, std::size_t mode);

DenseTensor cp_reconstruct(const FactorSet& f);

double frobenius(const DenseTensor& t);
/// ||x - xhat||_F.
double frobenius_distance(const DenseTensor& x, const DenseTensor& xhat);
/// ||x - xhat||_F / ||x||_F.
double relative_loss(const DenseTensor& x, const DenseTensor& xhat);

/// Tensor with modes reordered: output mode m is input mode perm[m].
DenseTensor permute_modes(const DenseTensor& t, std::span<const std::size_t> perm);

}  // namespace mhntf
