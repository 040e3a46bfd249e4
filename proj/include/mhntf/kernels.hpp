#pragma once

// Hot loops used by the solvers. Two implementations share each signature:
//
//   mhntf::kernels    OpenMP-parallel, used by the library
//   mhntf::reference  plain serial loops, kept as the test oracle and as the
//                     benchmark baseline
//
// Parallel kernels split work over output rows (or fixed-size blocks for
// reductions) and combine partial results in a fixed order, so their output
// does not depend on the thread count.

#include <cstddef>
#include <span>

#include "mhntf/tensor.hpp"

namespace mhntf::kernels {

/// a * b
Matrix matmul(const Matrix& a, const Matrix& b);
/// a^T * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a * b^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// a^T * a
Matrix gram(const Matrix& a);
/// Elementwise product.
Matrix hadamard(const Matrix& a, const Matrix& b);

/// x <- x * num / (den + eps), elementwise.
void multiplicative_update(Matrix& x, const Matrix& num, const Matrix& den, double eps);

/// unfold(t, mode) * khatri_rao_except(factors, mode), without materializing
/// either operand.
Matrix mttkrp(const DenseTensor& t, std::span<const Matrix> factors, std::size_t mode);

/// Flat row-major values of [[factors]].
std::vector<double> cp_values(std::span<const Matrix> factors);

/// sum_i (x_i - y_i)^2 over two equally sized arrays.
double squared_distance(std::span<const double> x, std::span<const double> y);
/// sum_i x_i^2, blocked exactly like squared_distance.
double squared_norm(std::span<const double> x);

/// ||t - [[factors]]||_F^2.
double cp_residual_squared(const DenseTensor& t, std::span<const Matrix> factors);

}  // namespace mhntf::kernels

namespace mhntf::reference {

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix gram(const Matrix& a);
Matrix hadamard(const Matrix& a, const Matrix& b);
void multiplicative_update(Matrix& x, const Matrix& num, const Matrix& den, double eps);
/// Explicit unfold followed by explicit Khatri-Rao and a product.
Matrix mttkrp(const DenseTensor& t, std::span<const Matrix> factors, std::size_t mode);
/// Direct sum over rank-one terms for every index.
std::vector<double> cp_values(std::span<const Matrix> factors);
double squared_distance(std::span<const double> x, std::span<const double> y);
double squared_norm(std::span<const double> x);
double cp_residual_squared(const DenseTensor& t, std::span<const Matrix> factors);

}  // namespace mhntf::reference
