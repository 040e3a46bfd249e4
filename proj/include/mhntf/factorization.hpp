#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mhntf/tensor.hpp"

namespace mhntf {

struct FitOptions {
  int max_iters = 500;
  /// Early stop once (prev - cur) / prev < tol for the tracked objective.
  double tol = 1e-6;
  std::uint64_t seed = 0;
  /// Added to every multiplicative-update denominator.
  double epsilon = 1e-12;

  /// Throws ArgumentError unless epsilon > 0, max_iters >= 1 and tol >= 0.
  void validate() const;
};

struct NmfResult {
  Matrix a;  ///< m x r dictionary
  Matrix s;  ///< r x n coefficients
  /// ||X - AS||_F^2 at initialization, then after every iteration.
  std::vector<double> loss_history;
};

struct NcpdResult {
  FactorSet factors;
  /// ||T - [[X_1..X_k]]||_F^2 at initialization, then after every iteration.
  std::vector<double> loss_history;
};

/// Random factors in (0,1) for an n_1 x .. x n_k shape at rank r, drawn
/// factor by factor in mode order, each row-major.
std::vector<Matrix> random_factors(std::span<const std::size_t> shape, std::size_t r, std::uint64_t seed);

/// Lee-Seung multiplicative updates for min ||X - AS||_F^2, A,S >= 0.
/// A is drawn first (m x r row-major), then S^T (n x r row-major), matching
/// the order-2 initialization of ncpd.
NmfResult nmf(const Matrix& x, std::size_t r, const FitOptions& opts);

/// Nonnegative CP decomposition by per-mode multiplicative updates
/// X_i <- X_i * (T_(i) K_i) / (X_i (K_i^T K_i) + eps).
NcpdResult ncpd(const DenseTensor& t, std::size_t r, const FitOptions& opts);

/// Iteration driver shared by the solvers: true when the relative
/// improvement from prev to cur falls below tol.
bool converged(double prev, double cur, double tol);

/// ||X - AS||_F^2 + lambda ||Y - BS||_F^2
double joint_objective(const Matrix& x, const Matrix& y, const Matrix& a, const Matrix& b,
                       const Matrix& s, double lambda);

/// One multiplicative step on the joint objective: A against X, then B
/// against Y (both with the current S), then S against both terms.
void supervised_nmf_step(const Matrix& x, const Matrix& y, Matrix& a, Matrix& b, Matrix& s,
                         double lambda, double eps = 1e-12);

struct SupervisedNmfResult {
  Matrix a;
  Matrix b;  ///< c x r label dictionary
  Matrix s;
  std::vector<double> loss_history;  ///< joint objective
};

/// Alternates supervised_nmf_step until the joint objective stalls.
/// Initialization draws A and S exactly as nmf does, then B (c x r).
SupervisedNmfResult supervised_nmf(const Matrix& x, const Matrix& y, std::size_t r, double lambda,
                                   const FitOptions& opts);

/// Multiplicative updates on ||Y - BS||_F^2 over B only, S held fixed.
Matrix fit_dictionary(const Matrix& y, const Matrix& s, Matrix b, const FitOptions& opts);

}  // namespace mhntf
