#include "mhntf/factorization.hpp"

#include <cmath>
#include <string>

#include "mhntf/error.hpp"
#include "mhntf/kernels.hpp"
#include "mhntf/rng.hpp"

namespace mhntf {

namespace {

void require_nonnegative(const Matrix& x, const char* what) {
  for (double v : x.values()) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ArgumentError(std::string(what) + " must be finite and nonnegative");
    }
  }
}

double residual(const Matrix& x, const Matrix& a, const Matrix& s) {
  return kernels::squared_distance(x.values(), kernels::matmul(a, s).values());
}

// A <- A * (X S^T) / (A (S S^T) + eps)
void update_dictionary(const Matrix& x, Matrix& a, const Matrix& s, double eps) {
  const Matrix num = kernels::matmul_nt(x, s);
  const Matrix den = kernels::matmul(a, kernels::matmul_nt(s, s));
  kernels::multiplicative_update(a, num, den, eps);
}

// S <- S * (A^T X) / ((A^T A) S + eps)
void update_coefficients(const Matrix& x, const Matrix& a, Matrix& s, double eps) {
  const Matrix num = kernels::matmul_tn(a, x);
  const Matrix den = kernels::matmul(kernels::gram(a), s);
  kernels::multiplicative_update(s, num, den, eps);
}

Matrix add_scaled(const Matrix& a, double lambda, const Matrix& b) {
  Matrix out = a;
  auto o = out.values();
  auto v = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += lambda * v[i];
  return out;
}

}  // namespace

void FitOptions::validate() const {
  if (max_iters < 1) throw ArgumentError("max_iters must be at least 1");
  if (!(epsilon > 0.0)) throw ArgumentError("epsilon must be positive");
  if (!(tol >= 0.0)) throw ArgumentError("tol must be nonnegative");
}

bool converged(double prev, double cur, double tol) {
  if (prev <= 0.0) return true;
  return (prev - cur) < tol * prev;
}

std::vector<Matrix> random_factors(std::span<const std::size_t> shape, std::size_t r,
                                   std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Matrix> out;
  out.reserve(shape.size());
  for (std::size_t n : shape) {
    Matrix f(n, r);
    for (double& v : f.values()) v = rng.uniform();
    out.push_back(std::move(f));
  }
  return out;
}

NmfResult nmf(const Matrix& x, std::size_t r, const FitOptions& opts) {
  opts.validate();
  if (r < 1 || r > std::min(x.rows(), x.cols())) {
    throw ArgumentError("nmf rank " + std::to_string(r) + " must satisfy 1 <= r <= min(m, n) = " +
                        std::to_string(std::min(x.rows(), x.cols())));
  }
  require_nonnegative(x, "nmf input");

  const std::size_t shape[] = {x.rows(), x.cols()};
  auto init = random_factors(shape, r, opts.seed);
  NmfResult res{std::move(init[0]), init[1].transposed(), {}};
  res.loss_history.push_back(residual(x, res.a, res.s));
  for (int it = 0; it < opts.max_iters; ++it) {
    update_dictionary(x, res.a, res.s, opts.epsilon);
    update_coefficients(x, res.a, res.s, opts.epsilon);
    const double loss = residual(x, res.a, res.s);
    const double prev = res.loss_history.back();
    res.loss_history.push_back(loss);
    if (converged(prev, loss, opts.tol)) break;
  }
  return res;
}

NcpdResult ncpd(const DenseTensor& t, std::size_t r, const FitOptions& opts) {
  opts.validate();
  if (r < 1) throw ArgumentError("ncpd rank must be at least 1");
  const std::size_t k = t.order();
  std::vector<Matrix> f = random_factors(t.shape(), r, opts.seed);

  std::vector<double> history{kernels::cp_residual_squared(t, f)};
  for (int it = 0; it < opts.max_iters; ++it) {
    for (std::size_t mode = 0; mode < k; ++mode) {
      // K^T K is the Hadamard product of the other factors' Gram matrices.
      Matrix kk(r, r, 1.0);
      for (std::size_t m = 0; m < k; ++m) {
        if (m != mode) kk = kernels::hadamard(kk, kernels::gram(f[m]));
      }
      const Matrix num = kernels::mttkrp(t, f, mode);
      const Matrix den = kernels::matmul(f[mode], kk);
      kernels::multiplicative_update(f[mode], num, den, opts.epsilon);
    }
    const double loss = kernels::cp_residual_squared(t, f);
    const double prev = history.back();
    history.push_back(loss);
    if (converged(prev, loss, opts.tol)) break;
  }
  return {FactorSet(std::move(f)), std::move(history)};
}

double joint_objective(const Matrix& x, const Matrix& y, const Matrix& a, const Matrix& b,
                       const Matrix& s, double lambda) {
  return residual(x, a, s) + lambda * residual(y, b, s);
}

void supervised_nmf_step(const Matrix& x, const Matrix& y, Matrix& a, Matrix& b, Matrix& s,
                         double lambda, double eps) {
  if (!(lambda >= 0.0)) throw ArgumentError("lambda must be nonnegative");
  if (a.rows() != x.rows() || a.cols() != s.rows() || s.cols() != x.cols()) {
    throw ArgumentError("supervised step: X, A, S shapes do not conform");
  }
  if (y.cols() != x.cols() || b.rows() != y.rows() || b.cols() != s.rows()) {
    throw ArgumentError("supervised step: Y, B, S shapes do not conform");
  }
  update_dictionary(x, a, s, eps);
  update_dictionary(y, b, s, eps);

  const Matrix num = add_scaled(kernels::matmul_tn(a, x), lambda, kernels::matmul_tn(b, y));
  const Matrix den = add_scaled(kernels::matmul(kernels::gram(a), s), lambda,
                                kernels::matmul(kernels::gram(b), s));
  kernels::multiplicative_update(s, num, den, eps);
}

SupervisedNmfResult supervised_nmf(const Matrix& x, const Matrix& y, std::size_t r, double lambda,
                                   const FitOptions& opts) {
  opts.validate();
  if (r < 1 || r > std::min(x.rows(), x.cols())) {
    throw ArgumentError("supervised nmf rank must satisfy 1 <= r <= min(m, n)");
  }
  if (y.cols() != x.cols()) throw ArgumentError("label matrix must have one column per sample");
  require_nonnegative(x, "data matrix");
  require_nonnegative(y, "label matrix");

  Rng rng(opts.seed);
  Matrix a(x.rows(), r);
  for (double& v : a.values()) v = rng.uniform();
  Matrix st(x.cols(), r);
  for (double& v : st.values()) v = rng.uniform();
  Matrix b(y.rows(), r);
  for (double& v : b.values()) v = rng.uniform();

  SupervisedNmfResult res{std::move(a), std::move(b), st.transposed(), {}};
  res.loss_history.push_back(joint_objective(x, y, res.a, res.b, res.s, lambda));
  for (int it = 0; it < opts.max_iters; ++it) {
    supervised_nmf_step(x, y, res.a, res.b, res.s, lambda, opts.epsilon);
    const double loss = joint_objective(x, y, res.a, res.b, res.s, lambda);
    const double prev = res.loss_history.back();
    res.loss_history.push_back(loss);
    if (converged(prev, loss, opts.tol)) break;
  }
  return res;
}

Matrix fit_dictionary(const Matrix& y, const Matrix& s, Matrix b, const FitOptions& opts) {
  opts.validate();
  if (b.rows() != y.rows() || b.cols() != s.rows() || s.cols() != y.cols()) {
    throw ArgumentError("fit_dictionary: shapes do not conform");
  }
  double prev = residual(y, b, s);
  for (int it = 0; it < opts.max_iters; ++it) {
    update_dictionary(y, b, s, opts.epsilon);
    const double loss = residual(y, b, s);
    if (converged(prev, loss, opts.tol)) break;
    prev = loss;
  }
  return b;
}

}  // namespace mhntf
