#include "mhntf/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "mhntf/error.hpp"
#include "mhntf/kernels.hpp"
#include "mhntf/log.hpp"
#include "mhntf/rng.hpp"

namespace mhntf {

namespace {

// Increase in the shared-W objective tolerated when accepting a step.
constexpr double kAcceptSlack = 1e-12;
constexpr int kMaxHalvings = 30;

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform();
  return m;
}

Matrix candidate(const Matrix& w, const Matrix& num, const Matrix& den, double eps) {
  Matrix c = w;
  kernels::multiplicative_update(c, num, den, eps);
  return c;
}

Matrix mean(const std::vector<Matrix>& ms) {
  Matrix out(ms.front().rows(), ms.front().cols());
  auto o = out.values();
  for (const Matrix& m : ms) {
    auto v = m.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += v[i];
  }
  const double k = static_cast<double>(ms.size());
  for (double& v : o) v /= k;
  return out;
}

Matrix step_toward(const Matrix& from, const Matrix& to, double t) {
  Matrix out(from.rows(), from.cols());
  auto o = out.values();
  auto a = from.values();
  auto b = to.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a[i] + t * (b[i] - a[i]);
  return out;
}

using Objective = std::function<double(const Matrix&)>;
using Candidates = std::function<std::vector<Matrix>(const Matrix&)>;

// Averaged multiplicative updates with the monotone acceptance rule shared by
// the tensor and matrix forms of the W fit.
MixingResult fit_mixing(const Objective& objective, const Candidates& candidates, Matrix w,
                        const FitOptions& opts) {
  double current = objective(w);
  MixingResult res{w, {current}};
  for (int it = 0; it < opts.max_iters; ++it) {
    const std::vector<Matrix> cands = candidates(w);
    const Matrix avg = mean(cands);

    std::optional<std::pair<Matrix, double>> accepted;
    const double avg_obj = objective(avg);
    if (avg_obj <= current + kAcceptSlack) {
      accepted.emplace(avg, avg_obj);
    } else {
      std::size_t best = 0;
      double best_obj = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < cands.size(); ++i) {
        const double o = objective(cands[i]);
        if (o < best_obj) {
          best_obj = o;
          best = i;
        }
      }
      if (best_obj <= current + kAcceptSlack) {
        accepted.emplace(cands[best], best_obj);
      } else {
        double t = 0.5;
        for (int h = 0; h < kMaxHalvings && !accepted; ++h, t *= 0.5) {
          Matrix trial = step_toward(w, avg, t);
          const double o = objective(trial);
          if (o <= current) accepted.emplace(std::move(trial), o);
        }
      }
    }
    if (!accepted) break;

    const double prev = current;
    w = std::move(accepted->first);
    current = accepted->second;
    res.objective_history.push_back(current);
    if (converged(prev, current, opts.tol)) break;
  }
  res.w = std::move(w);
  return res;
}

Matrix hadamard_of_grams(const std::vector<Matrix>& g, std::size_t skip, std::size_t r) {
  Matrix kk(r, r, 1.0);
  for (std::size_t m = 0; m < g.size(); ++m) {
    if (m != skip) kk = kernels::hadamard(kk, kernels::gram(g[m]));
  }
  return kk;
}

void check_next_rank(std::size_t r, std::size_t r_next) {
  if (r_next < 1 || r_next >= r) {
    throw ArgumentError("next-layer rank " + std::to_string(r_next) +
                        " must satisfy 1 <= r_next < " + std::to_string(r));
  }
}

std::vector<Matrix> times_w(const FactorSet& f, const Matrix& w) {
  std::vector<Matrix> out;
  out.reserve(f.order());
  for (const Matrix& x : f.factors()) out.push_back(kernels::matmul(x, w));
  return out;
}

Layer make_layer(const DenseTensor& t, std::size_t rank, FactorSet f) {
  const auto [abs_loss, rel_loss] = layer_loss(t, f);
  return Layer{.rank = rank,
               .factors = std::move(f),
               .mixing = std::nullopt,
               .relative_loss = rel_loss,
               .absolute_loss = abs_loss,
               .label_dictionary = std::nullopt};
}

Layer make_matrix_layer(const Matrix& x, double norm, std::size_t rank, const Matrix& a,
                        const Matrix& s) {
  const double abs_loss = std::sqrt(kernels::squared_distance(x.values(), kernels::matmul(a, s).values()));
  return Layer{.rank = rank,
               .factors = FactorSet({a, s.transposed()}),
               .mixing = std::nullopt,
               .relative_loss = abs_loss / norm,
               .absolute_loss = abs_loss,
               .label_dictionary = std::nullopt};
}

double matrix_norm(const Matrix& x) {
  const double n = std::sqrt(kernels::squared_norm(x.values()));
  if (n == 0.0) throw ArgumentError("input matrix is all zeros");
  return n;
}

// [top; scale * bottom]
Matrix stack_rows(const Matrix& top, const Matrix& bottom, double scale) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  for (std::size_t i = 0; i < top.rows(); ++i)
    for (std::size_t j = 0; j < top.cols(); ++j) out(i, j) = top(i, j);
  for (std::size_t i = 0; i < bottom.rows(); ++i)
    for (std::size_t j = 0; j < top.cols(); ++j) out(top.rows() + i, j) = scale * bottom(i, j);
  return out;
}

void require_matrix_input(const Matrix& x) {
  for (double v : x.values()) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ArgumentError("input must be finite and nonnegative");
  }
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void HierarchySpec::validate() const {
  if (ranks.empty()) throw ArgumentError("hierarchy needs at least one rank");
  if (ranks.back() < 1) throw ArgumentError("ranks must be positive");
  for (std::size_t l = 1; l < ranks.size(); ++l) {
    if (ranks[l] >= ranks[l - 1]) throw ArgumentError("ranks must be strictly decreasing");
  }
  if (options.empty()) throw ArgumentError("hierarchy needs fit options");
  if (options.size() != 1 && options.size() != ranks.size()) {
    throw ArgumentError("give one FitOptions per layer or a single shared one");
  }
  for (const FitOptions& o : options) o.validate();
}

const FitOptions& HierarchySpec::layer_options(std::size_t layer) const {
  return options.size() == 1 ? options.front() : options.at(layer);
}

LabelMatrix LabelMatrix::one_hot(std::span<const std::size_t> truth, std::vector<std::string> classes) {
  Matrix y(classes.size(), truth.size());
  for (std::size_t n = 0; n < truth.size(); ++n) {
    if (truth[n] >= classes.size()) throw ArgumentError("class index out of range");
    y(truth[n], n) = 1.0;
  }
  std::vector<std::string> ids;
  ids.reserve(truth.size());
  for (std::size_t n = 0; n < truth.size(); ++n) ids.push_back(std::to_string(n));
  return LabelMatrix{std::move(y), std::move(classes), {truth.begin(), truth.end()}, std::move(ids)};
}

std::vector<std::size_t> LayerChain::ranks() const {
  std::vector<std::size_t> r;
  for (const Layer& l : layers) r.push_back(l.rank);
  return r;
}

std::pair<double, double> layer_loss(const DenseTensor& t, const FactorSet& f) {
  const double abs_loss = std::sqrt(kernels::cp_residual_squared(t, f.factors()));
  return {abs_loss, abs_loss / frobenius(t)};
}

double shared_w_objective(const DenseTensor& t, const FactorSet& f, const Matrix& w) {
  return kernels::cp_residual_squared(t, times_w(f, w));
}

MixingResult fit_w(const DenseTensor& t, const FactorSet& f, std::size_t r_next,
                   const FitOptions& opts) {
  opts.validate();
  check_next_rank(f.rank(), r_next);
  if (f.shape() != t.shape()) throw ArgumentError("factor shapes do not match the tensor");

  const std::size_t k = f.order();
  std::vector<Matrix> grams;
  for (const Matrix& x : f.factors()) grams.push_back(kernels::gram(x));

  auto objective = [&](const Matrix& w) { return shared_w_objective(t, f, w); };
  auto candidates = [&](const Matrix& w) {
    const std::vector<Matrix> g = times_w(f, w);
    std::vector<Matrix> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
      const Matrix num = kernels::matmul_tn(f.factor(i), kernels::mttkrp(t, g, i));
      const Matrix den =
          kernels::matmul(kernels::matmul(grams[i], w), hadamard_of_grams(g, i, r_next));
      out.push_back(candidate(w, num, den, opts.epsilon));
    }
    return out;
  };
  return fit_mixing(objective, candidates, random_matrix(f.rank(), r_next, opts.seed), opts);
}

MixingResult fit_w_matrix(const Matrix& x, const Matrix& a, const Matrix& s, std::size_t r_next,
                          const FitOptions& opts) {
  opts.validate();
  check_next_rank(a.cols(), r_next);
  if (a.rows() != x.rows() || s.cols() != x.cols() || s.rows() != a.cols()) {
    throw ArgumentError("fit_w_matrix: X, A, S shapes do not conform");
  }
  const Matrix ata = kernels::gram(a);
  const Matrix sst = kernels::matmul_nt(s, s);

  auto objective = [&](const Matrix& w) {
    const Matrix aw = kernels::matmul(a, w);
    const Matrix wts = kernels::matmul_tn(w, s);
    return kernels::squared_distance(x.values(), kernels::matmul(aw, wts).values());
  };
  auto candidates = [&](const Matrix& w) {
    const Matrix aw = kernels::matmul(a, w);     // m x r'
    const Matrix stw = kernels::matmul_tn(s, w);  // n x r'
    // A-side: coefficients W^T S held fixed.
    const Matrix num_a = kernels::matmul_tn(a, kernels::matmul(x, stw));
    const Matrix den_a = kernels::matmul(kernels::matmul(ata, w), kernels::gram(stw));
    // S-side: dictionary A W held fixed.
    const Matrix num_s = kernels::matmul(s, kernels::matmul_tn(x, aw));
    const Matrix den_s = kernels::matmul(kernels::matmul(sst, w), kernels::gram(aw));
    return std::vector<Matrix>{candidate(w, num_a, den_a, opts.epsilon),
                               candidate(w, num_s, den_s, opts.epsilon)};
  };
  return fit_mixing(objective, candidates, random_matrix(a.cols(), r_next, opts.seed), opts);
}

LayerChain multi_hntf(const DenseTensor& t, const HierarchySpec& spec) {
  spec.validate();
  const std::size_t min_dim = *std::min_element(t.shape().begin(), t.shape().end());
  if (spec.ranks.front() > min_dim) {
    warn("multi_hntf: r_0 = " + std::to_string(spec.ranks.front()) +
         " exceeds the smallest tensor dimension " + std::to_string(min_dim));
  }

  LayerChain chain{"multi-hntf", {}, spec.layer_options(0).seed, spec.options};
  NcpdResult base = ncpd(t, spec.ranks.front(), spec.layer_options(0));
  chain.layers.push_back(make_layer(t, spec.ranks.front(), std::move(base.factors)));

  for (std::size_t l = 0; l + 1 < spec.ranks.size(); ++l) {
    Layer& cur = chain.layers.back();
    MixingResult mix = fit_w(t, cur.factors, spec.ranks[l + 1], spec.layer_options(l + 1));
    FactorSet next(times_w(cur.factors, mix.w));
    cur.mixing = std::move(mix.w);
    chain.layers.push_back(make_layer(t, spec.ranks[l + 1], std::move(next)));
  }
  return chain;
}

LayerChain multi_hnmf(const Matrix& x, const HierarchySpec& spec) {
  spec.validate();
  require_matrix_input(x);
  const double norm = matrix_norm(x);

  LayerChain chain{"multi-hntf-matrix", {}, spec.layer_options(0).seed, spec.options};
  NmfResult base = nmf(x, spec.ranks.front(), spec.layer_options(0));
  Matrix a = std::move(base.a);
  Matrix s = std::move(base.s);
  chain.layers.push_back(make_matrix_layer(x, norm, spec.ranks.front(), a, s));

  for (std::size_t l = 0; l + 1 < spec.ranks.size(); ++l) {
    MixingResult mix = fit_w_matrix(x, a, s, spec.ranks[l + 1], spec.layer_options(l + 1));
    a = kernels::matmul(a, mix.w);
    s = kernels::matmul_tn(mix.w, s);
    chain.layers.back().mixing = std::move(mix.w);
    chain.layers.push_back(make_matrix_layer(x, norm, spec.ranks[l + 1], a, s));
  }
  return chain;
}

LayerChain multi_hntf_supervised(const Matrix& x, const LabelMatrix& labels,
                                 const HierarchySpec& spec, double lambda) {
  spec.validate();
  require_matrix_input(x);
  if (!(lambda >= 0.0)) throw ArgumentError("lambda must be nonnegative");
  const Matrix& y = labels.y;
  if (y.cols() != x.cols()) throw ArgumentError("labels must have one column per data column");
  const double norm = matrix_norm(x);
  const double root = std::sqrt(lambda);

  LayerChain chain{"multi-hntf-supervised", {}, spec.layer_options(0).seed, spec.options};
  SupervisedNmfResult base = supervised_nmf(x, y, spec.ranks.front(), lambda, spec.layer_options(0));
  Matrix a = std::move(base.a);
  Matrix b = std::move(base.b);
  Matrix s = std::move(base.s);
  chain.layers.push_back(make_matrix_layer(x, norm, spec.ranks.front(), a, s));
  chain.layers.back().label_dictionary = b;

  const Matrix x_aug = stack_rows(x, y, root);
  for (std::size_t l = 0; l + 1 < spec.ranks.size(); ++l) {
    const FitOptions& opts = spec.layer_options(l + 1);
    MixingResult mix = fit_w_matrix(x_aug, stack_rows(a, b, root), s, spec.ranks[l + 1], opts);
    a = kernels::matmul(a, mix.w);
    s = kernels::matmul_tn(mix.w, s);
    b = fit_dictionary(y, s, kernels::matmul(b, mix.w), opts);
    chain.layers.back().mixing = std::move(mix.w);
    chain.layers.push_back(make_matrix_layer(x, norm, spec.ranks[l + 1], a, s));
    chain.layers.back().label_dictionary = b;
  }
  return chain;
}

LayerChain multi_hntf_supervised(const DenseTensor& t, const LabelMatrix& labels,
                                 const HierarchySpec& spec, double lambda) {
  if (t.order() != 2) {
    throw UnsupportedError("supervision is implemented for order-2 data only (got order " +
                           std::to_string(t.order()) + ")");
  }
  return multi_hntf_supervised(t.to_matrix(), labels, spec, lambda);
}

LayerChain hnmf(const Matrix& x, const HierarchySpec& spec) {
  spec.validate();
  require_matrix_input(x);
  const double norm = matrix_norm(x);

  LayerChain chain{"hnmf", {}, spec.layer_options(0).seed, spec.options};
  NmfResult base = nmf(x, spec.ranks.front(), spec.layer_options(0));
  Matrix dict = std::move(base.a);  // A0 A1 .. Al
  Matrix s = std::move(base.s);
  chain.layers.push_back(make_matrix_layer(x, norm, spec.ranks.front(), dict, s));

  for (std::size_t l = 0; l + 1 < spec.ranks.size(); ++l) {
    NmfResult next = nmf(s, spec.ranks[l + 1], spec.layer_options(l + 1));
    dict = kernels::matmul(dict, next.a);
    s = std::move(next.s);
    chain.layers.back().mixing = std::move(next.a);
    chain.layers.push_back(make_matrix_layer(x, norm, spec.ranks[l + 1], dict, s));
  }
  return chain;
}

LayerChain hntf_i(const DenseTensor& t, const HierarchySpec& spec, std::size_t lead_mode) {
  spec.validate();
  const std::size_t k = t.order();
  if (lead_mode >= k) {
    throw ArgumentError("lead mode " + std::to_string(lead_mode) + " out of range for order " +
                        std::to_string(k));
  }
  std::vector<std::size_t> perm{lead_mode};
  for (std::size_t m = 0; m < k; ++m) {
    if (m != lead_mode) perm.push_back(m);
  }
  const DenseTensor pt = permute_modes(t, perm);

  auto restore = [&](const std::vector<Matrix>& permuted) {
    std::vector<Matrix> original(k);
    for (std::size_t m = 0; m < k; ++m) original[perm[m]] = permuted[m];
    return FactorSet(std::move(original));
  };
  auto add_layer = [&](LayerChain& chain, std::size_t rank, const std::vector<Matrix>& f) {
    const auto [abs_loss, rel_loss] = layer_loss(pt, FactorSet(f));
    chain.layers.push_back(Layer{.rank = rank,
                                 .factors = restore(f),
                                 .mixing = std::nullopt,
                                 .relative_loss = rel_loss,
                                 .absolute_loss = abs_loss,
                                 .label_dictionary = std::nullopt});
  };

  LayerChain chain{"hntf-" + std::to_string(lead_mode + 1), {}, spec.layer_options(0).seed, spec.options};
  std::vector<Matrix> f = ncpd(pt, spec.ranks.front(), spec.layer_options(0)).factors.factors();
  add_layer(chain, spec.ranks.front(), f);

  for (std::size_t l = 0; l + 1 < spec.ranks.size(); ++l) {
    // Core tensor [[I, X_2, .., X_k]]: the lead factor is replaced by the identity.
    std::vector<Matrix> core_factors = f;
    core_factors.front() = Matrix::identity(spec.ranks[l]);
    const FactorSet core(core_factors);
    const DenseTensor y = cp_reconstruct(core);
    std::vector<Matrix> z = ncpd(y, spec.ranks[l + 1], spec.layer_options(l + 1)).factors.factors();

    const Matrix w = z.front();
    f.front() = kernels::matmul(f.front(), w);
    for (std::size_t m = 1; m < k; ++m) f[m] = std::move(z[m]);
    chain.layers.back().mixing = w;
    add_layer(chain, spec.ranks[l + 1], f);
  }
  return chain;
}

HncpdResult standard_hncpd(const DenseTensor& t, const HierarchySpec& spec,
                           std::span<const std::uint64_t> mode_seeds) {
  spec.validate();
  const std::size_t k = t.order();
  if (!mode_seeds.empty() && mode_seeds.size() != k) {
    throw ArgumentError("give one HNMF seed per mode");
  }

  HncpdResult res{LayerChain{"hncpd", {}, spec.layer_options(0).seed, spec.options}, {}};
  NcpdResult base = ncpd(t, spec.ranks.front(), spec.layer_options(0));
  const FactorSet x0 = std::move(base.factors);
  res.chain.layers.push_back(make_layer(t, spec.ranks.front(), x0));
  if (spec.ranks.size() == 1) return res;

  for (std::size_t i = 0; i < k; ++i) {
    const std::uint64_t seed =
        mode_seeds.empty() ? splitmix64(spec.layer_options(0).seed + i + 1) : mode_seeds[i];
    HierarchySpec sub;
    sub.ranks.assign(spec.ranks.begin() + 1, spec.ranks.end());
    sub.options.clear();
    for (std::size_t l = 1; l < spec.ranks.size(); ++l) {
      FitOptions o = spec.layer_options(l);
      o.seed = seed + (l - 1);
      sub.options.push_back(o);
    }
    LayerChain mc = hnmf(x0.factor(i), sub);
    mc.seed = seed;
    res.mode_chains.push_back(std::move(mc));
  }

  for (std::size_t l = 1; l < spec.ranks.size(); ++l) {
    std::vector<Matrix> depth;
    for (const LayerChain& mc : res.mode_chains) {
      const FactorSet& ml = mc.layers[l - 1].factors;  // {A1 .. Al, S_l^T}
      depth.push_back(kernels::matmul_nt(ml.factor(0), ml.factor(1)));
    }
    res.chain.layers.push_back(make_layer(t, spec.ranks[l], FactorSet(std::move(depth))));
  }
  return res;
}

}  // namespace mhntf
