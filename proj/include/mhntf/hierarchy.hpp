#pragma once

// Hierarchical factorizations. Every model produces a LayerChain: one entry
// per rank r_0 > r_1 > ... > r_L holding the factors that reconstruct the data
// at that granularity.
//
//   multi_hntf         one mixing matrix W per layer shared by all modes:
//                      X_i^(l+1) = X_i^(l) W^(l)
//   multi_hnmf         the same model coded directly on (A, S, W) for
//                      matrices: A' = A W, S' = W^T S
//   hnmf               NMF applied again to each layer's coefficient matrix
//   hntf_i             one mode carried through W, the others refit per layer
//   standard_hncpd     NCPD followed by an independent HNMF of every factor

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mhntf/factorization.hpp"
#include "mhntf/tensor.hpp"

namespace mhntf {

struct HierarchySpec {
  /// Strictly decreasing, r_L >= 1.
  std::vector<std::size_t> ranks;
  /// Options for each layer; a single entry applies to every layer. Layer 0
  /// uses options for its flat fit, layer l+1 for the fit that produces it.
  std::vector<FitOptions> options{FitOptions{}};

  void validate() const;
  const FitOptions& layer_options(std::size_t layer) const;
};

/// Class-indicator matrix Y (classes x samples) and class names.
struct LabelMatrix {
  Matrix y;
  std::vector<std::string> classes;
  /// Class index of every sample (argmax of its column).
  std::vector<std::size_t> truth;
  std::vector<std::string> sample_ids;

  /// One-hot labels from per-sample class indices.
  static LabelMatrix one_hot(std::span<const std::size_t> truth, std::vector<std::string> classes);
};

struct Layer {
  std::size_t rank = 0;
  FactorSet factors;
  /// Mixing matrix into the next layer (r_l x r_{l+1}); absent on the last layer.
  std::optional<Matrix> mixing;
  double relative_loss = 0.0;
  double absolute_loss = 0.0;
  /// Label dictionary B^(l) for supervised or post-hoc classification.
  std::optional<Matrix> label_dictionary;
};

struct LayerChain {
  std::string method;
  std::vector<Layer> layers;
  std::uint64_t seed = 0;
  /// Options the chain was fit with (HierarchySpec::options).
  std::vector<FitOptions> options;

  std::vector<std::size_t> ranks() const;
};

struct MixingResult {
  Matrix w;
  /// Shared-W objective at initialization, then after every iteration.
  std::vector<double> objective_history;
};

/// ||T - [[X_1 W, ..., X_k W]]||_F^2
double shared_w_objective(const DenseTensor& t, const FactorSet& f, const Matrix& w);

/// Approximately minimizes shared_w_objective over W >= 0 (r_l x r_next).
///
/// Each iteration forms one multiplicative candidate per mode,
///   W_i = W * (X_i^T T_(i) K_i) / (X_i^T X_i W K_i^T K_i + eps),
/// with K_i the Khatri-Rao product of {X_j W}, j != i. The candidates'
/// mean is taken when it does not raise the objective; otherwise the best
/// single candidate, otherwise the first step W + 2^-s (mean - W) that does
/// not raise it. If none qualifies W is kept and the fit stops, so the
/// objective history never increases.
MixingResult fit_w(const DenseTensor& t, const FactorSet& f, std::size_t r_next, const FitOptions& opts);

/// fit_w for the matrix model X ~ A W W^T S written with matrix products
/// only: candidates for the A-side and the S-side, same acceptance rule.
MixingResult fit_w_matrix(const Matrix& x, const Matrix& a, const Matrix& s, std::size_t r_next,
                          const FitOptions& opts);

LayerChain multi_hntf(const DenseTensor& t, const HierarchySpec& spec);

/// Matrix model coded on (A, S, W) directly. Layer factors are stored as
/// {A, S^T} so they are comparable with multi_hntf on the same matrix.
LayerChain multi_hnmf(const Matrix& x, const HierarchySpec& spec);

/// Supervised matrix model. Layer 0 minimizes ||X - AS||^2 + lambda ||Y - BS||^2;
/// each further W is fit on the stacked data [X; sqrt(lambda) Y] against
/// [A; sqrt(lambda) B] S, after which A' = A W, S' = W^T S and B' is refit to
/// Y with S' fixed, starting from B W. Every layer carries its B.
LayerChain multi_hntf_supervised(const Matrix& x, const LabelMatrix& labels,
                                 const HierarchySpec& spec, double lambda = 1.0);

/// Tensor entry point for supervision; throws UnsupportedError for order > 2.
LayerChain multi_hntf_supervised(const DenseTensor& t, const LabelMatrix& labels,
                                 const HierarchySpec& spec, double lambda = 1.0);

/// X ~ A0 S0, S_l ~ A_{l+1} S_{l+1}. Layer l stores {A0 A1 .. Al, S_l^T}; its
/// mixing entry is A_{l+1}. Losses use the full product A0 .. Al S_l.
LayerChain hnmf(const Matrix& x, const HierarchySpec& spec);

/// HNTF with `lead_mode` (0-based) moved first, remaining modes in their
/// original order. Factors are returned in the original mode order.
LayerChain hntf_i(const DenseTensor& t, const HierarchySpec& spec, std::size_t lead_mode);

struct HncpdResult {
  /// Layer l holds the rank-r_0 CP built from each mode's depth-l product.
  LayerChain chain;
  /// hnmf chain of every layer-0 factor matrix, ranks r_1..r_L.
  std::vector<LayerChain> mode_chains;
};

/// Standard HNCPD. Mode i's HNMF uses seed mode_seeds[i] + l at its layer l;
/// without explicit seeds, mode_seeds[i] = splitmix64(layer-0 seed + i + 1).
HncpdResult standard_hncpd(const DenseTensor& t, const HierarchySpec& spec,
                           std::span<const std::uint64_t> mode_seeds = {});

/// sqrt of the CP residual and that value over ||t||_F.
std::pair<double, double> layer_loss(const DenseTensor& t, const FactorSet& f);

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace mhntf
