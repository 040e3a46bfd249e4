#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mhntf/factorization.hpp"
#include "mhntf/hierarchy.hpp"
#include "mhntf/tensor.hpp"

namespace mhntf {

struct ReportRow {
  std::string method;
  std::size_t layer = 0;
  std::size_t rank = 0;
  double relative_loss = 0.0;
  double absolute_loss = 0.0;
  std::optional<double> accuracy;
  std::uint64_t seed = 0;
  /// Not written by the deterministic writers unless asked for.
  double wall_seconds = 0.0;
};

/// argmax over rows of B*S for every column; ties go to the lowest class.
std::vector<std::size_t> classify(const Matrix& b, const Matrix& s);

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth);

/// Scales every column to sum 1. Zero columns stay zero; their indices are
/// appended to `zero_columns` when given.
Matrix normalize_columns_l1(const Matrix& m, std::vector<std::size_t>* zero_columns = nullptr);

/// Row indices of the m largest entries of every column after L1
/// normalization, descending, ties to the lower index. m is clamped to the
/// row count with a warning.
std::vector<std::vector<std::size_t>> top_keyword_indices(const Matrix& word_factor, std::size_t m);

std::vector<std::vector<std::string>> top_keywords(const Matrix& word_factor,
                                                   std::span<const std::string> vocab, std::size_t m);

/// Writes `layer<l>_mode<i>.csv` (l 0-based, i 1-based) for every layer and
/// every requested 0-based mode: L1-normalized factor, one row per entity, no
/// header, 17 significant digits. Returns the written paths in order.
std::vector<std::filesystem::path> heatmap_export(const LayerChain& chain,
                                                  std::span<const std::size_t> modes,
                                                  const std::filesystem::path& dir);

/// Coefficient matrix S (rank x samples) of an order-2 layer: factor 1 transposed.
Matrix layer_coefficients(const Layer& layer);

/// Fits B (classes x rank) to Y with S fixed, from a seeded uniform start.
/// Used to classify with chains that were fit without labels.
Matrix posthoc_label_dictionary(const Matrix& y, const Matrix& s, const FitOptions& opts);

/// Per-layer losses recomputed from the chain factors against t.
std::vector<std::pair<double, double>> recompute_losses(const LayerChain& chain, const DenseTensor& t);

/// One row per layer. With labels, accuracy comes from the layer's stored B
/// or, when absent, a post-hoc B fit with `opts`.
std::vector<ReportRow> report_rows(const LayerChain& chain, const LabelMatrix* labels = nullptr,
                                   const FitOptions& opts = {});

/// CSV: method,layer,rank,relative_loss,absolute_loss,accuracy,seed[,wall_seconds].
/// Missing accuracy is an empty field.
std::string report_csv(std::span<const ReportRow> rows, bool with_wall_time = false);
std::string report_json(std::span<const ReportRow> rows, bool with_wall_time = false);

/// Median of a non-empty sample (mean of the two middle values for even sizes).
double median(std::vector<double> values);

}  // namespace mhntf
