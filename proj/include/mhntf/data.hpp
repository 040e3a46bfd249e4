#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mhntf/hierarchy.hpp"
#include "mhntf/tensor.hpp"

namespace mhntf {

/// Half-open index range [begin, end).
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  bool contains(const IndexRange& inner) const { return begin <= inner.begin && inner.end <= end; }
  std::size_t length() const { return end - begin; }
};

/// Axis-aligned block: one index range per mode.
struct Block {
  std::vector<IndexRange> ranges;
  double amplitude = 1.0;
  /// Index of the enclosing group one level up (unused at the top level).
  std::size_t parent = 0;
};

/// Three-level block tensor: leaves (rank-one blocks that make up the data)
/// nested in mid-level groups nested in top-level groups.
struct SyntheticSpec {
  std::vector<std::size_t> shape{40, 40, 40};
  std::vector<Block> leaves;
  std::vector<Block> mid_groups;
  std::vector<Block> top_groups;
  /// Variance of the additive noise; samples are clipped at 0.
  double noise_sigma2 = 0.1;
  std::uint64_t seed = 0;

  /// 7 leaves -> 4 groups -> 2 groups on a 40x40x40 grid.
  static SyntheticSpec hierarchical_default(double noise_sigma2 = 0.1, std::uint64_t seed = 0);

  /// Throws ArgumentError for ranges outside the shape, empty ranges, bad
  /// parent indices, or a block not nested in its declared parent.
  void validate() const;
};

struct SyntheticData {
  DenseTensor tensor;
  DenseTensor noiseless;
  /// Leaf-level factors (rank = #leaves), then group sums at each level up.
  FactorSet truth_leaf;
  FactorSet truth_mid;
  FactorSet truth_top;
  /// 0/1 membership matrices leaf -> mid and mid -> top.
  Matrix leaf_to_mid;
  Matrix mid_to_top;
};

/// Leaf factor m of block b is amplitude^(1/k) on the block's range in mode m,
/// zero elsewhere. Noise is drawn entry by entry in row-major order.
SyntheticData gen_synthetic(const SyntheticSpec& spec);

/// DTF (`dtf k n_1 .. n_k` then entries) or COO (`coo k n_1 .. n_k nnz` then
/// `i_1 .. i_k value` lines, 1-based; duplicates are summed). Chosen by header.
DenseTensor load_tensor(const std::filesystem::path& path);

/// CSV (one row per line, comma separated) or, when the first token is
/// `dtf`/`coo`, an order-2 tensor file.
Matrix load_matrix(const std::filesystem::path& path);

/// CSV `sample_id,class_name`, optional header line with exactly those names.
/// Samples become columns in file order; classes are numbered in order of
/// first appearance.
LabelMatrix load_labels(const std::filesystem::path& path);

/// One token per line; line i is word id i.
std::vector<std::string> load_vocab(const std::filesystem::path& path);

void write_tensor_dtf(const std::filesystem::path& path, const DenseTensor& t);

}  // namespace mhntf
