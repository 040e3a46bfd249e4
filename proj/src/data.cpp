#include "mhntf/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string_view>

#include "mhntf/error.hpp"
#include "mhntf/rng.hpp"

namespace mhntf {

namespace {

Block cube(std::size_t begin, std::size_t end, std::size_t parent, std::size_t order = 3) {
  return Block{std::vector<IndexRange>(order, IndexRange{begin, end}), 1.0, parent};
}

void check_block(const Block& b, const std::vector<std::size_t>& shape, const char* level,
                 std::size_t index) {
  const std::string where = std::string(level) + " block " + std::to_string(index);
  if (b.ranges.size() != shape.size()) throw ArgumentError(where + " has the wrong number of ranges");
  for (std::size_t m = 0; m < shape.size(); ++m) {
    const IndexRange& r = b.ranges[m];
    if (r.begin >= r.end || r.end > shape[m]) {
      throw ArgumentError(where + " has an empty or out-of-bounds range in mode " + std::to_string(m));
    }
  }
  if (!(b.amplitude > 0.0) || !std::isfinite(b.amplitude)) {
    throw ArgumentError(where + " needs a positive amplitude");
  }
}

void check_nesting(const std::vector<Block>& children, const std::vector<Block>& parents,
                   const char* level) {
  for (std::size_t c = 0; c < children.size(); ++c) {
    const Block& child = children[c];
    if (child.parent >= parents.size()) {
      throw ArgumentError(std::string(level) + " block " + std::to_string(c) + " has no parent " +
                          std::to_string(child.parent));
    }
    const Block& parent = parents[child.parent];
    for (std::size_t m = 0; m < child.ranges.size(); ++m) {
      if (!parent.ranges[m].contains(child.ranges[m])) {
        throw ArgumentError(std::string(level) + " block " + std::to_string(c) +
                            " is not nested in its parent in mode " + std::to_string(m));
      }
    }
  }
}

Matrix membership(const std::vector<Block>& children, std::size_t n_parents) {
  Matrix m(children.size(), n_parents);
  for (std::size_t c = 0; c < children.size(); ++c) m(c, children[c].parent) = 1.0;
  return m;
}

std::vector<Matrix> leaf_factors(const SyntheticSpec& spec) {
  const std::size_t k = spec.shape.size();
  std::vector<Matrix> f;
  for (std::size_t m = 0; m < k; ++m) f.emplace_back(spec.shape[m], spec.leaves.size());
  for (std::size_t j = 0; j < spec.leaves.size(); ++j) {
    const Block& b = spec.leaves[j];
    const double scale = std::pow(b.amplitude, 1.0 / static_cast<double>(k));
    for (std::size_t m = 0; m < k; ++m)
      for (std::size_t i = b.ranges[m].begin; i < b.ranges[m].end; ++i) f[m](i, j) = scale;
  }
  return f;
}

std::vector<Matrix> group(const std::vector<Matrix>& f, const Matrix& member) {
  std::vector<Matrix> out;
  for (const Matrix& x : f) {
    Matrix g(x.rows(), member.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t c = 0; c < member.rows(); ++c)
        for (std::size_t p = 0; p < member.cols(); ++p) g(i, p) += x(i, c) * member(c, p);
    out.push_back(std::move(g));
  }
  return out;
}

// Line-oriented reader that remembers line numbers for error messages.
class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path) : path_(path.string()), in_(path) {
    if (!in_) throw LoadError(path_, 0, "cannot open file");
  }

  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const { throw LoadError(path_, line_no_, what); }
  std::size_t line() const { return line_no_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t line_no_ = 0;
};

double parse_value(std::string_view tok, const LineReader& r) {
  double v = 0.0;
  const auto* first = tok.data();
  const auto* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) r.fail("invalid number '" + std::string(tok) + "'");
  if (!std::isfinite(v)) r.fail("non-finite value '" + std::string(tok) + "'");
  if (v < 0.0) r.fail("negative value " + std::string(tok));
  return v;
}

std::size_t parse_count(std::string_view tok, const LineReader& r, const char* what) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    r.fail(std::string("invalid ") + what + " '" + std::string(tok) + "'");
  }
  return v;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t");
    const auto e = cell.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

DenseTensor read_tensor(LineReader& r, const std::vector<std::string>& header) {
  const std::string& kind = header.front();
  if (kind != "dtf" && kind != "coo") r.fail("expected a 'dtf' or 'coo' header");
  if (header.size() < 2) r.fail("header is missing the tensor order");
  const std::size_t k = parse_count(header[1], r, "order");
  if (k < 2) r.fail("tensor order must be at least 2");
  const std::size_t expected_header = 2 + k + (kind == "coo" ? 1 : 0);
  if (header.size() != expected_header) {
    r.fail("header should have " + std::to_string(expected_header) + " fields");
  }
  std::vector<std::size_t> shape(k);
  std::size_t total = 1;
  for (std::size_t m = 0; m < k; ++m) {
    shape[m] = parse_count(header[2 + m], r, "dimension");
    if (shape[m] == 0) r.fail("dimensions must be positive");
    total *= shape[m];
  }

  std::vector<double> values(total, 0.0);
  std::string line;
  if (kind == "dtf") {
    std::size_t filled = 0;
    while (r.next(line)) {
      for (const std::string& tok : split_ws(line)) {
        if (filled == total) r.fail("more entries than the shape holds");
        values[filled++] = parse_value(tok, r);
      }
    }
    if (filled != total) {
      r.fail("expected " + std::to_string(total) + " entries, found " + std::to_string(filled));
    }
  } else {
    const std::size_t nnz = parse_count(header[2 + k], r, "nnz");
    std::size_t seen = 0;
    while (r.next(line)) {
      const auto toks = split_ws(line);
      if (toks.size() != k + 1) r.fail("coordinate line needs " + std::to_string(k + 1) + " fields");
      std::size_t off = 0;
      for (std::size_t m = 0; m < k; ++m) {
        const std::size_t i = parse_count(toks[m], r, "index");
        if (i < 1 || i > shape[m]) r.fail("index " + toks[m] + " out of range in mode " + std::to_string(m + 1));
        off = off * shape[m] + (i - 1);
      }
      values[off] += parse_value(toks[k], r);
      ++seen;
    }
    if (seen != nnz) {
      r.fail("header declares " + std::to_string(nnz) + " entries, found " + std::to_string(seen));
    }
  }
  return DenseTensor(std::move(shape), std::move(values));
}

}  // namespace

SyntheticSpec SyntheticSpec::hierarchical_default(double noise_sigma2, std::uint64_t seed) {
  SyntheticSpec s;
  s.noise_sigma2 = noise_sigma2;
  s.seed = seed;
  // Overlapping cubes along the diagonal; siblings overlap inside their parent.
  s.top_groups = {cube(0, 24, 0), cube(14, 40, 0)};
  s.mid_groups = {cube(0, 14, 0), cube(6, 24, 0), cube(14, 30, 1), cube(24, 40, 1)};
  s.leaves = {cube(0, 9, 0),   cube(5, 14, 0),  cube(6, 15, 1), cube(15, 24, 1),
              cube(14, 23, 2), cube(21, 30, 2), cube(26, 38, 3)};
  return s;
}

void SyntheticSpec::validate() const {
  if (shape.size() < 2) throw ArgumentError("synthetic tensor order must be at least 2");
  for (std::size_t n : shape) {
    if (n == 0) throw ArgumentError("synthetic dimensions must be positive");
  }
  if (leaves.empty() || mid_groups.empty() || top_groups.empty()) {
    throw ArgumentError("synthetic spec needs blocks at all three levels");
  }
  if (!(noise_sigma2 >= 0.0)) throw ArgumentError("noise variance must be nonnegative");
  for (std::size_t i = 0; i < leaves.size(); ++i) check_block(leaves[i], shape, "leaf", i);
  for (std::size_t i = 0; i < mid_groups.size(); ++i) check_block(mid_groups[i], shape, "mid", i);
  for (std::size_t i = 0; i < top_groups.size(); ++i) check_block(top_groups[i], shape, "top", i);
  check_nesting(leaves, mid_groups, "leaf");
  check_nesting(mid_groups, top_groups, "mid");
}

SyntheticData gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::vector<Matrix> leaf = leaf_factors(spec);
  const Matrix l2m = membership(spec.leaves, spec.mid_groups.size());
  const Matrix m2t = membership(spec.mid_groups, spec.top_groups.size());
  std::vector<Matrix> mid = group(leaf, l2m);
  std::vector<Matrix> top = group(mid, m2t);

  FactorSet truth_leaf(std::move(leaf));
  DenseTensor noiseless = cp_reconstruct(truth_leaf);

  std::vector<double> values(noiseless.values().begin(), noiseless.values().end());
  if (spec.noise_sigma2 > 0.0) {
    Rng rng(spec.seed);
    const double sigma = std::sqrt(spec.noise_sigma2);
    for (double& v : values) v += std::max(0.0, rng.gaussian(sigma));
  }
  DenseTensor tensor(spec.shape, std::move(values));
  return SyntheticData{std::move(tensor), std::move(noiseless), std::move(truth_leaf),
                       FactorSet(std::move(mid)), FactorSet(std::move(top)), l2m, m2t};
}

DenseTensor load_tensor(const std::filesystem::path& path) {
  LineReader r(path);
  std::string line;
  if (!r.next(line)) r.fail("empty file");
  return read_tensor(r, split_ws(line));
}

Matrix load_matrix(const std::filesystem::path& path) {
  LineReader r(path);
  std::string line;
  if (!r.next(line)) r.fail("empty file");
  const auto head = split_ws(line);
  if (!head.empty() && (head.front() == "dtf" || head.front() == "coo")) {
    DenseTensor t = read_tensor(r, head);
    if (t.order() != 2) throw LoadError(r.path(), 1, "expected an order-2 tensor for a matrix");
    return t.to_matrix();
  }

  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  do {
    const auto cells = split_csv(line);
    if (rows == 0) {
      cols = cells.size();
    } else if (cells.size() != cols) {
      r.fail("row has " + std::to_string(cells.size()) + " columns, expected " + std::to_string(cols));
    }
    for (const std::string& c : cells) values.push_back(parse_value(c, r));
    ++rows;
  } while (r.next(line));
  return Matrix(rows, cols, std::move(values));
}

LabelMatrix load_labels(const std::filesystem::path& path) {
  LineReader r(path);
  std::string line;
  std::vector<std::string> ids;
  std::vector<std::size_t> truth;
  std::vector<std::string> classes;
  std::map<std::string, std::size_t> index;
  bool first = true;
  while (r.next(line)) {
    const auto cells = split_csv(line);
    if (first && cells.size() == 2 && cells[0] == "sample_id" && cells[1] == "class_name") {
      first = false;
      continue;
    }
    first = false;
    if (cells.size() != 2) r.fail("expected 'sample_id,class_name'");
    if (cells[1].empty()) r.fail("empty class name");
    auto [it, inserted] = index.emplace(cells[1], classes.size());
    if (inserted) classes.push_back(cells[1]);
    ids.push_back(cells[0]);
    truth.push_back(it->second);
  }
  if (truth.empty()) throw LoadError(r.path(), 0, "no labels found");
  LabelMatrix labels = LabelMatrix::one_hot(truth, std::move(classes));
  labels.sample_ids = std::move(ids);
  return labels;
}

std::vector<std::string> load_vocab(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(path.string(), 0, "cannot open file");
  std::vector<std::string> vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    vocab.push_back(line);
  }
  while (!vocab.empty() && vocab.back().empty()) vocab.pop_back();
  return vocab;
}

void write_tensor_dtf(const std::filesystem::path& path, const DenseTensor& t) {
  std::ofstream out(path);
  if (!out) throw LoadError(path.string(), 0, "cannot open file for writing");
  out << "dtf " << t.order();
  for (std::size_t n : t.shape()) out << ' ' << n;
  out << '\n';
  out.precision(17);
  const std::size_t last = t.shape().back();
  auto v = t.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    out << v[i] << ((i + 1) % last == 0 ? '\n' : ' ');
  }
}

}  // namespace mhntf
