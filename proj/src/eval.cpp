#include "mhntf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "mhntf/error.hpp"
#include "mhntf/kernels.hpp"
#include "mhntf/log.hpp"
#include "mhntf/rng.hpp"

namespace mhntf {

namespace {

std::string format17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::size_t> classify(const Matrix& b, const Matrix& s) {
  if (b.cols() != s.rows()) throw ArgumentError("classify: B columns must match S rows");
  if (b.rows() == 0) throw ArgumentError("classify: no classes");
  const Matrix scores = kernels::matmul(b, s);
  std::vector<std::size_t> pred(scores.cols(), 0);
  for (std::size_t j = 0; j < scores.cols(); ++j) {
    for (std::size_t c = 1; c < scores.rows(); ++c) {
      if (scores(c, j) > scores(pred[j], j)) pred[j] = c;
    }
  }
  return pred;
}

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
  if (predicted.size() != truth.size()) throw ArgumentError("accuracy: length mismatch");
  if (truth.empty()) throw ArgumentError("accuracy: no samples");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

Matrix normalize_columns_l1(const Matrix& m, std::vector<std::size_t>* zero_columns) {
  Matrix out = m;
  for (std::size_t j = 0; j < m.cols(); ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) sum += std::abs(m(i, j));
    if (sum == 0.0) {
      if (zero_columns) zero_columns->push_back(j);
      continue;
    }
    for (std::size_t i = 0; i < m.rows(); ++i) out(i, j) = m(i, j) / sum;
  }
  return out;
}

std::vector<std::vector<std::size_t>> top_keyword_indices(const Matrix& word_factor, std::size_t m) {
  const std::size_t n = word_factor.rows();
  if (m > n) {
    warn("top_keywords: requested " + std::to_string(m) + " keywords but only " + std::to_string(n) +
         " words; clamping");
    m = n;
  }
  const Matrix p = normalize_columns_l1(word_factor);
  std::vector<std::vector<std::size_t>> out;
  out.reserve(p.cols());
  std::vector<std::size_t> idx(n);
  for (std::size_t j = 0; j < p.cols(); ++j) {
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (p(a, j) != p(b, j)) return p(a, j) > p(b, j);
                        return a < b;
                      });
    out.emplace_back(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m));
  }
  return out;
}

std::vector<std::vector<std::string>> top_keywords(const Matrix& word_factor,
                                                   std::span<const std::string> vocab, std::size_t m) {
  if (vocab.size() != word_factor.rows()) {
    throw ArgumentError("top_keywords: vocabulary has " + std::to_string(vocab.size()) +
                        " entries, factor has " + std::to_string(word_factor.rows()) + " rows");
  }
  std::vector<std::vector<std::string>> out;
  for (const auto& topic : top_keyword_indices(word_factor, m)) {
    auto& words = out.emplace_back();
    for (std::size_t i : topic) words.push_back(vocab[i]);
  }
  return out;
}

std::vector<std::filesystem::path> heatmap_export(const LayerChain& chain,
                                                  std::span<const std::size_t> modes,
                                                  const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (std::size_t l = 0; l < chain.layers.size(); ++l) {
    const FactorSet& f = chain.layers[l].factors;
    for (std::size_t mode : modes) {
      if (mode >= f.order()) {
        throw ArgumentError("heatmap_export: mode " + std::to_string(mode + 1) + " out of range for order " +
                            std::to_string(f.order()));
      }
      std::vector<std::size_t> zeros;
      const Matrix p = normalize_columns_l1(f.factor(mode), &zeros);
      for (std::size_t j : zeros) {
        warn("heatmap_export: layer " + std::to_string(l) + " mode " + std::to_string(mode + 1) + " topic " +
             std::to_string(j + 1) + " is all zeros");
      }
      const auto path = dir / ("layer" + std::to_string(l) + "_mode" + std::to_string(mode + 1) + ".csv");
      std::ofstream out(path, std::ios::binary);
      if (!out) throw LoadError(path.string(), 0, "cannot open for writing");
      for (std::size_t i = 0; i < p.rows(); ++i) {
        for (std::size_t j = 0; j < p.cols(); ++j) {
          if (j) out << ',';
          out << format17(p(i, j));
        }
        out << '\n';
      }
      written.push_back(path);
    }
  }
  return written;
}

Matrix layer_coefficients(const Layer& layer) {
  if (layer.factors.order() != 2) throw UnsupportedError("coefficients are defined for order-2 layers only");
  return layer.factors.factor(1).transposed();
}

Matrix posthoc_label_dictionary(const Matrix& y, const Matrix& s, const FitOptions& opts) {
  Rng rng(opts.seed);
  Matrix b(y.rows(), s.rows());
  for (double& v : b.values()) v = rng.uniform();
  return fit_dictionary(y, s, std::move(b), opts);
}

std::vector<std::pair<double, double>> recompute_losses(const LayerChain& chain, const DenseTensor& t) {
  std::vector<std::pair<double, double>> out;
  out.reserve(chain.layers.size());
  for (const Layer& layer : chain.layers) {
    if (layer.factors.shape() != t.shape()) throw ArgumentError("recompute_losses: chain does not match tensor shape");
    out.push_back(layer_loss(t, layer.factors));
  }
  return out;
}

std::vector<ReportRow> report_rows(const LayerChain& chain, const LabelMatrix* labels, const FitOptions& opts) {
  std::vector<ReportRow> rows;
  for (std::size_t l = 0; l < chain.layers.size(); ++l) {
    const Layer& layer = chain.layers[l];
    ReportRow row{.method = chain.method,
                  .layer = l,
                  .rank = layer.rank,
                  .relative_loss = layer.relative_loss,
                  .absolute_loss = layer.absolute_loss,
                  .accuracy = std::nullopt,
                  .seed = chain.seed};
    if (labels) {
      const Matrix s = layer_coefficients(layer);
      const Matrix b = layer.label_dictionary ? *layer.label_dictionary
                                              : posthoc_label_dictionary(labels->y, s, opts);
      row.accuracy = accuracy(classify(b, s), labels->truth);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string report_csv(std::span<const ReportRow> rows, bool with_wall_time) {
  std::string out = "method,layer,rank,relative_loss,absolute_loss,accuracy,seed";
  out += with_wall_time ? ",wall_seconds\n" : "\n";
  for (const ReportRow& r : rows) {
    out += r.method + ',' + std::to_string(r.layer) + ',' + std::to_string(r.rank) + ',' +
           format17(r.relative_loss) + ',' + format17(r.absolute_loss) + ',' +
           (r.accuracy ? format17(*r.accuracy) : std::string()) + ',' + std::to_string(r.seed);
    if (with_wall_time) out += ',' + format17(r.wall_seconds);
    out += '\n';
  }
  return out;
}

std::string report_json(std::span<const ReportRow> rows, bool with_wall_time) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const ReportRow& r : rows) {
    nlohmann::ordered_json j;
    j["method"] = r.method;
    j["layer"] = r.layer;
    j["rank"] = r.rank;
    j["relative_loss"] = r.relative_loss;
    j["absolute_loss"] = r.absolute_loss;
    j["accuracy"] = r.accuracy ? nlohmann::ordered_json(*r.accuracy) : nlohmann::ordered_json(nullptr);
    j["seed"] = r.seed;
    if (with_wall_time) j["wall_seconds"] = r.wall_seconds;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

double median(std::vector<double> values) {
  if (values.empty()) throw ArgumentError("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace mhntf
