#include "mhntf/serialize.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mhntf/error.hpp"

namespace mhntf {

namespace {

using json = nlohmann::ordered_json;

constexpr int kFormatVersion = 1;

json matrix_json(const Matrix& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["data"] = json::array();
  for (double v : m.values()) j["data"].push_back(v);
  return j;
}

Matrix matrix_from(const json& j) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  std::vector<double> data = j.at("data").get<std::vector<double>>();
  return Matrix(rows, cols, std::move(data));
}

std::optional<Matrix> optional_matrix(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return matrix_from(j.at(key));
}

}  // namespace

std::string chain_to_json(const LayerChain& chain) {
  json doc;
  doc["format"] = "mhntf-chain";
  doc["version"] = kFormatVersion;
  doc["method"] = chain.method;
  doc["seed"] = chain.seed;
  doc["ranks"] = chain.ranks();
  doc["options"] = json::array();
  for (const FitOptions& o : chain.options) {
    doc["options"].push_back(
        json{{"max_iters", o.max_iters}, {"tol", o.tol}, {"seed", o.seed}, {"epsilon", o.epsilon}});
  }
  doc["layers"] = json::array();
  for (const Layer& layer : chain.layers) {
    json l;
    l["rank"] = layer.rank;
    l["relative_loss"] = layer.relative_loss;
    l["absolute_loss"] = layer.absolute_loss;
    l["factors"] = json::array();
    for (const Matrix& f : layer.factors.factors()) l["factors"].push_back(matrix_json(f));
    l["mixing"] = layer.mixing ? matrix_json(*layer.mixing) : json(nullptr);
    l["label_dictionary"] = layer.label_dictionary ? matrix_json(*layer.label_dictionary) : json(nullptr);
    doc["layers"].push_back(std::move(l));
  }
  return doc.dump(1) + "\n";
}

LayerChain chain_from_json(const std::string& text, const std::string& source) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format").get<std::string>() != "mhntf-chain") throw LoadError(source, 0, "not a chain document");
    if (doc.at("version").get<int>() != kFormatVersion) {
      throw LoadError(source, 0, "unsupported chain version " + doc.at("version").dump());
    }
    LayerChain chain;
    chain.method = doc.at("method").get<std::string>();
    chain.seed = doc.at("seed").get<std::uint64_t>();
    for (const json& o : doc.at("options")) {
      chain.options.push_back(FitOptions{.max_iters = o.at("max_iters").get<int>(),
                                         .tol = o.at("tol").get<double>(),
                                         .seed = o.at("seed").get<std::uint64_t>(),
                                         .epsilon = o.at("epsilon").get<double>()});
    }
    for (const json& l : doc.at("layers")) {
      std::vector<Matrix> factors;
      for (const json& f : l.at("factors")) factors.push_back(matrix_from(f));
      Layer layer{.rank = l.at("rank").get<std::size_t>(),
                  .factors = FactorSet(std::move(factors)),
                  .mixing = optional_matrix(l, "mixing"),
                  .relative_loss = l.at("relative_loss").get<double>(),
                  .absolute_loss = l.at("absolute_loss").get<double>(),
                  .label_dictionary = optional_matrix(l, "label_dictionary")};
      chain.layers.push_back(std::move(layer));
    }
    if (doc.at("ranks").get<std::vector<std::size_t>>() != chain.ranks()) {
      throw LoadError(source, 0, "ranks do not match the layers");
    }
    for (std::size_t l = 0; l + 1 < chain.layers.size(); ++l) {
      const auto& w = chain.layers[l].mixing;
      if (w && (w->rows() != chain.layers[l].rank || w->cols() != chain.layers[l + 1].rank)) {
        throw LoadError(source, 0, "mixing matrix of layer " + std::to_string(l) + " has the wrong shape");
      }
    }
    return chain;
  } catch (const json::exception& e) {
    throw LoadError(source, 0, e.what());
  } catch (const ArgumentError& e) {
    throw LoadError(source, 0, e.what());
  }
}

void save_chain(const std::filesystem::path& path, const LayerChain& chain) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError(path.string(), 0, "cannot open for writing");
  out << chain_to_json(chain);
  if (!out) throw LoadError(path.string(), 0, "write failed");
}

LayerChain load_chain(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path.string(), 0, "cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return chain_from_json(ss.str(), path.string());
}

}  // namespace mhntf
