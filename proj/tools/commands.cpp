#include "commands.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mhntf/error.hpp"
#include "mhntf/eval.hpp"
#include "mhntf/hierarchy.hpp"
#include "mhntf/serialize.hpp"

namespace mhntf::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::vector<std::string> kMethods = {"multi-hntf", "hnmf", "hntf-i", "hncpd", "ncpd", "nmf"};

[[noreturn]] void config_fail(const std::string& field, const std::string& what) {
  throw ConfigError("config." + field + ": " + what);
}

template <typename T>
T field(const json& j, const std::string& key, const std::string& path) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    config_fail(path, "expected " + std::string(std::is_same_v<T, std::string> ? "a string"
                                                : std::is_floating_point_v<T> ? "a number"
                                                : std::is_integral_v<T>       ? "a nonnegative integer"
                                                                              : "a list"));
  }
}

fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() ? p : base / p; }

bool is_hntf_lead(const std::string& m, std::size_t* lead = nullptr) {
  if (m.rfind("hntf-", 0) != 0 || m == "hntf-i") return false;
  const std::string digits = m.substr(5);
  if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit)) return false;
  const std::size_t v = std::stoul(digits);
  if (v == 0) return false;
  if (lead) *lead = v;
  return true;
}

void check_method(const std::string& m, const std::string& path) {
  if (std::find(kMethods.begin(), kMethods.end(), m) == kMethods.end() && !is_hntf_lead(m)) {
    config_fail(path, "unknown method '" + m + "'");
  }
}

std::vector<IndexRange> parse_ranges(const json& j, const std::string& path) {
  std::vector<IndexRange> out;
  if (!j.is_array()) config_fail(path, "expected a list of [begin, end) pairs");
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto p = path + "[" + std::to_string(i) + "]";
    if (!j[i].is_array() || j[i].size() != 2 || !j[i][0].is_number_unsigned() || !j[i][1].is_number_unsigned()) {
      config_fail(p, "expected [begin, end)");
    }
    out.push_back({j[i][0].get<std::size_t>(), j[i][1].get<std::size_t>()});
  }
  return out;
}

std::vector<Block> parse_blocks(const json& j, const std::string& path) {
  std::vector<Block> out;
  if (!j.is_array()) config_fail(path, "expected a list of blocks");
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto p = path + "[" + std::to_string(i) + "]";
    Block b;
    b.ranges = parse_ranges(j[i].value("ranges", json()), p + ".ranges");
    if (j[i].contains("amplitude")) b.amplitude = field<double>(j[i], "amplitude", p + ".amplitude");
    if (j[i].contains("parent")) b.parent = field<std::size_t>(j[i], "parent", p + ".parent");
    out.push_back(std::move(b));
  }
  return out;
}

SyntheticSpec parse_synthetic(const json& j) {
  const std::string p = "input.synthetic";
  if (!j.is_object()) config_fail(p, "expected an object");
  SyntheticSpec s = SyntheticSpec::hierarchical_default();
  if (j.contains("noise_sigma2")) s.noise_sigma2 = field<double>(j, "noise_sigma2", p + ".noise_sigma2");
  if (j.contains("seed")) s.seed = field<std::uint64_t>(j, "seed", p + ".seed");
  if (j.contains("blocks")) {
    const json& b = j.at("blocks");
    s.shape = field<std::vector<std::size_t>>(j, "shape", p + ".shape");
    s.leaves = parse_blocks(b.value("leaves", json()), p + ".blocks.leaves");
    s.mid_groups = parse_blocks(b.value("mid", json()), p + ".blocks.mid");
    s.top_groups = parse_blocks(b.value("top", json()), p + ".blocks.top");
  } else if (j.contains("shape")) {
    config_fail(p + ".shape", "a custom shape needs explicit blocks");
  }
  try {
    s.validate();
  } catch (const ArgumentError& e) {
    config_fail(p, e.what());
  }
  return s;
}

FitOptions parse_options(const json& j) {
  FitOptions o;
  if (!j.is_object()) config_fail("options", "expected an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "max_iters" && key != "tol" && key != "epsilon") config_fail("options." + key, "unknown field");
  }
  if (j.contains("max_iters")) o.max_iters = field<int>(j, "max_iters", "options.max_iters");
  if (j.contains("tol")) o.tol = field<double>(j, "tol", "options.tol");
  if (j.contains("epsilon")) o.epsilon = field<double>(j, "epsilon", "options.epsilon");
  try {
    o.validate();
  } catch (const ArgumentError& e) {
    config_fail("options", e.what());
  }
  return o;
}

struct Dataset {
  DenseTensor tensor;
  std::optional<LabelMatrix> labels;
};

DenseTensor load_input(const fs::path& p) {
  if (p.extension() == ".csv") return DenseTensor::from_matrix(load_matrix(p));
  return load_tensor(p);
}

// Synthetic inputs draw fresh noise per trial: noise seed = synthetic.seed + trial seed.
Dataset make_dataset(const RunConfig& cfg, std::uint64_t trial_seed) {
  if (cfg.synthetic) {
    SyntheticSpec s = *cfg.synthetic;
    s.seed += trial_seed;
    return {gen_synthetic(s).tensor, std::nullopt};
  }
  Dataset d{load_input(*cfg.input_path), std::nullopt};
  if (cfg.labels) {
    d.labels = load_labels(*cfg.labels);
    if (d.tensor.order() != 2) throw ConfigError("config.supervision: labels require an order-2 input");
    if (d.labels->y.cols() != d.tensor.dim(1)) {
      throw ConfigError("config.supervision.labels: " + std::to_string(d.labels->y.cols()) +
                        " labelled samples but the input has " + std::to_string(d.tensor.dim(1)) + " columns");
    }
  }
  return d;
}

LayerChain flat_chain(const std::string& method, const DenseTensor& t, const HierarchySpec& spec) {
  LayerChain chain{method, {}, spec.layer_options(0).seed, spec.options};
  for (std::size_t l = 0; l < spec.ranks.size(); ++l) {
    const std::size_t r = spec.ranks[l];
    FactorSet f = [&] {
      if (method == "nmf") {
        NmfResult res = nmf(t.to_matrix(), r, spec.layer_options(0));
        return FactorSet({res.a, res.s.transposed()});
      }
      return ncpd(t, r, spec.layer_options(0)).factors;
    }();
    const auto [abs_loss, rel_loss] = layer_loss(t, f);
    chain.layers.push_back(Layer{.rank = r,
                                 .factors = std::move(f),
                                 .mixing = std::nullopt,
                                 .relative_loss = rel_loss,
                                 .absolute_loss = abs_loss,
                                 .label_dictionary = std::nullopt});
  }
  return chain;
}

LayerChain fit_once(const std::string& method, const Dataset& d, const HierarchySpec& spec,
                    std::size_t lead_mode, double lambda, bool supervised) {
  const DenseTensor& t = d.tensor;
  if (method == "multi-hntf") {
    if (supervised) return multi_hntf_supervised(t, *d.labels, spec, lambda);
    return multi_hntf(t, spec);
  }
  if (method == "hnmf") return hnmf(t.to_matrix(), spec);
  if (method == "hncpd") return standard_hncpd(t, spec).chain;
  if (method == "ncpd" || method == "nmf") return flat_chain(method, t, spec);
  std::size_t lead = lead_mode;
  if (method != "hntf-i") is_hntf_lead(method, &lead);
  if (lead == 0 || lead > t.order()) {
    throw ArgumentError("lead mode " + std::to_string(lead) + " out of range for order " + std::to_string(t.order()));
  }
  return hntf_i(t, spec, lead - 1);
}

// Runs cfg.starts restarts from `seed` and keeps the lowest final-layer loss.
LayerChain fit_best(const std::string& method, const Dataset& d, const RunConfig& cfg, std::uint64_t seed,
                    bool supervised) {
  std::optional<LayerChain> best;
  for (std::size_t j = 0; j < cfg.starts; ++j) {
    HierarchySpec spec{cfg.ranks, {cfg.options}};
    spec.options[0].seed = j == 0 ? seed : splitmix64(seed + j);
    LayerChain c = fit_once(method, d, spec, cfg.lead_mode, cfg.lambda, supervised);
    if (!best || c.layers.back().relative_loss < best->layers.back().relative_loss) best = std::move(c);
  }
  return std::move(*best);
}

struct Task {
  std::string method;
  std::uint64_t seed = 0;
  bool supervised = false;
};

struct Outcome {
  std::optional<LayerChain> chain;
  std::vector<ReportRow> rows;
  std::string error;
  double seconds = 0.0;
};

std::vector<Outcome> run_tasks(const RunConfig& cfg, const std::vector<Task>& tasks, int jobs) {
  std::vector<Outcome> out(tasks.size());
  const FitOptions posthoc = cfg.options;
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    try {
      const Dataset d = make_dataset(cfg, tasks[i].seed);
      LayerChain chain = fit_best(tasks[i].method, d, cfg, tasks[i].seed, tasks[i].supervised);
      FitOptions o = posthoc;
      o.seed = chain.seed;
      out[i].rows = report_rows(chain, d.labels ? &*d.labels : nullptr, o);
      out[i].chain = std::move(chain);
    } catch (const std::exception& e) {
      out[i].error = e.what();
    }
    out[i].seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (ReportRow& r : out[i].rows) r.wall_seconds = out[i].seconds;
  }
  return out;
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw LoadError(path.string(), 0, "cannot open for writing");
  f << content;
}

std::string fmt(double v, int digits = 6) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

int report_failures(const std::vector<Task>& tasks, const std::vector<Outcome>& outcomes, std::ostream& err) {
  int failed = 0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (outcomes[i].error.empty()) continue;
    if (failed++ == 0) err << "failed fits:\n";
    err << "  " << tasks[i].method << " seed " << tasks[i].seed << ": " << outcomes[i].error << '\n';
  }
  return failed ? 1 : 0;
}

std::vector<std::string> expand_methods(const RunConfig& cfg, std::size_t order) {
  std::vector<std::string> out;
  for (const std::string& m : cfg.methods) {
    if (m == "hntf-i") {
      for (std::size_t i = 1; i <= order; ++i) out.push_back("hntf-" + std::to_string(i));
    } else {
      out.push_back(m);
    }
  }
  return out;
}

std::size_t input_order(const RunConfig& cfg) {
  if (cfg.synthetic) return cfg.synthetic->shape.size();
  return make_dataset(cfg, 0).tensor.order();
}

void check_compatible(const RunConfig& cfg, std::size_t order) {
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
    const std::string& m = cfg.methods[i];
    if ((m == "hnmf" || m == "nmf") && order != 2) {
      config_fail(cfg.methods.size() == 1 ? "method" : "methods[" + std::to_string(i) + "]",
                  m + " requires an order-2 input, got order " + std::to_string(order));
    }
    std::size_t lead = 0;
    if (is_hntf_lead(m, &lead) && lead > order) {
      config_fail("methods[" + std::to_string(i) + "]", "lead mode out of range for order " + std::to_string(order));
    }
  }
  if (cfg.lead_mode == 0 || cfg.lead_mode > order) config_fail("lead_mode", "out of range");
}

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  if (!cfg.synthetic) config_fail("input.synthetic", "synth needs a synthetic input");
  const SyntheticData d = gen_synthetic(*cfg.synthetic);
  fs::create_directories(cfg.output);
  write_tensor_dtf(cfg.output / "tensor.dtf", d.tensor);
  write_tensor_dtf(cfg.output / "noiseless.dtf", d.noiseless);

  // Ground truth as a chain: layers at the leaf, mid and top ranks, mixing = memberships.
  LayerChain truth{"synthetic-truth", {}, cfg.synthetic->seed, {}};
  const FactorSet* sets[] = {&d.truth_leaf, &d.truth_mid, &d.truth_top};
  const Matrix* mixes[] = {&d.leaf_to_mid, &d.mid_to_top, nullptr};
  for (int l = 0; l < 3; ++l) {
    const auto [abs_loss, rel_loss] = layer_loss(d.tensor, *sets[l]);
    truth.layers.push_back(Layer{.rank = sets[l]->rank(),
                                 .factors = *sets[l],
                                 .mixing = mixes[l] ? std::optional<Matrix>(*mixes[l]) : std::nullopt,
                                 .relative_loss = rel_loss,
                                 .absolute_loss = abs_loss,
                                 .label_dictionary = std::nullopt});
  }
  save_chain(cfg.output / "truth.json", truth);
  out << "wrote " << (cfg.output / "tensor.dtf").string() << ", noiseless.dtf, truth.json\n";
  return 0;
}

int cmd_fit(const RunConfig& cfg, int jobs, bool wall_time, std::ostream& out, std::ostream& err) {
  if (cfg.methods.size() != 1) config_fail("method", "fit takes exactly one method");
  const std::size_t order = input_order(cfg);
  check_compatible(cfg, order);
  const bool supervised = cfg.labels.has_value() && cfg.methods[0] == "multi-hntf";

  std::vector<Task> tasks;
  for (std::uint64_t s : cfg.seeds) tasks.push_back({cfg.methods[0], s, supervised});
  const auto outcomes = run_tasks(cfg, tasks, jobs);

  std::vector<ReportRow> rows;
  fs::create_directories(cfg.output / "chains");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!outcomes[i].chain) continue;
    save_chain(cfg.output / "chains" / (tasks[i].method + "_seed" + std::to_string(tasks[i].seed) + ".json"),
               *outcomes[i].chain);
    rows.insert(rows.end(), outcomes[i].rows.begin(), outcomes[i].rows.end());
  }
  write_file(cfg.output / "report.csv", report_csv(rows, wall_time));
  write_file(cfg.output / "report.json", report_json(rows, wall_time));

  out << "method      layer  rank  rel.loss  abs.loss  accuracy  seed\n";
  for (const ReportRow& r : rows) {
    char line[160];
    std::snprintf(line, sizeof line, "%-11s %5zu %5zu  %8.4f  %8.4g  %8s  %llu\n", r.method.c_str(), r.layer,
                  r.rank, r.relative_loss, r.absolute_loss, r.accuracy ? fmt(*r.accuracy, 4).c_str() : "-",
                  static_cast<unsigned long long>(r.seed));
    out << line;
  }
  return report_failures(tasks, outcomes, err);
}

struct Summary {
  double median = 0, min = 0, max = 0;
  std::size_t n = 0;
};

Summary summarize(const std::vector<double>& v) {
  return {median(v), *std::min_element(v.begin(), v.end()), *std::max_element(v.begin(), v.end()), v.size()};
}

int cmd_compare(const RunConfig& cfg, int jobs, bool wall_time, std::ostream& out, std::ostream& err) {
  const std::size_t order = input_order(cfg);
  check_compatible(cfg, order);
  const auto methods = expand_methods(cfg, order);
  const bool supervised_table = cfg.labels.has_value();

  std::vector<Task> tasks;
  for (const std::string& m : methods) {
    for (std::uint64_t s : cfg.seeds) tasks.push_back({m, s, false});
  }
  if (supervised_table) {
    const bool have_plain = std::find(methods.begin(), methods.end(), "multi-hntf") != methods.end();
    for (std::uint64_t s : cfg.seeds) {
      tasks.push_back({"multi-hntf", s, true});
      if (!have_plain) tasks.push_back({"multi-hntf", s, false});
    }
  }
  const auto outcomes = run_tasks(cfg, tasks, jobs);

  std::vector<ReportRow> all;
  for (const auto& o : outcomes) all.insert(all.end(), o.rows.begin(), o.rows.end());
  write_file(cfg.output / "runs.csv", report_csv(all, wall_time));

  // methods x layers: median [min, max] relative loss over seeds.
  const std::size_t layers = cfg.ranks.size();
  std::string csv = "method,layer,rank,median,min,max,n\n";
  std::string table = "| method |";
  for (std::size_t r : cfg.ranks) table += " r=" + std::to_string(r) + " |";
  table += "\n|---|";
  for (std::size_t l = 0; l < layers; ++l) table += "---|";
  table += "\n";
  for (const std::string& m : methods) {
    table += "| " + m + " |";
    for (std::size_t l = 0; l < layers; ++l) {
      std::vector<double> v;
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (tasks[i].method == m && !tasks[i].supervised && outcomes[i].chain) {
          v.push_back(outcomes[i].chain->layers[l].relative_loss);
        }
      }
      if (v.empty()) {
        table += " failed |";
        continue;
      }
      const Summary s = summarize(v);
      csv += m + ',' + std::to_string(l) + ',' + std::to_string(cfg.ranks[l]) + ',' + fmt(s.median, 17) + ',' +
             fmt(s.min, 17) + ',' + fmt(s.max, 17) + ',' + std::to_string(s.n) + '\n';
      table += " " + fmt(s.median, 3) + " [" + fmt(s.min, 3) + ", " + fmt(s.max, 3) + "] |";
    }
    table += "\n";
  }
  write_file(cfg.output / "compare.csv", csv);
  write_file(cfg.output / "compare.md", table);
  out << table;

  if (supervised_table) {
    // Supervised vs unsupervised Multi-HNTF per layer: absolute loss,
    // relative loss and accuracy medians (unsupervised accuracy uses a post-hoc B).
    std::string t1 = "layer,rank,supervised_absolute_loss,supervised_relative_loss,supervised_accuracy,"
                     "unsupervised_absolute_loss,unsupervised_relative_loss,unsupervised_accuracy\n";
    std::string md = "| layer | rank | model | abs. loss | rel. loss | accuracy |\n|---|---|---|---|---|---|\n";
    for (std::size_t l = 0; l < layers; ++l) {
      t1 += std::to_string(l) + ',' + std::to_string(cfg.ranks[l]);
      for (bool sup : {true, false}) {
        std::vector<double> a, r, acc;
        for (std::size_t i = 0; i < tasks.size(); ++i) {
          if (tasks[i].method != "multi-hntf" || tasks[i].supervised != sup || !outcomes[i].chain) continue;
          const ReportRow& row = outcomes[i].rows[l];
          a.push_back(row.absolute_loss);
          r.push_back(row.relative_loss);
          acc.push_back(*row.accuracy);
        }
        if (a.empty()) {
          t1 += ",,,";
          continue;
        }
        const double ma = median(a), mr = median(r), macc = median(acc);
        t1 += ',' + fmt(ma, 17) + ',' + fmt(mr, 17) + ',' + fmt(macc, 17);
        md += "| " + std::to_string(l) + " | " + std::to_string(cfg.ranks[l]) + " | " +
              (sup ? "supervised" : "unsupervised") + " | " + fmt(ma, 3) + " | " + fmt(mr, 3) + " | " +
              fmt(macc, 3) + " |\n";
      }
      t1 += '\n';
    }
    write_file(cfg.output / "supervised.csv", t1);
    write_file(cfg.output / "supervised.md", md);
    out << '\n' << md;
  }
  return report_failures(tasks, outcomes, err);
}

int cmd_export(const RunConfig& cfg, std::ostream& out) {
  if (!cfg.export_.chain) config_fail("export.chain", "missing (or pass --chain)");
  const LayerChain chain = load_chain(*cfg.export_.chain);
  const std::size_t order = chain.layers.front().factors.order();
  std::vector<std::size_t> modes;
  for (std::size_t m : cfg.export_.modes) {
    if (m == 0 || m > order) config_fail("export.modes", "mode " + std::to_string(m) + " out of range");
    modes.push_back(m - 1);
  }
  if (modes.empty()) {
    for (std::size_t m = 0; m < order; ++m) modes.push_back(m);
  }
  const auto files = heatmap_export(chain, modes, cfg.output / "heatmaps");
  out << "wrote " << files.size() << " heatmap files under " << (cfg.output / "heatmaps").string() << '\n';

  if (cfg.export_.vocab) {
    const std::size_t km = cfg.export_.keyword_mode.value_or(order);
    if (km == 0 || km > order) config_fail("export.keyword_mode", "out of range");
    const auto vocab = load_vocab(*cfg.export_.vocab);
    std::string csv = "layer,topic,position,word,weight\n";
    for (std::size_t l = 0; l < chain.layers.size(); ++l) {
      const Matrix& wf = chain.layers[l].factors.factor(km - 1);
      const Matrix p = normalize_columns_l1(wf);
      const auto words = top_keywords(wf, vocab, cfg.export_.keywords);
      const auto idx = top_keyword_indices(wf, cfg.export_.keywords);
      for (std::size_t t = 0; t < words.size(); ++t) {
        for (std::size_t k = 0; k < words[t].size(); ++k) {
          csv += std::to_string(l) + ',' + std::to_string(t + 1) + ',' + std::to_string(k + 1) + ',' + words[t][k] +
                 ',' + fmt(p(idx[t][k], t), 17) + '\n';
        }
      }
    }
    write_file(cfg.output / "keywords.csv", csv);
    out << "wrote " << (cfg.output / "keywords.csv").string() << '\n';
  }
  return 0;
}

}  // namespace

RunConfig parse_config(const std::string& text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");

  static const std::vector<std::string> known = {"version", "input", "method", "methods", "ranks",
                                                 "seeds", "starts", "options", "lead_mode", "supervision",
                                                 "output", "export"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) config_fail(key, "unknown field");
  }

  RunConfig cfg;
  cfg.version = j.contains("version") ? field<int>(j, "version", "version") : 1;
  if (cfg.version != 1) config_fail("version", "unsupported version " + std::to_string(cfg.version));

  if (j.contains("input")) {
    const json& in = j.at("input");
    if (!in.is_object()) config_fail("input", "expected an object");
    const bool has_path = in.contains("path"), has_synth = in.contains("synthetic");
    if (has_path == has_synth) config_fail("input", "give exactly one of path or synthetic");
    if (has_path) cfg.input_path = resolve(base_dir, field<std::string>(in, "path", "input.path"));
    if (has_synth) cfg.synthetic = parse_synthetic(in.at("synthetic"));
  }

  if (j.contains("method") && j.contains("methods")) config_fail("method", "give method or methods, not both");
  if (j.contains("method")) {
    cfg.methods = {field<std::string>(j, "method", "method")};
    check_method(cfg.methods[0], "method");
  } else if (j.contains("methods")) {
    cfg.methods = field<std::vector<std::string>>(j, "methods", "methods");
    if (cfg.methods.empty()) config_fail("methods", "empty");
    for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
      check_method(cfg.methods[i], "methods[" + std::to_string(i) + "]");
    }
  }

  if (j.contains("ranks")) {
    cfg.ranks = field<std::vector<std::size_t>>(j, "ranks", "ranks");
    try {
      HierarchySpec{cfg.ranks, {FitOptions{}}}.validate();
    } catch (const ArgumentError& e) {
      config_fail("ranks", e.what());
    }
  }
  if (j.contains("seeds")) {
    cfg.seeds = field<std::vector<std::uint64_t>>(j, "seeds", "seeds");
    if (cfg.seeds.empty()) config_fail("seeds", "empty");
  }
  if (j.contains("starts")) {
    cfg.starts = field<std::size_t>(j, "starts", "starts");
    if (cfg.starts == 0) config_fail("starts", "must be at least 1");
  }
  if (j.contains("options")) cfg.options = parse_options(j.at("options"));
  if (j.contains("lead_mode")) cfg.lead_mode = field<std::size_t>(j, "lead_mode", "lead_mode");

  if (j.contains("supervision")) {
    const json& s = j.at("supervision");
    if (!s.is_object()) config_fail("supervision", "expected an object");
    cfg.labels = resolve(base_dir, field<std::string>(s, "labels", "supervision.labels"));
    if (s.contains("lambda")) cfg.lambda = field<double>(s, "lambda", "supervision.lambda");
    if (!(cfg.lambda >= 0.0)) config_fail("supervision.lambda", "must be >= 0");
    if (cfg.synthetic) config_fail("supervision", "labels need a file input");
  }
  if (j.contains("output")) cfg.output = resolve(base_dir, field<std::string>(j, "output", "output"));
  else cfg.output = base_dir / "out";

  if (j.contains("export")) {
    const json& e = j.at("export");
    if (!e.is_object()) config_fail("export", "expected an object");
    if (e.contains("chain")) cfg.export_.chain = resolve(base_dir, field<std::string>(e, "chain", "export.chain"));
    if (e.contains("vocab")) cfg.export_.vocab = resolve(base_dir, field<std::string>(e, "vocab", "export.vocab"));
    if (e.contains("modes")) cfg.export_.modes = field<std::vector<std::size_t>>(e, "modes", "export.modes");
    if (e.contains("keywords")) cfg.export_.keywords = field<std::size_t>(e, "keywords", "export.keywords");
    if (e.contains("keyword_mode")) {
      cfg.export_.keyword_mode = field<std::size_t>(e, "keyword_mode", "export.keyword_mode");
    }
  }
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical nonnegative tensor factorization"};
  app.require_subcommand(1);
  std::string config_path, out_dir, chain_path;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool wall_time = false;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", config_path, "JSON config file");
    if (needs_config) c->required();
    sub->add_option("--seed", seed, "Use this single seed instead of the config's seeds");
    sub->add_option("--out", out_dir, "Output directory (overrides the config)");
    sub->add_option("--jobs", jobs, "Parallel fits")->check(CLI::PositiveNumber);
  };
  auto* synth = app.add_subcommand("synth", "Write the synthetic tensor and its ground truth");
  auto* fit = app.add_subcommand("fit", "Fit one method for every seed");
  auto* compare = app.add_subcommand("compare", "Fit several methods and tabulate losses");
  auto* exp = app.add_subcommand("export", "Write heatmap and keyword CSVs for a saved chain");
  add_common(synth, true);
  add_common(fit, true);
  add_common(compare, true);
  add_common(exp, false);
  exp->add_option("--chain", chain_path, "Chain JSON (overrides export.chain)");
  for (auto* sub : {fit, compare}) {
    sub->add_flag("--wall-time", wall_time, "Add wall-clock seconds to reports (not reproducible)");
  }

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (config_path.empty()) cfg.output = "out";
    if (!out_dir.empty()) cfg.output = out_dir;
    if (!chain_path.empty()) cfg.export_.chain = chain_path;

    if (synth->parsed()) {
      if (seed && cfg.synthetic) cfg.synthetic->seed = *seed;
      return cmd_synth(cfg, out);
    }
    if (exp->parsed()) return cmd_export(cfg, out);

    if (seed) cfg.seeds = {*seed};
    if (!cfg.input_path && !cfg.synthetic) config_fail("input", "missing");
    if (cfg.methods.empty()) config_fail("method", "missing");
    if (cfg.ranks.empty()) config_fail("ranks", "missing");
    if (fit->parsed()) return cmd_fit(cfg, jobs, wall_time, out, err);
    return cmd_compare(cfg, jobs, wall_time, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace mhntf::cli
