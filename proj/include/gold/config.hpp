#pragma once

// Pipeline configuration: an INI file with [paths], [noise], [mining],
// [model] and [training] sections. Every setting has a dotted key path
// ("model.d") used both in the file and in error messages, and the command
// line overrides individual keys through the same table.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "gold/error.hpp"
#include "gold/model.hpp"
#include "gold/rules.hpp"
#include "gold/trainer.hpp"

namespace gold {

struct PathsConfig {
  std::string raw;         // ingest input
  std::string graph;       // normalized graph TSV
  std::string keys;        // one surface per line, for the embedding dumper
  std::string benchmark;   // labeled TSV written by synth
  std::string embeddings;  // GOLDEMB1 file; empty selects random embeddings
  std::string rules;       // mined rules, JSONL
  std::string checkpoint;
  std::string train_log;   // JSONL, one line per epoch
  std::string ranked;      // ranked TSV
  std::string metrics;     // metrics JSON
};

struct NoiseConfig {
  double ratio = 0.10;
  std::uint64_t seed = 0;
};

struct MiningConfig {
  MiningOptions options;
  std::size_t k_rules = 100;
};

struct ModelConfig {
  std::size_t d = 100;
  std::size_t F = 100;
  std::size_t dim_in = 64;  // width of random embeddings
  double lambda = 0.5;
  double lambda_t = 0.0;
  double gamma = 5.0;
  std::size_t g_max = 1;
};

struct PipelineConfig {
  PathsConfig paths;
  NoiseConfig noise;
  MiningConfig mining;
  ModelConfig model;
  TrainConfig training;
  std::vector<double> lambda_grid;   // empty: train once with model.lambda
  double validation_fraction = 0.2;  // labeled slice used to pick lambda
};

namespace detail {

inline std::string trimmed(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  return std::string(s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& text, const char* expected) {
  const std::string s = trimmed(text);
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError(key + ": expected " + expected + ", got '" + text + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  const std::string s = trimmed(text);
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace detail

/// One configurable setting.
struct ConfigKey {
  std::string path;
  std::string help;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    auto path_key = [&](const char* name, const char* help, std::string PathsConfig::*field) {
      auto member = [field](auto& c) -> auto& { return c.paths.*field; };
      k.push_back({std::string("paths.") + name, help, [member](const PipelineConfig& c) { return member(c); },
                   [member](PipelineConfig& c, const std::string& v) { member(c) = detail::trimmed(v); }});
    };
    auto count = [&](std::string path, std::string help, auto member) {
      k.push_back({path, std::move(help), [member](const PipelineConfig& c) { return std::to_string(member(c)); },
                   [member, path](PipelineConfig& c, const std::string& v) {
                     member(c) = detail::parse_number<std::remove_cvref_t<decltype(member(c))>>(
                         path, v, "a non-negative integer");
                   }});
    };
    auto real = [&](std::string path, std::string help, auto member) {
      k.push_back({path, std::move(help), [member](const PipelineConfig& c) { return detail::format_double(member(c)); },
                   [member, path](PipelineConfig& c, const std::string& v) {
                     member(c) = detail::parse_number<double>(path, v, "a number");
                   }});
    };
    auto flag = [&](std::string path, std::string help, auto member) {
      k.push_back({path, std::move(help), [member](const PipelineConfig& c) { return member(c) ? "true" : "false"; },
                   [member, path](PipelineConfig& c, const std::string& v) { member(c) = detail::parse_bool(path, v); }});
    };

    path_key("raw", "raw head/relation/tail TSV read by ingest", &PathsConfig::raw);
    path_key("graph", "normalized graph TSV", &PathsConfig::graph);
    path_key("keys", "surface list for the embedding dumper", &PathsConfig::keys);
    path_key("benchmark", "labeled benchmark TSV", &PathsConfig::benchmark);
    path_key("embeddings", "GOLDEMB1 embeddings (empty: random)", &PathsConfig::embeddings);
    path_key("rules", "mined rules JSONL", &PathsConfig::rules);
    path_key("checkpoint", "model checkpoint", &PathsConfig::checkpoint);
    path_key("train_log", "per-epoch training log JSONL", &PathsConfig::train_log);
    path_key("ranked", "ranked triples TSV", &PathsConfig::ranked);
    path_key("metrics", "metrics JSON", &PathsConfig::metrics);

    real("noise.ratio", "fraction of noisy triples to inject", [](auto& c) -> auto& { return c.noise.ratio; });
    count("noise.seed", "noise synthesis seed", [](auto& c) -> auto& { return c.noise.seed; });

    count("mining.max_body_atoms", "maximum rule body length",
          [](auto& c) -> auto& { return c.mining.options.max_body_atoms; });
    count("mining.min_support", "minimum rule support", [](auto& c) -> auto& { return c.mining.options.min_support; });
    real("mining.min_confidence", "minimum rule confidence",
         [](auto& c) -> auto& { return c.mining.options.min_confidence; });
    flag("mining.pca_confidence", "use PCA confidence instead of standard confidence",
         [](auto& c) -> auto& { return c.mining.options.pca_confidence; });
    count("mining.k_rules", "rules kept per head relation", [](auto& c) -> auto& { return c.mining.k_rules; });

    count("model.d", "triple encoder width", [](auto& c) -> auto& { return c.model.d; });
    count("model.F", "attention latent width", [](auto& c) -> auto& { return c.model.F; });
    count("model.dim_in", "random embedding width (ignored with an embeddings file)",
          [](auto& c) -> auto& { return c.model.dim_in; });
    real("model.lambda", "local energy weight", [](auto& c) -> auto& { return c.model.lambda; });
    real("model.lambda_t", "translation energy weight", [](auto& c) -> auto& { return c.model.lambda_t; });
    real("model.gamma", "margin", [](auto& c) -> auto& { return c.model.gamma; });
    count("model.g_max", "groundings per rule", [](auto& c) -> auto& { return c.model.g_max; });

    count("training.epochs", "passes over the edges", [](auto& c) -> auto& { return c.training.epochs; });
    count("training.batch_size", "pairs per optimizer step", [](auto& c) -> auto& { return c.training.batch_size; });
    real("training.learning_rate", "Adam step size", [](auto& c) -> auto& { return c.training.learning_rate; });
    count("training.negatives", "negatives per positive",
          [](auto& c) -> auto& { return c.training.negatives_per_positive; });
    real("training.clip_norm", "global gradient norm cap (0 disables)",
         [](auto& c) -> auto& { return c.training.clip_norm; });
    count("training.seed", "seed for initialization, shuffling, negatives and random embeddings",
          [](auto& c) -> auto& { return c.training.seed; });
    flag("training.live_neighbors", "backpropagate through neighbor encodings",
         [](auto& c) -> auto& { return c.training.live_neighbors; });
    k.push_back({"training.cache_refresh", "neighbor cache refresh: per-epoch or per-batch",
                 [](const PipelineConfig& c) {
                   return std::string(c.training.cache_refresh == CacheRefresh::PerEpoch ? "per-epoch" : "per-batch");
                 },
                 [](PipelineConfig& c, const std::string& v) {
                   const auto s = detail::trimmed(v);
                   if (s == "per-epoch") c.training.cache_refresh = CacheRefresh::PerEpoch;
                   else if (s == "per-batch") c.training.cache_refresh = CacheRefresh::PerBatch;
                   else throw ConfigError("training.cache_refresh: expected per-epoch or per-batch, got '" + v + "'");
                 }});
    k.push_back({"training.lambda_grid", "comma-separated lambdas to select from on a labeled slice",
                 [](const PipelineConfig& c) {
                   std::string out;
                   for (double l : c.lambda_grid) out += (out.empty() ? "" : ",") + detail::format_double(l);
                   return out;
                 },
                 [](PipelineConfig& c, const std::string& v) {
                   c.lambda_grid.clear();
                   std::stringstream ss(v);
                   std::string item;
                   while (std::getline(ss, item, ','))
                     if (!detail::trimmed(item).empty())
                       c.lambda_grid.push_back(detail::parse_number<double>("training.lambda_grid", item, "a number"));
                 }});
    real("training.validation_fraction", "labeled fraction used for lambda selection",
         [](auto& c) -> auto& { return c.validation_fraction; });
    return k;
  }();
  return keys;
}

inline const ConfigKey& config_key(std::string_view path) {
  for (const auto& k : config_keys())
    if (k.path == path) return k;
  throw ConfigError("unknown config key '" + std::string(path) + "'");
}

inline void set_config_value(PipelineConfig& cfg, std::string_view path, const std::string& value) {
  config_key(path).set(cfg, value);
}

/// Rejects values outside their domain, naming the offending key.
inline void validate(const PipelineConfig& c) {
  auto require = [](bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError(std::string(key) + ": " + what);
  };
  require(c.noise.ratio >= 0 && c.noise.ratio < 1, "noise.ratio", "must lie in [0, 1)");
  require(c.mining.options.max_body_atoms >= 1, "mining.max_body_atoms", "must be >= 1");
  require(c.mining.options.min_confidence >= 0 && c.mining.options.min_confidence <= 1, "mining.min_confidence",
          "must lie in [0, 1]");
  require(c.mining.k_rules >= 1, "mining.k_rules", "must be >= 1");
  require(c.model.d >= 1, "model.d", "must be >= 1");
  require(c.model.F >= 1, "model.F", "must be >= 1");
  require(c.model.dim_in >= 1, "model.dim_in", "must be >= 1");
  require(c.model.lambda >= 0, "model.lambda", "must be >= 0");
  require(c.model.lambda_t >= 0, "model.lambda_t", "must be >= 0");
  require(c.model.gamma > 0, "model.gamma", "must be > 0");
  require(c.model.g_max >= 1, "model.g_max", "must be >= 1");
  require(c.training.epochs >= 1, "training.epochs", "must be >= 1");
  require(c.training.batch_size >= 1, "training.batch_size", "must be >= 1");
  require(c.training.learning_rate > 0, "training.learning_rate", "must be > 0");
  require(c.training.negatives_per_positive >= 1, "training.negatives", "must be >= 1");
  require(c.training.clip_norm >= 0, "training.clip_norm", "must be >= 0");
  for (double l : c.lambda_grid) require(l >= 0, "training.lambda_grid", "entries must be >= 0");
  require(c.validation_fraction > 0 && c.validation_fraction < 1, "training.validation_fraction",
          "must lie in (0, 1)");
}

/// Applies every key of an INI stream on top of `cfg`.
inline void apply_ini(PipelineConfig& cfg, std::istream& in, const std::string& origin = "config") {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(origin + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError(origin + ": key '" + section + "' must appear inside a section");
    for (const auto& [name, value] : body) set_config_value(cfg, section + "." + name, value.data());
  }
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  PipelineConfig cfg;
  apply_ini(cfg, in, path);
  validate(cfg);
  return cfg;
}

/// Model hyperparameters as configured; dim_in must still be set from the
/// embeddings in use.
inline Hyper hyper_from(const PipelineConfig& c) {
  Hyper h;
  h.d = c.model.d;
  h.F = c.model.F;
  h.dim_in = c.model.dim_in;
  h.lambda = c.model.lambda;
  h.gamma = c.model.gamma;
  h.lambda_t = c.model.lambda_t;
  h.k_rules = c.mining.k_rules;
  h.g_max = c.model.g_max;
  h.seed = c.training.seed;
  return h;
}

}  // namespace gold
