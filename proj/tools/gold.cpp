// gold: command-line front end for the noise-detection pipeline.
//
//   ingest -> synth -> mine -> train -> score -> eval
//
// Settings come from an INI file (--config) and are overridden by flags.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gold/gold.hpp"

namespace {

using namespace gold;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string need_path(const PipelineConfig& cfg, const char* key) {
  std::string value = config_key(key).get(cfg);
  if (value.empty()) throw ConfigError(std::string(key) + ": path is required for this stage");
  return value;
}

void write_json(const nlohmann::ordered_json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed: " + path);
}

// Everything the model stages need, loaded from the configured paths.
struct Workspace {
  LabeledGraph data;
  std::vector<Rule> rules;
  EmbeddingTable table{1};
  std::unique_ptr<ChainIndex> index;
  std::unique_ptr<GraphEmbeddings> embeddings;
  RuleBook book;

  ModelContext context() const { return {data.graph, *index, *embeddings, book}; }
};

Workspace load_workspace(const PipelineConfig& cfg, std::size_t dim_in, std::uint64_t seed, std::size_t k_rules) {
  Workspace ws;
  ws.data = load_any_tsv(need_path(cfg, "paths.benchmark"));
  ws.rules = read_rules(ws.data.graph, need_path(cfg, "paths.rules"));
  ws.table = cfg.paths.embeddings.empty() ? random_table(ws.data.graph, dim_in, seed)
                                          : load_embeddings(cfg.paths.embeddings);
  ws.index = std::make_unique<ChainIndex>(ws.data.graph);
  ws.embeddings = std::make_unique<GraphEmbeddings>(GraphEmbeddings::from(ws.table, ws.data.graph));
  ws.book = top_k_per_relation(ws.rules, k_rules);
  return ws;
}

void run_ingest(const PipelineConfig& cfg) {
  const auto start = Clock::now();
  const Graph g = load_tsv(need_path(cfg, "paths.raw"));
  write_tsv(g, need_path(cfg, "paths.graph"));
  if (!cfg.paths.keys.empty()) {
    std::ofstream out(cfg.paths.keys, std::ios::binary);
    if (!out) throw DataError("cannot write " + cfg.paths.keys);
    std::map<std::string, bool> seen;
    for (const auto& s : g.nodes().surfaces())
      if (seen.emplace(s, true).second) out << s << '\n';
    for (const auto& s : g.relations().surfaces())
      if (seen.emplace(s, true).second) out << s << '\n';
  }
  std::printf("ingest: %zu edges, %zu nodes, %zu relations -> %s (%.2fs)\n", g.num_edges(), g.num_nodes(),
              g.num_relations(), cfg.paths.graph.c_str(), seconds_since(start));
}

void run_synth(const PipelineConfig& cfg) {
  const auto start = Clock::now();
  const Graph g = load_tsv(need_path(cfg, "paths.graph"));
  const LabeledBenchmark bench = synthesize(g, cfg.noise.ratio, cfg.noise.seed);
  const std::string out = need_path(cfg, "paths.benchmark");
  write_benchmark(bench, out);

  std::map<std::string, std::size_t> by_type;
  for (const auto& n : bench.noise) ++by_type[std::string(to_string(n.type))];
  nlohmann::ordered_json meta{{"seed", bench.seed},
                              {"ratio", bench.ratio},
                              {"clean", bench.original_count},
                              {"noisy", bench.noise.size()},
                              {"types", by_type}};
  write_json(meta, out + ".meta.json");
  std::printf("synth: %zu clean + %zu noisy (seed %llu) -> %s (%.2fs)\n", bench.original_count, bench.noise.size(),
              static_cast<unsigned long long>(bench.seed), out.c_str(), seconds_since(start));
}

void run_mine(const PipelineConfig& cfg) {
  const auto start = Clock::now();
  const LabeledGraph data = load_any_tsv(need_path(cfg, "paths.benchmark"));
  MiningOptions opts = cfg.mining.options;
  opts.threads = cfg.training.threads;
  const auto rules = mine(data.graph, opts);
  write_rules(data.graph, rules, need_path(cfg, "paths.rules"));
  std::printf("mine: %zu rules over %zu relations -> %s (%.2fs)\n", rules.size(), data.graph.num_relations(),
              cfg.paths.rules.c_str(), seconds_since(start));
}

void run_train(const PipelineConfig& cfg) {
  const auto start = Clock::now();
  Workspace ws = load_workspace(cfg, cfg.model.dim_in, cfg.training.seed, cfg.mining.k_rules);
  const ModelContext ctx = ws.context();
  Hyper hyper = hyper_from(cfg);
  hyper.dim_in = ws.table.dim();

  const std::string ckpt = need_path(cfg, "paths.checkpoint");
  TrainResult result;
  std::string note;
  if (!cfg.lambda_grid.empty()) {
    if (!ws.data.labeled || ws.data.noisy_count() == 0)
      throw DataError("training.lambda_grid needs a labeled benchmark with noisy triples");
    const auto validation = holdout_mask(ws.data.graph.num_edges(), cfg.validation_fraction, cfg.training.seed);
    GridResult grid = grid_search_lambda(init_model(hyper), ctx, cfg.training, cfg.lambda_grid, ws.data.noisy, validation);
    for (const auto& p : grid.points)
      std::printf("  lambda %g: validation recall@k %.4f auc %.4f\n", p.lambda, p.validation.recall_at_k,
                  p.validation.auc);
    note = ", lambda " + detail::format_double(grid.points[grid.best].lambda);
    result = std::move(grid.trained);
  } else {
    result = train(init_model(hyper), ctx, cfg.training);
  }
  save_checkpoint(result.model, ckpt);

  if (!cfg.paths.train_log.empty()) {
    std::ofstream log(cfg.paths.train_log, std::ios::binary);
    if (!log) throw DataError("cannot write " + cfg.paths.train_log);
    for (const auto& e : result.log)
      log << nlohmann::ordered_json{{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"wall_ms", e.wall_ms}}.dump()
          << '\n';
  }
  std::printf("train: %zu epochs, final loss %.4f%s -> %s (%.2fs)\n", result.log.size(), result.log.back().mean_loss,
              note.c_str(), ckpt.c_str(), seconds_since(start));
}

void run_score(const PipelineConfig& cfg) {
  const auto start = Clock::now();
  const Model model = load_checkpoint(need_path(cfg, "paths.checkpoint"), cfg.model.g_max);
  Workspace ws = load_workspace(cfg, model.hyper.dim_in, model.hyper.seed, model.hyper.k_rules);
  if (ws.table.dim() != model.hyper.dim_in)
    throw DataError("embedding width " + std::to_string(ws.table.dim()) + " does not match the checkpoint's " +
                    std::to_string(model.hyper.dim_in));
  const RankedList ranked = score_all(model, ws.context(), cfg.training.threads);
  const std::string out = need_path(cfg, "paths.ranked");
  write_ranked(ws.data.graph, ranked, ws.data.labeled ? &ws.data.noisy : nullptr, out);
  write_json({{"seed", model.hyper.seed}, {"triples", ranked.size()}}, out + ".meta.json");
  std::printf("score: %zu triples ranked -> %s (%.2fs)\n", ranked.size(), out.c_str(), seconds_since(start));
}

void run_eval(const PipelineConfig& cfg) {
  const auto [ranked, noisy] = read_ranked(need_path(cfg, "paths.ranked"));
  const Metrics m = evaluate(ranked, noisy);
  if (!cfg.paths.metrics.empty()) write_json(to_json(m), cfg.paths.metrics);
  std::printf("eval: recall@k %.6f auc %.6f (k %zu, n %zu)\n", m.recall_at_k, m.auc, m.k, m.n);
}

void run_pipeline(const PipelineConfig& cfg) {
  if (!cfg.paths.raw.empty()) run_ingest(cfg);
  run_synth(cfg);
  run_mine(cfg);
  run_train(cfg);
  run_score(cfg);
  run_eval(cfg);
}

// A subcommand with its config-key flags.
struct Stage {
  CLI::App* app = nullptr;
  std::string config_file;
  std::vector<std::pair<CLI::Option*, std::string>> bindings;
  std::vector<std::string> sets;
  std::deque<std::string> values;  // flag storage; deque keeps addresses stable
  CLI::Option* seed_flag = nullptr;
  std::string seed_value;
  void (*run)(const PipelineConfig&) = nullptr;

  void bind(const std::string& flag, const std::string& key) {
    const PipelineConfig defaults;
    const ConfigKey& k = config_key(key);
    auto& slot = values.emplace_back();
    auto* opt = app->add_option(flag, slot, k.help + " (" + key + ")");
    opt->default_str(k.get(defaults));
    bindings.emplace_back(opt, key);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noise detection for commonsense knowledge graphs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gold 1.0");

  unsigned threads = 1;
  if (const char* env = std::getenv("GOLD_THREADS")) threads = static_cast<unsigned>(std::max(1, std::atoi(env)));

  std::vector<std::unique_ptr<Stage>> stages;
  auto stage = [&](const char* name, const char* help, void (*run)(const PipelineConfig&)) -> Stage& {
    auto s = std::make_unique<Stage>();
    s->app = app.add_subcommand(name, help);
    s->run = run;
    s->app->add_option("-c,--config", s->config_file, "INI configuration file");
    s->app->add_option("--threads", threads, "worker threads (falls back to GOLD_THREADS)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    stages.push_back(std::move(s));
    return *stages.back();
  };

  {
    Stage& s = stage("ingest", "Normalize a raw triple file and list its surfaces", run_ingest);
    s.bind("--input", "paths.raw");
    s.bind("--out", "paths.graph");
    s.bind("--keys", "paths.keys");
  }
  {
    Stage& s = stage("synth", "Inject labeled noise into a graph", run_synth);
    s.bind("--graph", "paths.graph");
    s.bind("--out", "paths.benchmark");
    s.bind("--ratio", "noise.ratio");
    s.bind("--seed", "noise.seed");
  }
  {
    Stage& s = stage("mine", "Mine chain rules", run_mine);
    s.bind("--benchmark", "paths.benchmark");
    s.bind("--out", "paths.rules");
    s.bind("--max-body-atoms", "mining.max_body_atoms");
    s.bind("--min-support", "mining.min_support");
    s.bind("--min-confidence", "mining.min_confidence");
    s.bind("--pca-confidence", "mining.pca_confidence");
  }
  {
    Stage& s = stage("train", "Train the energy model", run_train);
    s.bind("--benchmark", "paths.benchmark");
    s.bind("--rules", "paths.rules");
    s.bind("--embeddings", "paths.embeddings");
    s.bind("--out", "paths.checkpoint");
    s.bind("--log", "paths.train_log");
    s.bind("--k-rules", "mining.k_rules");
    s.bind("--d", "model.d");
    s.bind("--F", "model.F");
    s.bind("--dim-in", "model.dim_in");
    s.bind("--lambda", "model.lambda");
    s.bind("--lambda-t", "model.lambda_t");
    s.bind("--gamma", "model.gamma");
    s.bind("--g-max", "model.g_max");
    s.bind("--epochs", "training.epochs");
    s.bind("--batch-size", "training.batch_size");
    s.bind("--lr", "training.learning_rate");
    s.bind("--negatives", "training.negatives");
    s.bind("--clip-norm", "training.clip_norm");
    s.bind("--seed", "training.seed");
    s.bind("--live-neighbors", "training.live_neighbors");
    s.bind("--cache-refresh", "training.cache_refresh");
    s.bind("--lambda-grid", "training.lambda_grid");
    s.bind("--validation-fraction", "training.validation_fraction");
  }
  {
    Stage& s = stage("score", "Rank every triple by energy", run_score);
    s.bind("--benchmark", "paths.benchmark");
    s.bind("--rules", "paths.rules");
    s.bind("--embeddings", "paths.embeddings");
    s.bind("--checkpoint", "paths.checkpoint");
    s.bind("--out", "paths.ranked");
    s.bind("--g-max", "model.g_max");
  }
  {
    Stage& s = stage("eval", "Compute Recall@k and AUC of a ranked file", run_eval);
    s.bind("--ranked", "paths.ranked");
    s.bind("--out", "paths.metrics");
  }
  {
    Stage& s = stage("pipeline", "Run every stage in order", run_pipeline);
    s.seed_flag = s.app->add_option("--seed", s.seed_value, "seed for both noise synthesis and training");
    s.app->add_option("--set", s.sets, "override any config key, e.g. --set model.d=16")->type_name("KEY=VALUE");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  for (const auto& s : stages) {
    if (!s->app->parsed()) continue;
    try {
      PipelineConfig cfg;
      if (!s->config_file.empty()) cfg = load_config(s->config_file);
      cfg.training.threads = threads;
      for (const auto& [opt, key] : s->bindings)
        if (opt->count() > 0) set_config_value(cfg, key, opt->as<std::string>());
      if (s->seed_flag && s->seed_flag->count() > 0) {
        set_config_value(cfg, "noise.seed", s->seed_value);
        set_config_value(cfg, "training.seed", s->seed_value);
      }
      for (const auto& kv : s->sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
        set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
      }
      validate(cfg);
      s->run(cfg);
      return 0;
    } catch (const ConfigError& e) {
      std::fprintf(stderr, "gold %s: configuration error: %s\n", s->app->get_name().c_str(), e.what());
      return 1;
    } catch (const NumericError& e) {
      std::fprintf(stderr, "gold %s: numeric failure: %s\n", s->app->get_name().c_str(), e.what());
      return 3;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "gold %s: %s\n", s->app->get_name().c_str(), e.what());
      return 2;
    }
  }
  return 1;
}
