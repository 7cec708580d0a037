// kaucus — user-simulator data pipeline CLI.
//
// Subcommands cover the three-stage workflow end to end: `index build` and
// `format` prepare training data, `simulate` runs simulator<->assistant
// interaction loops, `export` turns them into assistant training pairs, and
// `metrics` / `judge` / `score` / `prefer` / `report` evaluate the results.
// `run` drives any subset of stages from a JSON config.

#include <cstdio>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kaucus/pipeline.hpp"

namespace {

using namespace kaucus;

PipelineConfig base_config() { return PipelineConfig::from_json(Json::object()); }

SimStyle style_from_flag(const std::string& flag) {
  const auto style = parse_sim_style(flag);
  if (!style) throw ConfigError("unknown style '" + flag + "' (S1|SRAG|SCTRL|SCTRL-RAG)");
  return *style;
}

void add_backend(PipelineConfig& cfg, const std::string& role, const std::string& endpoint,
                 int timeout_ms, int retries) {
  if (endpoint.empty()) return;
  BackendDescriptor d;
  d.kind = role == "summarizer"   ? BackendKind::Summarizer
           : role == "judge"      ? BackendKind::Judge
           : role == "reward"     ? BackendKind::RewardScorer
           : role == "preference" ? BackendKind::Preference
                                  : BackendKind::Completion;
  d.endpoint = endpoint;
  d.timeout_ms = timeout_ms;
  d.retry_budget = retries;
  cfg.backends.insert_or_assign(role, d);
}

void print_counts(const RunManifest& manifest) {
  for (const auto& [key, value] : manifest.counts)
    std::cout << "  " << key << ": " << value << "\n";
  for (const auto& [path, records] : manifest.artifacts)
    std::cout << "  wrote " << path << " (" << records << " records)\n";
}

struct EvalFlags {
  std::string left, right, backend, out;
  std::string left_model = "left", right_model = "right";
  std::string rubric;
  bool both_orders = false;
  double epsilon = 1e-6;
  int concurrency = 1;
  int timeout_ms = 30000;
  int retries = 2;
};

void add_eval_flags(CLI::App* cmd, EvalFlags& flags, bool has_orders, bool has_rubric) {
  cmd->add_option("--left", flags.left, "Left-model conversations (JSONL)")->required();
  cmd->add_option("--right", flags.right, "Right-model conversations (JSONL)")->required();
  cmd->add_option("--backend", flags.backend, "Evaluator endpoint (http://... or mock:...)")
      ->required();
  cmd->add_option("--out", flags.out, "Output directory")->required();
  cmd->add_option("--left-model", flags.left_model, "Label for the left model");
  cmd->add_option("--right-model", flags.right_model, "Label for the right model");
  cmd->add_option("--epsilon", flags.epsilon, "Tie band for probability comparisons");
  cmd->add_option("--concurrency", flags.concurrency, "Concurrent evaluations");
  cmd->add_option("--timeout-ms", flags.timeout_ms, "Backend timeout");
  cmd->add_option("--retries", flags.retries, "Backend retry budget");
  if (has_orders)
    cmd->add_flag("--both-orders", flags.both_orders, "Also evaluate with the pair order reversed");
  if (has_rubric) cmd->add_option("--rubric", flags.rubric, "Judge instruction text");
}

void run_eval_mode(const EvalFlags& flags, const std::string& mode) {
  PipelineConfig cfg = base_config();
  cfg.paths.eval_left = flags.left;
  cfg.paths.eval_right = flags.right;
  cfg.paths.eval_dir = flags.out;
  cfg.eval.modes = {mode};
  cfg.eval.both_orders = flags.both_orders;
  cfg.eval.epsilon = flags.epsilon;
  cfg.eval.left_model = flags.left_model;
  cfg.eval.right_model = flags.right_model;
  if (!flags.rubric.empty()) cfg.eval.rubric = flags.rubric;
  cfg.concurrency = flags.concurrency;
  const std::string role = mode == "judge" ? "judge" : mode == "score" ? "reward" : "preference";
  add_backend(cfg, role, flags.backend, flags.timeout_ms, flags.retries);
  RunManifest manifest;
  stage_evaluate(cfg, manifest);
  print_counts(manifest);
  std::cout << "report: " << flags.out << "/report.csv\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kaucus: knowledge-augmented user-simulator data pipeline"};
  app.require_subcommand(1);

  // --- index build -----------------------------------------------------
  auto* index_cmd = app.add_subcommand("index", "Retrieval index maintenance");
  index_cmd->require_subcommand(1);
  auto* build_cmd = index_cmd->add_subcommand("build", "Build a BM25 index from passage JSONL");
  struct {
    std::string passages, out;
    double k1 = 1.2, b = 0.75;
  } build;
  build_cmd->add_option("--passages", build.passages, "Passage JSONL ({doc_id, text})")->required();
  build_cmd->add_option("--out", build.out, "Index output path")->required();
  build_cmd->add_option("--k1", build.k1, "BM25 k1 (term-frequency saturation)");
  build_cmd->add_option("--b", build.b, "BM25 b (length normalization)");

  // --- format ----------------------------------------------------------
  auto* format_cmd = app.add_subcommand("format", "Extract simulator training pairs from a corpus");
  struct {
    std::string in, out, style = "S1", index, summarizer;
  } format;
  format_cmd->add_option("--in", format.in, "Conversation corpus (JSONL)")->required();
  format_cmd->add_option("--out", format.out, "Training-pair output (JSONL)")->required();
  format_cmd->add_option("--style", format.style, "S1|SRAG|SCTRL|SCTRL-RAG");
  format_cmd->add_option("--index", format.index, "BM25 index (required for *RAG styles)");
  format_cmd->add_option("--summarizer", format.summarizer,
                         "Summarizer endpoint for SCTRL* corpora without summaries");

  // --- simulate ----------------------------------------------------------
  auto* sim_cmd = app.add_subcommand("simulate", "Run simulator<->assistant interactions");
  struct {
    std::string style = "S1", triggers, out, index, simulator, assistant, summarizer, audit,
                manifest, label;
    int budget = 5;
    std::uint64_t seed = 0;
    int concurrency = 1;
    int max_tokens = 256;
    double temperature = 0.7;
    int timeout_ms = 30000;
    int retries = 2;
  } sim;
  sim_cmd->add_option("--style", sim.style, "S1|SRAG|SCTRL|SCTRL-RAG");
  sim_cmd->add_option("--triggers", sim.triggers,
                      "Trigger JSONL (trigger, conversation, or passage records)")
      ->required();
  sim_cmd->add_option("--budget", sim.budget, "New turns to generate per conversation")->required();
  sim_cmd->add_option("--out", sim.out, "Conversation output (JSONL)")->required();
  sim_cmd->add_option("--index", sim.index, "BM25 index (required for *RAG styles)");
  sim_cmd->add_option("--simulator", sim.simulator, "Simulator completion endpoint")->required();
  sim_cmd->add_option("--assistant", sim.assistant, "Assistant completion endpoint")->required();
  sim_cmd->add_option("--summarizer", sim.summarizer,
                      "Summarizer endpoint (SCTRL* runs seeded with conversations)");
  sim_cmd->add_option("--seed", sim.seed, "Run seed");
  sim_cmd->add_option("--concurrency", sim.concurrency, "Concurrent conversations");
  sim_cmd->add_option("--audit", sim.audit, "Audit JSONL path (default: <out>.audit.jsonl)");
  sim_cmd->add_option("--manifest", sim.manifest, "Manifest output path");
  sim_cmd->add_option("--label", sim.label, "Run label (conversation ids, report group)");
  sim_cmd->add_option("--max-tokens", sim.max_tokens, "Per-turn completion budget");
  sim_cmd->add_option("--temperature", sim.temperature, "Sampling temperature");
  sim_cmd->add_option("--timeout-ms", sim.timeout_ms, "Backend timeout");
  sim_cmd->add_option("--retries", sim.retries, "Backend retry budget");

  // --- export ------------------------------------------------------------
  auto* export_cmd =
      app.add_subcommand("export", "Extract assistant training pairs from interactions");
  struct {
    std::string in, out;
    bool include_failed = false;
  } exp;
  export_cmd->add_option("--in", exp.in, "Simulated conversations (JSONL)")->required();
  export_cmd->add_option("--out", exp.out, "Training-pair output (JSONL)")->required();
  export_cmd->add_flag("--include-failed", exp.include_failed,
                       "Export pairs from aborted partial transcripts too");

  // --- metrics -----------------------------------------------------------
  auto* metrics_cmd = app.add_subcommand("metrics", "Lexical diversity report");
  struct {
    std::vector<std::string> in;
    std::string out, group_by = "simulator", scope = "generated";
    double mtld_threshold = 0.72;
    std::size_t hdd_sample_size = 42;
    std::size_t min_tokens = 50;
  } met;
  metrics_cmd->add_option("--in", met.in, "Conversation JSONL (repeatable)")->required();
  metrics_cmd->add_option("--out", met.out, "Report CSV path (a .json sibling is written too)")
      ->required();
  metrics_cmd->add_option("--group-by", met.group_by, "simulator|file");
  metrics_cmd->add_option("--scope", met.scope, "generated|all");
  metrics_cmd->add_option("--mtld-threshold", met.mtld_threshold, "MTLD factor threshold");
  metrics_cmd->add_option("--hdd-sample-size", met.hdd_sample_size, "HD-D sample size");
  metrics_cmd->add_option("--min-tokens", met.min_tokens, "Warn below this many tokens");

  // --- judge / score / prefer ---------------------------------------------
  auto* judge_cmd = app.add_subcommand("judge", "Pairwise judge comparison of two models");
  EvalFlags judge_flags;
  add_eval_flags(judge_cmd, judge_flags, /*has_orders=*/true, /*has_rubric=*/true);

  auto* score_cmd = app.add_subcommand("score", "Independent reward scoring of paired responses");
  EvalFlags score_flags;
  add_eval_flags(score_cmd, score_flags, /*has_orders=*/false, /*has_rubric=*/false);

  auto* prefer_cmd = app.add_subcommand("prefer", "Single-pass preference comparison");
  EvalFlags prefer_flags;
  add_eval_flags(prefer_cmd, prefer_flags, /*has_orders=*/true, /*has_rubric=*/false);

  // --- report --------------------------------------------------------------
  auto* report_cmd = app.add_subcommand("report", "Aggregate eval records into win/tie/loss tables");
  struct {
    std::vector<std::string> records;
    std::string out;
  } rep;
  report_cmd->add_option("--records", rep.records, "Eval record JSONL (repeatable)")->required();
  report_cmd->add_option("--out", rep.out, "Output directory")->required();

  // --- run -------------------------------------------------------------
  auto* run_cmd = app.add_subcommand("run", "Run pipeline stages from a JSON config");
  struct {
    std::string config;
    std::vector<std::string> stages;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;
  } runf;
  run_cmd->add_option("--config", runf.config, "Pipeline config (JSON)")->required();
  run_cmd->add_option("--stages", runf.stages,
                      "Stages to run (index|format|simulate|export|metrics|evaluate)");
  run_cmd->add_option("--seed", runf.seed, "Override the config seed")
      ->each([&](const std::string&) { runf.seed_set = true; });
  run_cmd->add_option("--out-dir", runf.out_dir, "Override the config out_dir");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad flags are config errors
  }

  try {
    if (*build_cmd) {
      const std::vector<Passage> passages = load_passages(build.passages);
      const InvertedIndex index = InvertedIndex::build(passages, {build.k1, build.b});
      detail::ensure_parent_dir(build.out);
      index.save(build.out);
      std::cout << "indexed " << index.doc_count() << " passages (" << index.term_count()
                << " terms, avgdl " << index.avgdl() << ") -> " << build.out << "\n";
    } else if (*format_cmd) {
      PipelineConfig cfg = base_config();
      cfg.style = style_from_flag(format.style);
      cfg.paths.conversations = format.in;
      cfg.paths.simulator_pairs = format.out;
      if (!format.index.empty()) cfg.paths.index = format.index;
      add_backend(cfg, "summarizer", format.summarizer, 30000, 2);
      RunManifest manifest;
      stage_format(cfg, manifest);
      print_counts(manifest);
    } else if (*sim_cmd) {
      PipelineConfig cfg = base_config();
      cfg.style = style_from_flag(sim.style);
      cfg.turn_budget = sim.budget;
      cfg.seed = sim.seed;
      cfg.concurrency = sim.concurrency;
      cfg.run_label = sim.label;
      cfg.paths.triggers = sim.triggers;
      cfg.paths.simulated = sim.out;
      cfg.paths.audit = sim.audit.empty() ? sim.out + ".audit.jsonl" : sim.audit;
      if (!sim.index.empty()) cfg.paths.index = sim.index;
      cfg.completion.max_tokens = sim.max_tokens;
      cfg.completion.temperature = sim.temperature;
      add_backend(cfg, "simulator", sim.simulator, sim.timeout_ms, sim.retries);
      add_backend(cfg, "assistant", sim.assistant, sim.timeout_ms, sim.retries);
      add_backend(cfg, "summarizer", sim.summarizer, sim.timeout_ms, sim.retries);
      RunManifest manifest;
      manifest.seed = cfg.seed;
      stage_simulate(cfg, manifest);
      if (!sim.manifest.empty()) save_manifest(manifest, sim.manifest);
      print_counts(manifest);
    } else if (*export_cmd) {
      PipelineConfig cfg = base_config();
      cfg.paths.simulated = exp.in;
      cfg.paths.assistant_pairs = exp.out;
      cfg.export_include_failed = exp.include_failed;
      RunManifest manifest;
      stage_export(cfg, manifest);
      print_counts(manifest);
    } else if (*metrics_cmd) {
      PipelineConfig cfg = base_config();
      cfg.metrics_inputs = met.in;
      cfg.paths.metrics_csv = met.out;
      cfg.group_by = met.group_by;
      if (cfg.group_by != "simulator" && cfg.group_by != "file")
        throw ConfigError("--group-by must be 'simulator' or 'file'");
      const auto scope = parse_metric_scope(met.scope);
      if (!scope) throw ConfigError("--scope must be 'generated' or 'all'");
      cfg.metric_scope = *scope;
      cfg.metrics.mtld_threshold = met.mtld_threshold;
      cfg.metrics.hdd_sample_size = met.hdd_sample_size;
      cfg.metrics.min_token_warning = met.min_tokens;
      validate_metric_config(cfg.metrics);
      RunManifest manifest;
      stage_metrics(cfg, manifest);
      print_counts(manifest);
    } else if (*judge_cmd) {
      run_eval_mode(judge_flags, "judge");
    } else if (*score_cmd) {
      run_eval_mode(score_flags, "score");
    } else if (*prefer_cmd) {
      run_eval_mode(prefer_flags, "prefer");
    } else if (*report_cmd) {
      std::vector<EvalRecord> records;
      for (const std::string& path : rep.records)
        for (EvalRecord& r : load_eval_records(path)) records.push_back(std::move(r));
      const std::vector<TallyRow> rows = aggregate_records(records);
      std::filesystem::create_directories(rep.out);
      write_eval_report(rows, rep.out + "/report.csv", rep.out + "/report.json");
      std::cout << "aggregated " << records.size() << " records into " << rows.size()
                << " rows -> " << rep.out << "/report.csv\n";
    } else if (*run_cmd) {
      PipelineConfig cfg = PipelineConfig::from_file(runf.config);
      if (!runf.out_dir.empty()) {
        // re-derive default paths against the overridden out_dir
        Json snapshot = cfg.snapshot;
        snapshot["out_dir"] = runf.out_dir;
        cfg = PipelineConfig::from_json(snapshot);
      }
      if (runf.seed_set) cfg.seed = runf.seed;
      const std::vector<std::string>& names = runf.stages.empty() ? cfg.stage_names : runf.stages;
      if (names.empty())
        throw ConfigError("no stages requested (use --stages or a 'stages' config key)");
      const RunManifest manifest = run_pipeline(cfg, parse_stages(names));
      print_counts(manifest);
      std::cout << "manifest: " << cfg.paths.manifest << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
