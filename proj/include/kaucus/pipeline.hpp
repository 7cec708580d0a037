#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kaucus/backends.hpp"
#include "kaucus/core.hpp"
#include "kaucus/engine.hpp"
#include "kaucus/errors.hpp"
#include "kaucus/eval.hpp"
#include "kaucus/formatting.hpp"
#include "kaucus/http_backends.hpp"
#include "kaucus/jsonl.hpp"
#include "kaucus/metrics.hpp"
#include "kaucus/retrieval.hpp"

namespace kaucus {

enum class Stage { Index, Format, Simulate, Export, Metrics, Evaluate };

inline const char* to_string(Stage s) {
  switch (s) {
    case Stage::Index: return "index";
    case Stage::Format: return "format";
    case Stage::Simulate: return "simulate";
    case Stage::Export: return "export";
    case Stage::Metrics: return "metrics";
    case Stage::Evaluate: return "evaluate";
  }
  return "index";
}

inline std::optional<Stage> parse_stage(std::string_view name) {
  if (name == "index") return Stage::Index;
  if (name == "format") return Stage::Format;
  if (name == "simulate") return Stage::Simulate;
  if (name == "export") return Stage::Export;
  if (name == "metrics") return Stage::Metrics;
  if (name == "evaluate") return Stage::Evaluate;
  return std::nullopt;
}

inline constexpr Stage kStageOrder[] = {Stage::Index,  Stage::Format,  Stage::Simulate,
                                        Stage::Export, Stage::Metrics, Stage::Evaluate};

inline std::set<Stage> parse_stages(const std::vector<std::string>& names) {
  std::set<Stage> stages;
  for (const std::string& name : names) {
    const auto stage = parse_stage(name);
    if (!stage) throw ConfigError("unknown stage '" + name + "'");
    stages.insert(*stage);
  }
  return stages;
}

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  SimStyle style = SimStyle::S1;
  int turn_budget = 5;
  int concurrency = 1;
  std::string run_label;

  struct Paths {
    std::string conversations;    // format input corpus
    std::string passages;         // index input
    std::string triggers;         // simulate input
    std::string index;            // built by `index`, read by *RAG stages
    std::string simulated;        // simulate output
    std::string simulator_pairs;  // format output
    std::string assistant_pairs;  // export output
    std::string metrics_csv;      // metrics output (a .json sibling is written too)
    std::string audit;            // backend/retrieval audit trail
    std::string manifest;         // run manifest
    std::string eval_left;        // evaluate inputs
    std::string eval_right;
    std::string eval_dir;         // evaluate outputs
  } paths;

  Bm25Params bm25;
  std::map<std::string, BackendDescriptor> backends;  // simulator/assistant/summarizer/judge/reward/preference
  CompletionParams completion;
  MetricConfig metrics;
  MetricScope metric_scope = MetricScope::GeneratedOnly;
  std::string group_by = "simulator";  // or "file"
  std::vector<std::string> metrics_inputs;

  struct EvalSettings {
    std::vector<std::string> modes{"judge"};
    bool both_orders = true;
    double epsilon = 1e-6;
    std::string rubric = kDefaultJudgeRubric;
    std::string left_model = "left";
    std::string right_model = "right";
    bool retry_unparseable = false;
  } eval;

  bool export_include_failed = false;
  int training_epochs = 10;
  double training_learning_rate = 1e-6;
  std::vector<std::string> stage_names;  // stages to run under `run`

  Json snapshot = Json::object();

  static PipelineConfig from_json(const Json& j);
  static PipelineConfig from_file(const std::string& path);

  // Fills path defaults under out_dir; explicit values win.
  void resolve_paths() {
    auto fallback = [this](std::string& value, const char* leaf) {
      if (value.empty()) value = out_dir + "/" + leaf;
    };
    fallback(paths.index, "passages.idx");
    fallback(paths.simulated, "simulated.jsonl");
    fallback(paths.simulator_pairs, "simulator_pairs.jsonl");
    fallback(paths.assistant_pairs, "assistant_pairs.jsonl");
    fallback(paths.metrics_csv, "metrics.csv");
    fallback(paths.audit, "audit.jsonl");
    fallback(paths.manifest, "manifest.json");
    fallback(paths.eval_dir, "eval");
    if (metrics_inputs.empty()) metrics_inputs.push_back(paths.simulated);
  }

  const BackendDescriptor* backend(const std::string& role) const {
    auto it = backends.find(role);
    return it == backends.end() ? nullptr : &it->second;
  }

  const BackendDescriptor& require_backend(const std::string& role) const {
    const BackendDescriptor* d = backend(role);
    if (!d) throw ConfigError("no '" + role + "' backend configured");
    return *d;
  }
};

namespace detail {

inline BackendDescriptor descriptor_from_json(BackendKind kind, const Json& j) {
  BackendDescriptor d;
  d.kind = kind;
  if (j.is_string()) {
    d.endpoint = j.get<std::string>();
  } else if (j.is_object()) {
    d.endpoint = require_field(j, "endpoint").get<std::string>();
    d.timeout_ms = j.value("timeout_ms", d.timeout_ms);
    d.retry_budget = j.value("retry_budget", d.retry_budget);
  } else {
    throw ConfigError("backend descriptor must be a string or an object");
  }
  validate_descriptor(d);
  return d;
}

inline BackendKind backend_kind_for_role(const std::string& role) {
  if (role == "simulator" || role == "assistant") return BackendKind::Completion;
  if (role == "summarizer") return BackendKind::Summarizer;
  if (role == "reward") return BackendKind::RewardScorer;
  if (role == "preference") return BackendKind::Preference;
  if (role == "judge") return BackendKind::Judge;
  throw ConfigError("unknown backend role '" + role + "'");
}

}  // namespace detail

inline PipelineConfig PipelineConfig::from_json(const Json& j) {
  PipelineConfig cfg;
  cfg.snapshot = j;
  try {
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.out_dir = j.value("out_dir", std::string("out"));
    if (auto it = j.find("style"); it != j.end()) {
      const auto style = parse_sim_style(it->get<std::string>());
      if (!style) throw ConfigError("unknown style '" + it->get<std::string>() + "'");
      cfg.style = *style;
    }
    cfg.turn_budget = j.value("turn_budget", 5);
    cfg.concurrency = j.value("concurrency", 1);
    cfg.run_label = j.value("run_label", std::string{});
    if (auto it = j.find("paths"); it != j.end()) {
      const Json& p = *it;
      cfg.paths.conversations = p.value("conversations", std::string{});
      cfg.paths.passages = p.value("passages", std::string{});
      cfg.paths.triggers = p.value("triggers", std::string{});
      cfg.paths.index = p.value("index", std::string{});
      cfg.paths.simulated = p.value("simulated", std::string{});
      cfg.paths.simulator_pairs = p.value("simulator_pairs", std::string{});
      cfg.paths.assistant_pairs = p.value("assistant_pairs", std::string{});
      cfg.paths.metrics_csv = p.value("metrics_csv", std::string{});
      cfg.paths.audit = p.value("audit", std::string{});
      cfg.paths.manifest = p.value("manifest", std::string{});
      cfg.paths.eval_left = p.value("eval_left", std::string{});
      cfg.paths.eval_right = p.value("eval_right", std::string{});
      cfg.paths.eval_dir = p.value("eval_dir", std::string{});
    }
    if (auto it = j.find("bm25"); it != j.end()) {
      cfg.bm25.k1 = it->value("k1", cfg.bm25.k1);
      cfg.bm25.b = it->value("b", cfg.bm25.b);
    }
    if (auto it = j.find("backends"); it != j.end())
      for (const auto& [role, desc] : it->items())
        cfg.backends.emplace(role,
                             detail::descriptor_from_json(detail::backend_kind_for_role(role), desc));
    if (auto it = j.find("completion"); it != j.end()) {
      cfg.completion.max_tokens = it->value("max_tokens", cfg.completion.max_tokens);
      cfg.completion.temperature = it->value("temperature", cfg.completion.temperature);
      if (auto stop = it->find("stop"); stop != it->end())
        cfg.completion.stop = stop->get<std::vector<std::string>>();
    }
    if (auto it = j.find("metrics"); it != j.end()) {
      cfg.metrics.mtld_threshold = it->value("mtld_threshold", cfg.metrics.mtld_threshold);
      cfg.metrics.hdd_sample_size = it->value("hdd_sample_size", cfg.metrics.hdd_sample_size);
      cfg.metrics.min_token_warning = it->value("min_token_warning", cfg.metrics.min_token_warning);
      if (auto scope = it->find("scope"); scope != it->end()) {
        const auto parsed = parse_metric_scope(scope->get<std::string>());
        if (!parsed) throw ConfigError("unknown metric scope '" + scope->get<std::string>() + "'");
        cfg.metric_scope = *parsed;
      }
      cfg.group_by = it->value("group_by", cfg.group_by);
      if (cfg.group_by != "simulator" && cfg.group_by != "file")
        throw ConfigError("group_by must be 'simulator' or 'file'");
      if (auto inputs = it->find("inputs"); inputs != it->end())
        cfg.metrics_inputs = inputs->get<std::vector<std::string>>();
    }
    if (auto it = j.find("eval"); it != j.end()) {
      if (auto modes = it->find("modes"); modes != it->end())
        cfg.eval.modes = modes->get<std::vector<std::string>>();
      for (const std::string& mode : cfg.eval.modes)
        if (mode != "judge" && mode != "score" && mode != "prefer")
          throw ConfigError("unknown eval mode '" + mode + "'");
      cfg.eval.both_orders = it->value("both_orders", cfg.eval.both_orders);
      cfg.eval.epsilon = it->value("epsilon", cfg.eval.epsilon);
      cfg.eval.rubric = it->value("rubric", cfg.eval.rubric);
      cfg.eval.left_model = it->value("left_model", cfg.eval.left_model);
      cfg.eval.right_model = it->value("right_model", cfg.eval.right_model);
      cfg.eval.retry_unparseable = it->value("retry_unparseable", cfg.eval.retry_unparseable);
    }
    if (auto it = j.find("export"); it != j.end())
      cfg.export_include_failed = it->value("include_failed", cfg.export_include_failed);
    if (auto it = j.find("training"); it != j.end()) {
      cfg.training_epochs = it->value("epochs", cfg.training_epochs);
      cfg.training_learning_rate = it->value("learning_rate", cfg.training_learning_rate);
    }
    if (auto it = j.find("stages"); it != j.end())
      cfg.stage_names = it->get<std::vector<std::string>>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad pipeline config: ") + e.what());
  }
  if (cfg.turn_budget < 1) throw ConfigError("turn_budget must be >= 1");
  if (cfg.concurrency < 1) throw ConfigError("concurrency must be >= 1");
  validate_metric_config(cfg.metrics);
  cfg.resolve_paths();
  return cfg;
}

inline PipelineConfig PipelineConfig::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(j);
}

// ---------------------------------------------------------------------------
// Stages. Each reads its inputs from disk and writes its artifacts, so any
// stage can be re-run in isolation.

namespace detail {

inline void ensure_parent_dir(const std::string& path) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

inline std::string sibling_json_path(const std::string& csv_path) {
  std::filesystem::path p(csv_path);
  p.replace_extension(".json");
  return p.string();
}

}  // namespace detail

inline void stage_index(const PipelineConfig& cfg, RunManifest& manifest) {
  const std::vector<Passage> passages = load_passages(cfg.paths.passages);
  const InvertedIndex index = InvertedIndex::build(passages, cfg.bm25);
  detail::ensure_parent_dir(cfg.paths.index);
  index.save(cfg.paths.index);
  manifest.counts["indexed_passages"] = passages.size();
  manifest.artifacts[cfg.paths.index] = passages.size();
}

inline void stage_format(const PipelineConfig& cfg, RunManifest& manifest) {
  std::vector<Conversation> conversations = load_conversations(cfg.paths.conversations);
  const RenderStyle style(cfg.style);

  std::optional<InvertedIndex> index;
  Top1Retriever retriever;
  if (style.include_passages) {
    if (!std::filesystem::exists(cfg.paths.index))
      throw ConfigError(std::string(style.name()) + " formatting needs index '" + cfg.paths.index +
                        "' (build it with `index build`)");
    index = InvertedIndex::load(cfg.paths.index);
    retriever = top1_retriever(*index);
  }
  if (style.include_summary) {
    std::shared_ptr<SummarizerBackend> summarizer;
    for (Conversation& conv : conversations) {
      if (conv.summary) continue;
      if (!summarizer) {
        const BackendDescriptor* d = cfg.backend("summarizer");
        if (!d)
          throw ConfigError(std::string(style.name()) +
                            " formatting needs conversation summaries or a summarizer backend");
        summarizer = make_summarizer_backend(*d);
      }
      conv.summary = summarizer->summarize(render_transcript(conv.turns));
    }
  }

  std::vector<TrainingPair> pairs;
  for (const Conversation& conv : conversations) {
    std::vector<TrainingPair> p = extract_simulator_pairs(conv, style, retriever);
    pairs.insert(pairs.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
  }
  detail::ensure_parent_dir(cfg.paths.simulator_pairs);
  const std::size_t written = save_pairs(pairs, cfg.paths.simulator_pairs);
  manifest.counts["format_conversations"] = conversations.size();
  manifest.counts["simulator_pairs"] = written;
  manifest.artifacts[cfg.paths.simulator_pairs] = written;
}

inline void stage_simulate(const PipelineConfig& cfg, RunManifest& manifest) {
  std::vector<Trigger> triggers = load_triggers(cfg.paths.triggers);
  const RenderStyle style(cfg.style);

  if (style.include_summary) {
    // Summary-controlled runs seeded with conversations go through the
    // summarizer first; the summary becomes the trigger.
    std::shared_ptr<SummarizerBackend> summarizer;
    for (Trigger& trigger : triggers) {
      if (trigger.kind != TriggerKind::History) continue;
      if (!summarizer) {
        const BackendDescriptor* d = cfg.backend("summarizer");
        if (!d)
          throw ConfigError(std::string(style.name()) +
                            " simulation over conversation triggers needs a summarizer backend");
        summarizer = make_summarizer_backend(*d);
      }
      trigger = Trigger::from_summary(summarizer->summarize(render_transcript(trigger.history)));
    }
  } else {
    for (const Trigger& trigger : triggers)
      if (trigger.kind != TriggerKind::History)
        throw ConfigError(std::string(style.name()) + " simulation takes history triggers only");
  }

  InteractionConfig icfg;
  icfg.style = style;
  icfg.turn_budget = cfg.turn_budget;
  icfg.simulator = make_completion_backend(cfg.require_backend("simulator"));
  icfg.assistant = make_completion_backend(cfg.require_backend("assistant"));
  icfg.seed = cfg.seed;
  icfg.completion = cfg.completion;
  icfg.run_label = cfg.run_label;
  std::optional<InvertedIndex> index;
  if (style.include_passages) {
    if (!std::filesystem::exists(cfg.paths.index))
      throw ConfigError(std::string(style.name()) + " simulation needs index '" + cfg.paths.index +
                        "' (build it with `index build`)");
    index = InvertedIndex::load(cfg.paths.index);
    icfg.retriever = top1_retriever(*index);
  }

  AuditLog audit;
  const BatchOutcome outcome = run_batch(triggers, icfg, cfg.concurrency, &audit);
  detail::ensure_parent_dir(cfg.paths.simulated);
  const std::size_t written = save_conversations(outcome.conversations, cfg.paths.simulated);
  detail::ensure_parent_dir(cfg.paths.audit);
  const std::size_t events = audit.write_jsonl(cfg.paths.audit);
  for (const auto& [key, value] : outcome.manifest.counts) manifest.counts[key] = value;
  manifest.artifacts[cfg.paths.simulated] = written;
  manifest.artifacts[cfg.paths.audit] = events;
}

inline void stage_export(const PipelineConfig& cfg, RunManifest& manifest) {
  const std::vector<Conversation> conversations = load_conversations(cfg.paths.simulated);
  std::vector<TrainingPair> pairs;
  std::size_t exported_conversations = 0;
  for (const Conversation& conv : conversations) {
    if (conv.failure && !cfg.export_include_failed) continue;
    ++exported_conversations;
    std::vector<TrainingPair> p = extract_assistant_pairs(conv);
    pairs.insert(pairs.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
  }
  detail::ensure_parent_dir(cfg.paths.assistant_pairs);
  const std::size_t written = save_pairs(pairs, cfg.paths.assistant_pairs);
  manifest.counts["export_conversations"] = exported_conversations;
  manifest.counts["assistant_pairs"] = written;
  manifest.artifacts[cfg.paths.assistant_pairs] = written;
}

inline void stage_metrics(const PipelineConfig& cfg, RunManifest& manifest) {
  std::vector<std::pair<std::string, std::vector<Conversation>>> groups;
  if (cfg.group_by == "file") {
    for (const std::string& path : cfg.metrics_inputs) {
      std::vector<Conversation> conversations = load_conversations(path);
      std::erase_if(conversations, [](const Conversation& c) { return c.failure.has_value(); });
      groups.emplace_back(std::filesystem::path(path).stem().string(), std::move(conversations));
    }
  } else {
    std::map<std::string, std::vector<Conversation>> by_label;
    for (const std::string& path : cfg.metrics_inputs)
      for (Conversation& conv : load_conversations(path)) {
        if (conv.failure) continue;
        std::string label = conv.simulator.value_or("ungrouped");
        by_label[std::move(label)].push_back(std::move(conv));
      }
    for (auto& [label, conversations] : by_label) groups.emplace_back(label, std::move(conversations));
  }
  const DiversityReport report = diversity_report(groups, cfg.metrics, cfg.metric_scope);
  detail::ensure_parent_dir(cfg.paths.metrics_csv);
  write_diversity_csv(report, cfg.paths.metrics_csv);
  const std::string json_path = detail::sibling_json_path(cfg.paths.metrics_csv);
  std::ofstream js(json_path, std::ios::binary | std::ios::trunc);
  if (!js) throw IoError("cannot open '" + json_path + "' for writing");
  js << diversity_report_json(report).dump(2) << '\n';
  manifest.counts["metric_groups"] = report.rows.size();
  manifest.artifacts[cfg.paths.metrics_csv] = report.rows.size();
}

inline void stage_evaluate(const PipelineConfig& cfg, RunManifest& manifest) {
  const std::vector<Conversation> left = load_conversations(cfg.paths.eval_left);
  const std::vector<Conversation> right = load_conversations(cfg.paths.eval_right);
  if (left.size() != right.size())
    throw ConfigError("evaluate: left and right files differ in length");

  EvalOptions options;
  options.both_orders = cfg.eval.both_orders;
  options.epsilon = cfg.eval.epsilon;
  options.rubric = cfg.eval.rubric;
  options.left_model = cfg.eval.left_model;
  options.right_model = cfg.eval.right_model;
  options.retry_unparseable = cfg.eval.retry_unparseable;
  options.concurrency = cfg.concurrency;

  std::filesystem::create_directories(cfg.paths.eval_dir);
  std::vector<TallyRow> rows;
  for (const std::string& mode : cfg.eval.modes) {
    EvalRun run;
    if (mode == "judge") {
      std::vector<std::pair<Conversation, Conversation>> pairs;
      pairs.reserve(left.size());
      for (std::size_t i = 0; i < left.size(); ++i) pairs.emplace_back(left[i], right[i]);
      auto judge = make_judge_backend(cfg.require_backend("judge"));
      run = judge_eval(pairs, *judge, options);
    } else if (mode == "score") {
      const std::vector<ResponsePair> items = response_pairs_from_conversations(left, right);
      auto reward = make_reward_backend(cfg.require_backend("reward"));
      run = reward_eval(items, *reward, options);
    } else {
      const std::vector<ResponsePair> items = response_pairs_from_conversations(left, right);
      auto preference = make_preference_backend(cfg.require_backend("preference"));
      run = preference_eval(items, *preference, options);
    }
    const std::string records_path = cfg.paths.eval_dir + "/" + mode + "_records.jsonl";
    const std::size_t written = save_eval_records(run.records, records_path);
    manifest.counts[mode + "_records"] = written;
    manifest.counts[mode + "_failures"] = run.failures;
    manifest.artifacts[records_path] = written;
    for (TallyRow row : tally_rows(run, options.left_model, options.right_model)) {
      row.comparison = mode + ": " + row.comparison;
      rows.push_back(std::move(row));
    }
  }
  const std::string csv = cfg.paths.eval_dir + "/report.csv";
  const std::string json = cfg.paths.eval_dir + "/report.json";
  write_eval_report(rows, csv, json);
  manifest.artifacts[csv] = rows.size();
}

// ---------------------------------------------------------------------------

namespace detail {

inline void preflight(const PipelineConfig& cfg, const std::set<Stage>& stages) {
  namespace fs = std::filesystem;
  const RenderStyle style(cfg.style);
  auto available = [&](const std::string& path, Stage producer) {
    return (stages.contains(producer) || fs::exists(path));
  };
  auto require_file = [](const std::string& path, const char* what) {
    if (path.empty()) throw ConfigError(std::string(what) + " path is not configured");
    if (!fs::exists(path)) throw ConfigError(std::string(what) + " '" + path + "' does not exist");
  };
  for (const Stage stage : stages) {
    switch (stage) {
      case Stage::Index:
        require_file(cfg.paths.passages, "passages file");
        break;
      case Stage::Format:
        require_file(cfg.paths.conversations, "conversation corpus");
        if (style.include_passages && !available(cfg.paths.index, Stage::Index))
          throw ConfigError(std::string(style.name()) + " formatting needs index '" +
                            cfg.paths.index + "' (build it with the index stage)");
        break;
      case Stage::Simulate:
        require_file(cfg.paths.triggers, "trigger file");
        if (style.include_passages && !available(cfg.paths.index, Stage::Index))
          throw ConfigError(std::string(style.name()) + " simulation needs index '" +
                            cfg.paths.index + "' (build it with the index stage)");
        cfg.require_backend("simulator");
        cfg.require_backend("assistant");
        break;
      case Stage::Export:
        if (!available(cfg.paths.simulated, Stage::Simulate))
          throw ConfigError("export input '" + cfg.paths.simulated + "' does not exist");
        break;
      case Stage::Metrics:
        for (const std::string& input : cfg.metrics_inputs)
          if (!(input == cfg.paths.simulated && stages.contains(Stage::Simulate)) &&
              !fs::exists(input))
            throw ConfigError("metrics input '" + input + "' does not exist");
        break;
      case Stage::Evaluate:
        for (const std::string& mode : cfg.eval.modes)
          cfg.require_backend(mode == "judge" ? "judge" : mode == "score" ? "reward" : "preference");
        for (const std::string* path : {&cfg.paths.eval_left, &cfg.paths.eval_right})
          if (!(*path == cfg.paths.simulated && stages.contains(Stage::Simulate)) &&
              !fs::exists(*path))
            throw ConfigError("evaluate input '" + *path + "' does not exist");
        break;
    }
  }
}

}  // namespace detail

// Runs the requested stages in canonical order. All inputs are checked before
// any stage does work; a fatal stage error is recorded in the manifest before
// it propagates.
inline RunManifest run_pipeline(const PipelineConfig& cfg, const std::set<Stage>& stages) {
  if (stages.empty()) throw ConfigError("run_pipeline: no stages requested");
  detail::preflight(cfg, stages);
  std::filesystem::create_directories(cfg.out_dir);

  RunManifest manifest;
  manifest.seed = cfg.seed;
  manifest.config = cfg.snapshot;
  manifest.training_epochs = cfg.training_epochs;
  manifest.training_learning_rate = cfg.training_learning_rate;
  for (const auto& [role, descriptor] : cfg.backends) manifest.backends[role] = descriptor.endpoint;

  for (const Stage stage : kStageOrder) {
    if (!stages.contains(stage)) continue;
    try {
      switch (stage) {
        case Stage::Index: stage_index(cfg, manifest); break;
        case Stage::Format: stage_format(cfg, manifest); break;
        case Stage::Simulate: stage_simulate(cfg, manifest); break;
        case Stage::Export: stage_export(cfg, manifest); break;
        case Stage::Metrics: stage_metrics(cfg, manifest); break;
        case Stage::Evaluate: stage_evaluate(cfg, manifest); break;
      }
    } catch (...) {
      manifest.failed_stage = to_string(stage);
      detail::ensure_parent_dir(cfg.paths.manifest);
      save_manifest(manifest, cfg.paths.manifest);
      throw;
    }
    manifest.completed_stages.push_back(to_string(stage));
  }
  detail::ensure_parent_dir(cfg.paths.manifest);
  save_manifest(manifest, cfg.paths.manifest);
  return manifest;
}

}  // namespace kaucus
