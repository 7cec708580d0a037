#pragma once

#include <cstdint>
#include <cstdio>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kaucus/backends.hpp"
#include "kaucus/core.hpp"
#include "kaucus/errors.hpp"
#include "kaucus/formatting.hpp"
#include "kaucus/jsonl.hpp"
#include "kaucus/parallel.hpp"

namespace kaucus {

// Degenerate (empty) generations are retried with a temperature bump before
// the conversation is abandoned.
inline constexpr int kEmptyGenerationRetries = 2;
inline constexpr double kEmptyRetryTemperatureBump = 0.2;

struct CompletionParams {
  int max_tokens = 256;
  double temperature = 0.7;
  std::vector<std::string> stop{"\nHuman:", "\nAssistant:"};
};

struct InteractionConfig {
  RenderStyle style{SimStyle::S1};
  int turn_budget = 5;  // new turns to generate
  std::shared_ptr<CompletionBackend> simulator;
  std::shared_ptr<CompletionBackend> assistant;
  Top1Retriever retriever;  // required for *RAG styles, forbidden otherwise
  std::uint64_t seed = 0;
  CompletionParams completion;
  std::string run_label;  // conversation id prefix and report group; defaults to the style name
};

inline void validate_interaction_config(const InteractionConfig& cfg) {
  if (cfg.turn_budget < 1) throw ConfigError("turn_budget must be >= 1");
  if (!cfg.simulator) throw ConfigError("no simulator backend configured");
  if (!cfg.assistant) throw ConfigError("no assistant backend configured");
  if (cfg.style.include_passages && !cfg.retriever)
    throw ConfigError(std::string(cfg.style.name()) + " interaction requires a retriever");
  if (!cfg.style.include_passages && cfg.retriever)
    throw ConfigError(std::string(cfg.style.name()) + " interaction does not take a retriever");
  if (cfg.completion.stop.empty()) throw ConfigError("completion stop list must not be empty");
}

// Retrieval query for the upcoming simulator turn: the most recent assistant
// response, falling back to the trigger text (or the last history turn) when
// no assistant has spoken yet.
inline std::string make_turn_query(const Conversation& state, const Trigger& trigger) {
  for (auto it = state.turns.rbegin(); it != state.turns.rend(); ++it)
    if (it->speaker == Speaker::Assistant) return it->text;
  if (trigger.kind == TriggerKind::History)
    return trigger.history.empty() ? std::string{} : trigger.history.back().text;
  return trigger.text;
}

// Aborted interaction; carries whatever transcript accumulated before the
// failure so batches can persist it with a failure marker.
class InteractionFailure : public Error {
 public:
  InteractionFailure(const std::string& what, Conversation partial)
      : Error(what), partial_(std::move(partial)) {}
  const Conversation& partial() const { return partial_; }

 private:
  Conversation partial_;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed ^ (0x9e3779b97f4a7c15ull * (salt + 1));
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::string generate_turn(CompletionBackend& backend, const std::string& prompt,
                                 const CompletionParams& params, std::uint64_t seed) {
  for (int attempt = 0; attempt <= kEmptyGenerationRetries; ++attempt) {
    CompletionRequest request{prompt, params.max_tokens,
                              params.temperature + kEmptyRetryTemperatureBump * attempt,
                              params.stop, mix_seed(seed, static_cast<std::uint64_t>(attempt))};
    const std::string text = trim_copy(backend.complete(request));
    if (!text.empty()) return text;
  }
  throw BackendError(BackendError::Kind::EmptyGeneration,
                     "empty generation after " + std::to_string(kEmptyGenerationRetries + 1) +
                         " attempts",
                     kEmptyGenerationRetries + 1);
}

}  // namespace detail

using AuditBuffer = std::vector<nlohmann::json>;

// Runs one simulator<->assistant interaction from a trigger. History triggers
// become the initial transcript; Summary/ImplicitPassage triggers occupy the
// summary slot and the simulator opens. Exactly turn_budget new turns are
// appended, strictly alternating. In *RAG styles every simulator turn is
// preceded by one retrieval whose query comes from make_turn_query and whose
// top passage is injected before the trailing "Human:" cue.
inline Conversation run_interaction(const Trigger& trigger, const InteractionConfig& cfg,
                                    AuditBuffer* audit = nullptr,
                                    const std::string& conversation_id = {}) {
  validate_interaction_config(cfg);
  validate_trigger(trigger);
  const bool history = trigger.kind == TriggerKind::History;
  if (history && cfg.style.include_summary)
    throw ConfigError(std::string(cfg.style.name()) +
                      " interactions start from summary or passage triggers, not history");
  if (!history && !cfg.style.include_summary)
    throw ConfigError(std::string(cfg.style.name()) + " interactions start from history triggers");

  Conversation conv;
  conv.id = conversation_id.empty() ? "interaction" : conversation_id;
  conv.trigger = trigger;
  conv.simulator = cfg.run_label.empty() ? cfg.style.name() : cfg.run_label;
  if (history) conv.turns = trigger.history;
  else conv.summary = trigger.text;

  auto emit = [audit](nlohmann::json event) {
    if (audit) audit->push_back(std::move(event));
  };

  Speaker next = history ? opposite(conv.turns.back().speaker) : Speaker::Human;
  for (int t = 0; t < cfg.turn_budget; ++t) {
    const std::uint64_t turn_seed = detail::mix_seed(cfg.seed, static_cast<std::uint64_t>(t));
    try {
      if (next == Speaker::Human) {
        std::optional<Passage> injected;
        if (cfg.style.include_passages) {
          const std::string query = make_turn_query(conv, trigger);
          try {
            injected = cfg.retriever(query);
          } catch (const std::exception& e) {
            throw RetrievalError(RetrievalError::Kind::QueryFailed,
                                 std::string("retrieval failed: ") + e.what());
          }
          emit({{"event", "retrieval"},
                {"conversation", conv.id},
                {"turn_index", conv.turns.size()},
                {"query", query},
                {"doc_id", injected ? nlohmann::json(injected->doc_id) : nlohmann::json()}});
        }
        const std::string prompt =
            render_context(conv.turns, cfg.style, conv.summary, Speaker::Human, injected);
        const std::string text =
            detail::generate_turn(*cfg.simulator, prompt, cfg.completion, turn_seed);
        emit({{"event", "completion"},
              {"role", "simulator"},
              {"conversation", conv.id},
              {"turn_index", conv.turns.size()},
              {"prompt", prompt},
              {"response", text}});
        conv.turns.push_back({Speaker::Human, text, Provenance::SimulatorGenerated, injected});
      } else {
        // The assistant sees the dialogue only — no summary or passage blocks.
        const std::string prompt =
            render_context(conv.turns, RenderStyle(SimStyle::S1), std::nullopt, Speaker::Assistant);
        const std::string text =
            detail::generate_turn(*cfg.assistant, prompt, cfg.completion, turn_seed);
        emit({{"event", "completion"},
              {"role", "assistant"},
              {"conversation", conv.id},
              {"turn_index", conv.turns.size()},
              {"prompt", prompt},
              {"response", text}});
        conv.turns.push_back({Speaker::Assistant, text, Provenance::AssistantGenerated, {}});
      }
    } catch (const Error& e) {
      conv.failure = e.what();
      throw InteractionFailure("conversation '" + conv.id + "' aborted at turn " +
                                   std::to_string(conv.turns.size()) + ": " + e.what(),
                               std::move(conv));
    }
    next = opposite(next);
  }
  validate_conversation(conv);
  return conv;
}

struct BatchOutcome {
  // Successes plus failed interactions that produced at least one turn (those
  // carry a failure marker); input order throughout.
  std::vector<Conversation> conversations;
  struct Failure {
    std::size_t trigger_index = 0;
    std::string error;
    bool partial_persisted = false;
  };
  std::vector<Failure> failures;
  RunManifest manifest;
};

// One interaction per trigger under bounded parallelism. Per-trigger failures
// are isolated; audit events are buffered per conversation and merged in
// trigger order, so fixed seeds plus deterministic backends reproduce
// byte-identical artifacts at any concurrency.
inline BatchOutcome run_batch(std::span<const Trigger> triggers, const InteractionConfig& cfg,
                              int concurrency = 1, AuditLog* audit = nullptr) {
  if (triggers.empty()) throw ConfigError("run_batch: no triggers");
  validate_interaction_config(cfg);
  const std::string label = cfg.run_label.empty() ? cfg.style.name() : cfg.run_label;

  struct Slot {
    std::optional<Conversation> conversation;
    std::optional<std::string> error;
    AuditBuffer audit;
  };
  std::vector<Slot> slots(triggers.size());

  parallel_for(triggers.size(), concurrency, [&](std::size_t i) {
    InteractionConfig local = cfg;
    local.seed = detail::mix_seed(cfg.seed, i);
    local.run_label = label;
    char id[64];
    std::snprintf(id, sizeof id, "%s-%06zu", label.c_str(), i);
    try {
      slots[i].conversation = run_interaction(triggers[i], local, &slots[i].audit, id);
    } catch (const InteractionFailure& e) {
      slots[i].error = e.what();
      if (!e.partial().turns.empty()) slots[i].conversation = e.partial();
    } catch (const std::exception& e) {
      slots[i].error = e.what();
    }
  });

  BatchOutcome outcome;
  outcome.manifest.seed = cfg.seed;
  outcome.manifest.config = {{"style", cfg.style.name()},
                             {"turn_budget", cfg.turn_budget},
                             {"run_label", label},
                             {"max_tokens", cfg.completion.max_tokens},
                             {"temperature", cfg.completion.temperature},
                             {"stop", cfg.completion.stop}};
  std::uint64_t generated_turns = 0;
  std::uint64_t retrieval_calls = 0;
  std::uint64_t succeeded = 0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    Slot& slot = slots[i];
    for (const nlohmann::json& event : slot.audit)
      if (event.value("event", "") == "retrieval") ++retrieval_calls;
    if (audit) audit->append_all(std::move(slot.audit));
    if (slot.error)
      outcome.failures.push_back({i, *slot.error, slot.conversation.has_value()});
    if (slot.conversation) {
      for (const Turn& turn : slot.conversation->turns)
        if (turn.provenance != Provenance::Corpus) ++generated_turns;
      if (!slot.error) ++succeeded;
      outcome.conversations.push_back(std::move(*slot.conversation));
    }
  }
  outcome.manifest.counts["triggers"] = triggers.size();
  outcome.manifest.counts["conversations"] = succeeded;
  outcome.manifest.counts["failures"] = outcome.failures.size();
  outcome.manifest.counts["generated_turns"] = generated_turns;
  outcome.manifest.counts["retrieval_calls"] = retrieval_calls;
  return outcome;
}

}  // namespace kaucus
