#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kaucus/core.hpp"
#include "kaucus/errors.hpp"

namespace kaucus {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// JSON mappings. One record per line on disk; object keys come out sorted,
// which keeps artifacts byte-stable across runs.

inline Json to_json(const Turn& turn) {
  Json j{{"speaker", to_string(turn.speaker)},
         {"text", turn.text},
         {"provenance", to_string(turn.provenance)}};
  if (turn.knowledge) {
    j["doc_id"] = turn.knowledge->doc_id;
    j["knowledge_text"] = turn.knowledge->text;
  }
  return j;
}

inline Json to_json(const Trigger& trigger) {
  Json j{{"kind", to_string(trigger.kind)}};
  if (trigger.kind == TriggerKind::History) {
    Json turns = Json::array();
    for (const Turn& t : trigger.history) turns.push_back(to_json(t));
    j["history"] = std::move(turns);
  } else {
    j["text"] = trigger.text;
  }
  return j;
}

inline Json to_json(const Conversation& conv) {
  Json turns = Json::array();
  for (const Turn& t : conv.turns) turns.push_back(to_json(t));
  Json j{{"id", conv.id}, {"turns", std::move(turns)}};
  if (conv.summary) j["summary"] = *conv.summary;
  if (conv.trigger) j["trigger"] = to_json(*conv.trigger);
  if (conv.simulator) j["simulator"] = *conv.simulator;
  if (conv.failure) j["failure"] = *conv.failure;
  return j;
}

inline Json to_json(const Passage& p) { return Json{{"doc_id", p.doc_id}, {"text", p.text}}; }

inline Json to_json(const TrainingPair& p) {
  return Json{{"context", p.context},
              {"target", p.target},
              {"style", to_string(p.style)},
              {"source_conversation", p.source_conversation},
              {"turn_index", p.turn_index}};
}

namespace detail {

inline const Json& require_field(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(std::string("missing field '") + key + "'");
  return *it;
}

inline Speaker speaker_from_json(const Json& j) {
  const std::string s = j.get<std::string>();
  if (s == "human") return Speaker::Human;
  if (s == "assistant") return Speaker::Assistant;
  throw Error("unknown speaker '" + s + "'");
}

inline Provenance provenance_from_json(const Json& j) {
  const std::string s = j.get<std::string>();
  if (s == "corpus") return Provenance::Corpus;
  if (s == "simulator") return Provenance::SimulatorGenerated;
  if (s == "assistant") return Provenance::AssistantGenerated;
  throw Error("unknown provenance '" + s + "'");
}

}  // namespace detail

inline Turn turn_from_json(const Json& j) {
  Turn turn;
  turn.speaker = detail::speaker_from_json(detail::require_field(j, "speaker"));
  // Utterances are trimmed at ingestion; interior whitespace stays verbatim.
  turn.text = trim_copy(detail::require_field(j, "text").get<std::string>());
  if (auto it = j.find("provenance"); it != j.end()) turn.provenance = detail::provenance_from_json(*it);
  if (auto it = j.find("doc_id"); it != j.end()) {
    Passage p;
    p.doc_id = it->get<std::string>();
    if (auto kt = j.find("knowledge_text"); kt != j.end()) p.text = kt->get<std::string>();
    turn.knowledge = std::move(p);
  }
  return turn;
}

inline Trigger trigger_from_json(const Json& j) {
  const std::string kind = detail::require_field(j, "kind").get<std::string>();
  Trigger trigger;
  if (kind == "history") {
    std::vector<Turn> turns;
    for (const Json& t : detail::require_field(j, "history")) turns.push_back(turn_from_json(t));
    trigger = Trigger::from_history(std::move(turns));
  } else if (kind == "summary") {
    trigger = Trigger::from_summary(trim_copy(detail::require_field(j, "text").get<std::string>()));
  } else if (kind == "implicit_passage") {
    trigger = Trigger::from_implicit_passage(trim_copy(detail::require_field(j, "text").get<std::string>()));
  } else {
    throw Error("unknown trigger kind '" + kind + "'");
  }
  return trigger;
}

inline Conversation conversation_from_json(const Json& j) {
  Conversation conv;
  conv.id = detail::require_field(j, "id").get<std::string>();
  for (const Json& t : detail::require_field(j, "turns")) conv.turns.push_back(turn_from_json(t));
  if (auto it = j.find("summary"); it != j.end()) conv.summary = it->get<std::string>();
  if (auto it = j.find("trigger"); it != j.end()) conv.trigger = trigger_from_json(*it);
  if (auto it = j.find("simulator"); it != j.end()) conv.simulator = it->get<std::string>();
  if (auto it = j.find("failure"); it != j.end()) conv.failure = it->get<std::string>();
  return conv;
}

inline Passage passage_from_json(const Json& j) {
  Passage p;
  p.doc_id = detail::require_field(j, "doc_id").get<std::string>();
  p.text = detail::require_field(j, "text").get<std::string>();
  if (p.text.empty()) throw Error("passage '" + p.doc_id + "' has empty text");
  return p;
}

inline TrainingPair pair_from_json(const Json& j) {
  TrainingPair p;
  p.context = detail::require_field(j, "context").get<std::string>();
  p.target = detail::require_field(j, "target").get<std::string>();
  const std::string style = detail::require_field(j, "style").get<std::string>();
  auto parsed = parse_pair_style(style);
  if (!parsed) throw Error("unknown pair style '" + style + "'");
  p.style = *parsed;
  p.source_conversation = detail::require_field(j, "source_conversation").get<std::string>();
  p.turn_index = detail::require_field(j, "turn_index").get<int>();
  if (p.target.empty()) throw Error("training pair has empty target");
  if (p.turn_index < 0) throw Error("training pair has negative turn_index");
  // the context must end with the role cue of the target's speaker
  const char* cue = p.style == PairStyle::Assistant ? "Assistant:" : "Human:";
  if (!p.context.ends_with(cue))
    throw Error(std::string("pair context does not end with the '") + cue + "' cue");
  return p;
}

// ---------------------------------------------------------------------------
// JSONL files.

namespace detail {

template <class Fn>
void for_each_jsonl(const std::string& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw ParseError(line_number,
                       path + ":" + std::to_string(line_number) + ": " + e.what());
    }
    try {
      fn(line_number, j);
    } catch (const ValidationError&) {
      throw;  // already carries the conversation id
    } catch (const Error& e) {
      throw ParseError(line_number, path + ":" + std::to_string(line_number) + ": " + e.what());
    }
  }
}

template <class T, class ToJson>
std::size_t save_jsonl(std::span<const T> items, const std::string& path, ToJson&& to) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (const T& item : items) out << to(item).dump() << '\n';
  out.flush();
  if (!out) throw IoError("write failed for '" + path + "'");
  return items.size();
}

}  // namespace detail

// Every loaded conversation is validated; order is preserved.
inline std::vector<Conversation> load_conversations(const std::string& path) {
  std::vector<Conversation> out;
  detail::for_each_jsonl(path, [&](std::size_t, const Json& j) {
    Conversation conv = conversation_from_json(j);
    validate_conversation(conv);
    out.push_back(std::move(conv));
  });
  return out;
}

inline std::size_t save_conversations(std::span<const Conversation> conversations,
                                      const std::string& path) {
  for (const Conversation& c : conversations) validate_conversation(c);
  return detail::save_jsonl(conversations, path, [](const Conversation& c) { return to_json(c); });
}

inline std::vector<Passage> load_passages(const std::string& path) {
  std::vector<Passage> out;
  detail::for_each_jsonl(path, [&](std::size_t, const Json& j) { out.push_back(passage_from_json(j)); });
  return out;
}

inline std::size_t save_passages(std::span<const Passage> passages, const std::string& path) {
  return detail::save_jsonl(passages, path, [](const Passage& p) { return to_json(p); });
}

inline std::vector<TrainingPair> load_pairs(const std::string& path) {
  std::vector<TrainingPair> out;
  detail::for_each_jsonl(path, [&](std::size_t, const Json& j) { out.push_back(pair_from_json(j)); });
  return out;
}

inline std::size_t save_pairs(std::span<const TrainingPair> pairs, const std::string& path) {
  return detail::save_jsonl(pairs, path, [](const TrainingPair& p) { return to_json(p); });
}

// Triggers accept several record shapes: an explicit trigger record (has
// "kind"), a conversation record (becomes a History trigger), a passage
// record (becomes an ImplicitPassage trigger), or a bare {"text": ...}
// (becomes a Summary trigger).
inline Trigger trigger_from_any_json(const Json& j) {
  if (j.contains("kind")) return trigger_from_json(j);
  if (j.contains("turns")) {
    Conversation conv = conversation_from_json(j);
    validate_conversation(conv);
    return Trigger::from_history(std::move(conv.turns));
  }
  if (j.contains("doc_id") && j.contains("text"))
    return Trigger::from_implicit_passage(trim_copy(j.at("text").get<std::string>()));
  if (j.contains("text")) return Trigger::from_summary(trim_copy(j.at("text").get<std::string>()));
  throw Error("record is not a trigger, conversation, or passage");
}

inline std::vector<Trigger> load_triggers(const std::string& path) {
  std::vector<Trigger> out;
  detail::for_each_jsonl(path, [&](std::size_t, const Json& j) {
    Trigger t = trigger_from_any_json(j);
    validate_trigger(t);
    out.push_back(std::move(t));
  });
  return out;
}

inline std::size_t save_triggers(std::span<const Trigger> triggers, const std::string& path) {
  return detail::save_jsonl(triggers, path, [](const Trigger& t) { return to_json(t); });
}

// ---------------------------------------------------------------------------
// Run manifest: config snapshot, seed, backend endpoints, artifact counts,
// and the externally-run fine-tuning hyperparameters kept for traceability.

struct RunManifest {
  std::uint64_t seed = 0;
  Json config = Json::object();
  std::map<std::string, std::string> backends;         // role -> endpoint
  std::map<std::string, std::uint64_t> counts;         // named counters
  std::map<std::string, std::uint64_t> artifacts;      // path -> record count
  std::vector<std::string> completed_stages;
  std::optional<std::string> failed_stage;
  int training_epochs = 10;
  double training_learning_rate = 1e-6;
};

inline Json to_json(const RunManifest& m) {
  Json j{{"seed", m.seed},
         {"config", m.config},
         {"backends", m.backends},
         {"counts", m.counts},
         {"artifacts", m.artifacts},
         {"completed_stages", m.completed_stages},
         {"training", Json{{"epochs", m.training_epochs}, {"learning_rate", m.training_learning_rate}}}};
  if (m.failed_stage) j["failed_stage"] = *m.failed_stage;
  return j;
}

inline RunManifest manifest_from_json(const Json& j) {
  RunManifest m;
  m.seed = j.value("seed", std::uint64_t{0});
  m.config = j.value("config", Json::object());
  if (auto it = j.find("backends"); it != j.end())
    m.backends = it->get<std::map<std::string, std::string>>();
  if (auto it = j.find("counts"); it != j.end())
    m.counts = it->get<std::map<std::string, std::uint64_t>>();
  if (auto it = j.find("artifacts"); it != j.end())
    m.artifacts = it->get<std::map<std::string, std::uint64_t>>();
  if (auto it = j.find("completed_stages"); it != j.end())
    m.completed_stages = it->get<std::vector<std::string>>();
  if (auto it = j.find("failed_stage"); it != j.end()) m.failed_stage = it->get<std::string>();
  if (auto it = j.find("training"); it != j.end()) {
    m.training_epochs = it->value("epochs", 10);
    m.training_learning_rate = it->value("learning_rate", 1e-6);
  }
  return m;
}

inline void save_manifest(const RunManifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << to_json(m).dump(2) << '\n';
  out.flush();
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline RunManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw ParseError(0, path + ": " + e.what());
  }
  return manifest_from_json(j);
}

}  // namespace kaucus
