#pragma once

#include <cctype>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kaucus/errors.hpp"

namespace kaucus {

enum class Speaker { Human, Assistant };
enum class Provenance { Corpus, SimulatorGenerated, AssistantGenerated };
enum class TriggerKind { History, Summary, ImplicitPassage };

// Simulator training/rendering styles.
enum class SimStyle { S1, SRAG, SCTRL, SCTRL_RAG };

// Training-pair styles: the four simulator styles plus assistant-side pairs.
enum class PairStyle { S1, SRAG, SCTRL, SCTRL_RAG, Assistant };

inline const char* to_string(Speaker s) {
  return s == Speaker::Human ? "human" : "assistant";
}

// Prompt-facing role tags.
inline const char* role_cue(Speaker s) {
  return s == Speaker::Human ? "Human" : "Assistant";
}

inline Speaker opposite(Speaker s) {
  return s == Speaker::Human ? Speaker::Assistant : Speaker::Human;
}

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::Corpus: return "corpus";
    case Provenance::SimulatorGenerated: return "simulator";
    case Provenance::AssistantGenerated: return "assistant";
  }
  return "corpus";
}

inline const char* to_string(TriggerKind k) {
  switch (k) {
    case TriggerKind::History: return "history";
    case TriggerKind::Summary: return "summary";
    case TriggerKind::ImplicitPassage: return "implicit_passage";
  }
  return "history";
}

inline const char* to_string(SimStyle s) {
  switch (s) {
    case SimStyle::S1: return "S1";
    case SimStyle::SRAG: return "SRAG";
    case SimStyle::SCTRL: return "SCTRL";
    case SimStyle::SCTRL_RAG: return "SCTRL-RAG";
  }
  return "S1";
}

inline const char* to_string(PairStyle s) {
  switch (s) {
    case PairStyle::S1: return "S1";
    case PairStyle::SRAG: return "SRAG";
    case PairStyle::SCTRL: return "SCTRL";
    case PairStyle::SCTRL_RAG: return "SCTRL-RAG";
    case PairStyle::Assistant: return "Assistant";
  }
  return "S1";
}

inline PairStyle pair_style_of(SimStyle s) {
  switch (s) {
    case SimStyle::S1: return PairStyle::S1;
    case SimStyle::SRAG: return PairStyle::SRAG;
    case SimStyle::SCTRL: return PairStyle::SCTRL;
    case SimStyle::SCTRL_RAG: return PairStyle::SCTRL_RAG;
  }
  return PairStyle::S1;
}

inline std::optional<SimStyle> parse_sim_style(std::string_view name) {
  if (name == "S1" || name == "s1") return SimStyle::S1;
  if (name == "SRAG" || name == "srag") return SimStyle::SRAG;
  if (name == "SCTRL" || name == "sctrl") return SimStyle::SCTRL;
  if (name == "SCTRL-RAG" || name == "SCTRL_RAG" || name == "sctrl-rag" || name == "sctrl_rag")
    return SimStyle::SCTRL_RAG;
  return std::nullopt;
}

inline std::optional<PairStyle> parse_pair_style(std::string_view name) {
  if (name == "Assistant" || name == "assistant") return PairStyle::Assistant;
  if (auto s = parse_sim_style(name)) return pair_style_of(*s);
  return std::nullopt;
}

// Leading/trailing ASCII whitespace only; interior text (including any
// non-ASCII bytes) is preserved verbatim.
inline std::string trim_copy(std::string_view s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return std::string(s.substr(begin, end - begin));
}

struct Passage {
  std::string doc_id;
  std::string text;

  bool operator==(const Passage&) const = default;
};

struct Turn {
  Speaker speaker = Speaker::Human;
  std::string text;
  Provenance provenance = Provenance::Corpus;
  std::optional<Passage> knowledge;  // legal on Human turns only

  bool operator==(const Turn&) const = default;
};

struct Trigger {
  TriggerKind kind = TriggerKind::History;
  std::vector<Turn> history;  // History triggers only
  std::string text;           // Summary / ImplicitPassage triggers only

  static Trigger from_history(std::vector<Turn> turns) {
    Trigger t;
    t.kind = TriggerKind::History;
    t.history = std::move(turns);
    return t;
  }
  static Trigger from_summary(std::string text) {
    Trigger t;
    t.kind = TriggerKind::Summary;
    t.text = std::move(text);
    return t;
  }
  static Trigger from_implicit_passage(std::string text) {
    Trigger t;
    t.kind = TriggerKind::ImplicitPassage;
    t.text = std::move(text);
    return t;
  }

  bool operator==(const Trigger&) const = default;
};

struct Conversation {
  std::string id;
  std::vector<Turn> turns;
  std::optional<Trigger> trigger;
  std::optional<std::string> summary;
  std::optional<std::string> simulator;  // batch label, used for report grouping
  std::optional<std::string> failure;    // set when an interaction aborted mid-run

  bool operator==(const Conversation&) const = default;
};

struct TrainingPair {
  std::string context;
  std::string target;
  PairStyle style = PairStyle::S1;
  std::string source_conversation;
  int turn_index = 0;

  bool operator==(const TrainingPair&) const = default;
};

// Hands back the top passage for a query, or nothing when the collection has
// no overlapping document.
using Top1Retriever = std::function<std::optional<Passage>(const std::string& query)>;

namespace detail {

[[noreturn]] inline void fail_validation(ValidationError::Kind kind, const std::string& id,
                                         std::ptrdiff_t turn, const std::string& msg) {
  std::string what = msg;
  if (!id.empty()) what += " (conversation '" + id + "')";
  throw ValidationError(kind, id, turn, what);
}

}  // namespace detail

// Turn-sequence invariants shared by conversations and rendered prefixes:
// non-empty utterances, strict speaker alternation, Human first, and
// provenance consistent with the speaker. Knowledge placement is checked
// unless the caller owns that rule itself.
inline void validate_turns(std::span<const Turn> turns, const std::string& conversation_id = {},
                           bool check_knowledge = true) {
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const Turn& turn = turns[i];
    if (trim_copy(turn.text).empty())
      detail::fail_validation(ValidationError::Kind::EmptyTurn, conversation_id,
                              static_cast<std::ptrdiff_t>(i),
                              "turn " + std::to_string(i) + " is empty after trimming");
    if (i == 0 && turn.speaker != Speaker::Human)
      detail::fail_validation(ValidationError::Kind::FirstSpeakerViolation, conversation_id, 0,
                              "first turn must be spoken by the human");
    if (i > 0 && turn.speaker == turns[i - 1].speaker)
      detail::fail_validation(ValidationError::Kind::AlternationViolation, conversation_id,
                              static_cast<std::ptrdiff_t>(i),
                              "turns " + std::to_string(i - 1) + " and " + std::to_string(i) +
                                  " share speaker " + to_string(turn.speaker));
    if (check_knowledge && turn.knowledge && turn.speaker != Speaker::Human)
      detail::fail_validation(ValidationError::Kind::KnowledgeOnAssistantTurn, conversation_id,
                              static_cast<std::ptrdiff_t>(i),
                              "turn " + std::to_string(i) + " attaches a passage to an assistant turn");
    if (turn.provenance == Provenance::SimulatorGenerated && turn.speaker != Speaker::Human)
      detail::fail_validation(ValidationError::Kind::ProvenanceMismatch, conversation_id,
                              static_cast<std::ptrdiff_t>(i),
                              "simulator-generated turn " + std::to_string(i) + " is not a human turn");
    if (turn.provenance == Provenance::AssistantGenerated && turn.speaker != Speaker::Assistant)
      detail::fail_validation(ValidationError::Kind::ProvenanceMismatch, conversation_id,
                              static_cast<std::ptrdiff_t>(i),
                              "assistant-generated turn " + std::to_string(i) + " is not an assistant turn");
  }
}

inline const Trigger& validate_trigger(const Trigger& trigger, const std::string& conversation_id = {}) {
  switch (trigger.kind) {
    case TriggerKind::History:
      if (!trigger.text.empty())
        detail::fail_validation(ValidationError::Kind::TriggerInvalid, conversation_id, -1,
                                "history trigger must not carry text");
      if (trigger.history.empty())
        detail::fail_validation(ValidationError::Kind::TriggerInvalid, conversation_id, -1,
                                "history trigger has no turns");
      validate_turns(trigger.history, conversation_id);
      break;
    case TriggerKind::Summary:
    case TriggerKind::ImplicitPassage:
      if (!trigger.history.empty())
        detail::fail_validation(ValidationError::Kind::TriggerInvalid, conversation_id, -1,
                                "text trigger must not carry history turns");
      if (trim_copy(trigger.text).empty())
        detail::fail_validation(ValidationError::Kind::TriggerInvalid, conversation_id, -1,
                                "text trigger is empty");
      break;
  }
  return trigger;
}

// Returns its argument iff every conversation invariant holds.
inline const Conversation& validate_conversation(const Conversation& conv) {
  if (conv.turns.empty())
    detail::fail_validation(ValidationError::Kind::EmptyConversation, conv.id, -1,
                            "conversation has no turns");
  validate_turns(conv.turns, conv.id);
  if (conv.trigger) validate_trigger(*conv.trigger, conv.id);
  return conv;
}

}  // namespace kaucus
