#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kaucus/core.hpp"
#include "kaucus/errors.hpp"

namespace kaucus {

// Style flags are fully determined by the style: SCTRL* carry a summary
// block, *RAG carry passage blocks.
struct RenderStyle {
  SimStyle style;
  bool include_summary;
  bool include_passages;

  explicit RenderStyle(SimStyle s = SimStyle::S1)
      : style(s),
        include_summary(s == SimStyle::SCTRL || s == SimStyle::SCTRL_RAG),
        include_passages(s == SimStyle::SRAG || s == SimStyle::SCTRL_RAG) {}

  const char* name() const { return to_string(style); }
};

// Renders a conversation prefix into prompt text:
//
//   Summary: {summary}            (SCTRL*, before the first turn)
//
//   Passage: {passage text}       (*RAG, immediately before its Human turn)
//   Human: {utterance}
//
//   Assistant: {utterance}
//
//   Human:                        (bare cue line for the next speaker)
//
// Blocks are separated by blank lines. `cue_passage` attaches a retrieved
// passage to the trailing cue itself — the prefix of the human turn about to
// be generated and the tail of the rendered input at the same time.
inline std::string render_context(std::span<const Turn> prefix, const RenderStyle& style,
                                  const std::optional<std::string>& summary, Speaker next_cue,
                                  const std::optional<Passage>& cue_passage = std::nullopt) {
  if (style.include_summary && !summary)
    throw FormatError(FormatError::Kind::MissingSummary,
                      std::string(style.name()) + " rendering requires a summary");
  if (!style.include_summary && summary)
    throw FormatError(FormatError::Kind::UnexpectedSummary,
                      std::string(style.name()) + " rendering does not take a summary");
  if (cue_passage && (!style.include_passages || next_cue != Speaker::Human))
    throw FormatError(FormatError::Kind::PassageOnNonHuman,
                      "a cue passage is only legal before a Human cue in a *RAG style");
  validate_turns(prefix, {}, /*check_knowledge=*/false);
  for (std::size_t i = 0; i < prefix.size(); ++i)
    if (prefix[i].knowledge && prefix[i].speaker != Speaker::Human)
      throw FormatError(FormatError::Kind::PassageOnNonHuman,
                        "turn " + std::to_string(i) + " attaches a passage to an assistant turn");
  if (!prefix.empty() && prefix.back().speaker == next_cue)
    throw ValidationError(ValidationError::Kind::AlternationViolation, {}, -1,
                          "cue speaker repeats the final prefix speaker");

  std::string out;
  auto block = [&out](const std::string& b) {
    if (!out.empty()) out += "\n\n";
    out += b;
  };
  if (style.include_summary) block("Summary: " + *summary);
  for (const Turn& turn : prefix) {
    std::string b;
    if (style.include_passages && turn.knowledge)
      b = "Passage: " + turn.knowledge->text + "\n";
    b += role_cue(turn.speaker);
    b += ": ";
    b += turn.text;
    block(b);
  }
  std::string cue;
  if (cue_passage) cue = "Passage: " + cue_passage->text + "\n";
  cue += role_cue(next_cue);
  cue += ":";
  block(cue);
  return out;
}

// Dialogue-only rendering (no cue, no knowledge, no summary); used for judge
// prompts and summarizer input.
inline std::string render_transcript(std::span<const Turn> turns) {
  std::string out;
  for (const Turn& turn : turns) {
    if (!out.empty()) out += "\n\n";
    out += role_cue(turn.speaker);
    out += ": ";
    out += turn.text;
  }
  return out;
}

// One (context, human-response) pair per Human turn. For *RAG styles every
// Human turn is annotated with the top passage retrieved with that utterance
// as the query; the target turn's passage lands directly before the trailing
// "Human:" cue. SCTRL* contexts open with the conversation summary.
inline std::vector<TrainingPair> extract_simulator_pairs(const Conversation& conv,
                                                         const RenderStyle& style,
                                                         const Top1Retriever& retriever = {}) {
  validate_conversation(conv);
  if (style.include_passages && !retriever)
    throw FormatError(FormatError::Kind::MissingRetriever,
                      std::string(style.name()) + " extraction requires a retriever");
  if (!style.include_passages && retriever)
    throw FormatError(FormatError::Kind::UnexpectedRetriever,
                      std::string(style.name()) + " extraction does not take a retriever");
  if (style.include_summary && !conv.summary)
    throw FormatError(FormatError::Kind::MissingSummary,
                      "conversation '" + conv.id + "' has no summary for " + style.name());
  const std::optional<std::string> summary =
      style.include_summary ? conv.summary : std::nullopt;

  std::vector<Turn> turns(conv.turns.begin(), conv.turns.end());
  if (style.include_passages) {
    for (std::size_t i = 0; i < turns.size(); ++i) {
      if (turns[i].speaker != Speaker::Human) continue;
      try {
        turns[i].knowledge = retriever(turns[i].text);
      } catch (const std::exception& e) {
        throw RetrievalError(RetrievalError::Kind::QueryFailed,
                             "retrieval failed at turn " + std::to_string(i) + " of '" + conv.id +
                                 "': " + e.what());
      }
    }
  }

  std::vector<TrainingPair> pairs;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (turns[i].speaker != Speaker::Human) continue;
    const std::span<const Turn> prefix(turns.data(), i);
    pairs.push_back({render_context(prefix, style, summary, Speaker::Human, turns[i].knowledge),
                     turns[i].text, pair_style_of(style.style), conv.id, static_cast<int>(i)});
  }
  return pairs;
}

// One (context, assistant-response) pair per Assistant turn. Contexts carry
// the dialogue only: no passage or summary blocks, whatever the source
// conversation was conditioned on.
inline std::vector<TrainingPair> extract_assistant_pairs(const Conversation& conv) {
  validate_conversation(conv);
  const RenderStyle plain(SimStyle::S1);
  std::vector<TrainingPair> pairs;
  for (std::size_t i = 0; i < conv.turns.size(); ++i) {
    if (conv.turns[i].speaker != Speaker::Assistant) continue;
    const std::span<const Turn> prefix(conv.turns.data(), i);
    pairs.push_back({render_context(prefix, plain, std::nullopt, Speaker::Assistant),
                     conv.turns[i].text, PairStyle::Assistant, conv.id, static_cast<int>(i)});
  }
  return pairs;
}

}  // namespace kaucus
