#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
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

enum class Outcome { Win, Loss, Tie };
enum class PresentationOrder { AsGiven, Reversed };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Win: return "win";
    case Outcome::Loss: return "loss";
    case Outcome::Tie: return "tie";
  }
  return "tie";
}

inline const char* to_string(PresentationOrder o) {
  return o == PresentationOrder::AsGiven ? "as_given" : "reversed";
}

// Win iff left > right beyond epsilon; judge scores compare exactly (eps 0),
// probabilities use a small band.
inline Outcome outcome_of(double score_left, double score_right, double epsilon = 0.0) {
  if (!std::isfinite(score_left) || !std::isfinite(score_right))
    throw EvalError(EvalError::Kind::PairMismatch, "outcome_of: non-finite score");
  if (std::abs(score_left - score_right) <= epsilon) return Outcome::Tie;
  return score_left > score_right ? Outcome::Win : Outcome::Loss;
}

// Outcomes are always from the left model's perspective, whatever the
// presentation order was.
struct EvalRecord {
  std::string pair_id;
  std::string left_model;
  std::string right_model;
  PresentationOrder order = PresentationOrder::AsGiven;
  std::optional<double> score_left;   // judge / reward
  std::optional<double> score_right;  // judge / reward
  std::optional<double> probability;  // preference: P(left is better)
  Outcome outcome = Outcome::Tie;
  std::string raw;
  bool flagged = false;
  std::optional<std::string> failure;  // transport/service failure; excluded from tallies
};

struct Tally {
  std::uint64_t wins = 0;
  std::uint64_t losses = 0;
  std::uint64_t ties = 0;

  void add(Outcome o) {
    if (o == Outcome::Win) ++wins;
    else if (o == Outcome::Loss) ++losses;
    else ++ties;
  }
  std::uint64_t total() const { return wins + losses + ties; }
  double win_rate() const {
    const std::uint64_t t = total();
    return t == 0 ? 0.0 : static_cast<double>(wins) / static_cast<double>(t);
  }
};

// Strict agreement across both presentation orders: a win (loss) only when
// the same model wins (loses) both ways; anything split is a tie.
inline Outcome debias_combine(const EvalRecord& a, const EvalRecord& b) {
  if (a.pair_id != b.pair_id || a.left_model != b.left_model || a.right_model != b.right_model)
    throw EvalError(EvalError::Kind::PairMismatch,
                    "debias_combine: records describe different pairs");
  if (a.order == b.order)
    throw EvalError(EvalError::Kind::PairMismatch,
                    "debias_combine: records share presentation order");
  if (a.outcome == b.outcome && a.outcome != Outcome::Tie) return a.outcome;
  return Outcome::Tie;
}

inline const char* kDefaultJudgeRubric =
    "You are shown two conversations between a human and an assistant, one after the other. "
    "Rate how helpful each assistant is on a scale from 1 to 10. "
    "Reply with exactly two numbers separated by a space: first the score of the first "
    "conversation, then the score of the second.";

struct EvalOptions {
  bool both_orders = false;
  double epsilon = 1e-6;          // tie band for probabilities
  bool retry_unparseable = false; // default policy records a flagged tie
  int unparseable_retries = 1;
  std::string rubric = kDefaultJudgeRubric;
  std::string left_model = "left";
  std::string right_model = "right";
  int concurrency = 1;
};

struct EvalRun {
  std::vector<EvalRecord> records;  // pair order, AsGiven before Reversed
  Tally as_given;
  Tally reversed;
  Tally debiased;  // populated when both orders ran
  std::uint64_t failures = 0;
};

namespace detail {

inline std::string eval_pair_id(std::size_t index, const std::string& left,
                                const std::string& right) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", index);
  std::string id = buf;
  if (!left.empty() || !right.empty()) id += ":" + left + "|" + right;
  return id;
}

template <class PerOrder>
EvalRun run_orders(std::size_t n, const EvalOptions& options, PerOrder&& per_order) {
  struct Slot {
    std::optional<EvalRecord> as_given;
    std::optional<EvalRecord> reversed;
  };
  std::vector<Slot> slots(n);
  // backend errors are already turned into failure records by per_order;
  // anything else must not escape a worker thread
  auto guarded = [&per_order](std::size_t i, PresentationOrder order) {
    try {
      return per_order(i, order);
    } catch (const std::exception& e) {
      EvalRecord rec;
      rec.order = order;
      rec.failure = e.what();
      rec.flagged = true;
      return rec;
    }
  };
  parallel_for(n, options.concurrency, [&](std::size_t i) {
    slots[i].as_given = guarded(i, PresentationOrder::AsGiven);
    if (options.both_orders) slots[i].reversed = guarded(i, PresentationOrder::Reversed);
  });
  EvalRun run;
  for (Slot& slot : slots) {
    const EvalRecord& given = *slot.as_given;
    if (given.failure) ++run.failures;
    else run.as_given.add(given.outcome);
    if (slot.reversed) {
      const EvalRecord& reversed = *slot.reversed;
      if (reversed.failure) ++run.failures;
      else run.reversed.add(reversed.outcome);
      if (!given.failure && !reversed.failure)
        run.debiased.add(debias_combine(given, reversed));
    }
    run.records.push_back(std::move(*slot.as_given));
    if (slot.reversed) run.records.push_back(std::move(*slot.reversed));
  }
  return run;
}

}  // namespace detail

// Pairwise judging over whole conversations: the judge sees both transcripts
// and returns a numeric score for each. Unparseable judgments become flagged
// ties under the default policy (or are retried when configured); transport
// failures are recorded and skipped.
inline EvalRun judge_eval(std::span<const std::pair<Conversation, Conversation>> pairs,
                          JudgeBackend& judge, const EvalOptions& options = {}) {
  if (pairs.empty()) throw ConfigError("judge_eval: no pairs");
  return detail::run_orders(pairs.size(), options, [&](std::size_t i, PresentationOrder order) {
    const auto& [left, right] = pairs[i];
    const std::string left_text = render_transcript(left.turns);
    const std::string right_text = render_transcript(right.turns);
    EvalRecord rec;
    rec.pair_id = detail::eval_pair_id(i, left.id, right.id);
    rec.left_model = options.left_model;
    rec.right_model = options.right_model;
    rec.order = order;
    const bool as_given = order == PresentationOrder::AsGiven;
    const std::string& first = as_given ? left_text : right_text;
    const std::string& second = as_given ? right_text : left_text;
    int attempts = options.retry_unparseable ? options.unparseable_retries + 1 : 1;
    try {
      for (;;) {
        --attempts;
        try {
          const JudgeResult result = judge.judge_pair(first, second, options.rubric);
          rec.score_left = as_given ? result.score_first : result.score_second;
          rec.score_right = as_given ? result.score_second : result.score_first;
          rec.raw = result.raw;
          rec.outcome = outcome_of(*rec.score_left, *rec.score_right);
          break;
        } catch (const UnparseableJudgmentError& e) {
          if (attempts > 0) continue;
          rec.raw = e.raw();
          rec.outcome = Outcome::Tie;
          rec.flagged = true;
          break;
        }
      }
    } catch (const BackendError& e) {
      rec.failure = e.what();
      rec.flagged = true;
    }
    return rec;
  });
}

struct ResponsePair {
  std::string context;
  std::string left_response;
  std::string right_response;
  std::string left_id;   // source conversation ids, for the pair id
  std::string right_id;
};

// Independent reward scoring of the two responses; no presentation order is
// involved, so both_orders is ignored.
inline EvalRun reward_eval(std::span<const ResponsePair> items, RewardBackend& scorer,
                           const EvalOptions& options = {}) {
  if (items.empty()) throw ConfigError("reward_eval: no items");
  EvalOptions single = options;
  single.both_orders = false;
  return detail::run_orders(items.size(), single, [&](std::size_t i, PresentationOrder) {
    const ResponsePair& item = items[i];
    EvalRecord rec;
    rec.pair_id = detail::eval_pair_id(i, item.left_id, item.right_id);
    rec.left_model = options.left_model;
    rec.right_model = options.right_model;
    try {
      rec.score_left = scorer.score_response(item.context, item.left_response);
      rec.score_right = scorer.score_response(item.context, item.right_response);
      rec.outcome = outcome_of(*rec.score_left, *rec.score_right, options.epsilon);
    } catch (const BackendError& e) {
      rec.failure = e.what();
      rec.flagged = true;
    }
    return rec;
  });
}

// Single-pass preference comparison; P(left better) is folded back to the
// left model's perspective when the presentation is reversed.
inline EvalRun preference_eval(std::span<const ResponsePair> items, PreferenceBackend& model,
                               const EvalOptions& options = {}) {
  if (items.empty()) throw ConfigError("preference_eval: no items");
  return detail::run_orders(items.size(), options, [&](std::size_t i, PresentationOrder order) {
    const ResponsePair& item = items[i];
    EvalRecord rec;
    rec.pair_id = detail::eval_pair_id(i, item.left_id, item.right_id);
    rec.left_model = options.left_model;
    rec.right_model = options.right_model;
    rec.order = order;
    try {
      double p;
      if (order == PresentationOrder::AsGiven) {
        p = model.prefer(item.context, item.left_response, item.right_response);
      } else {
        p = 1.0 - model.prefer(item.context, item.right_response, item.left_response);
      }
      rec.probability = p;
      rec.outcome = outcome_of(p, 0.5, options.epsilon);
    } catch (const BackendError& e) {
      rec.failure = e.what();
      rec.flagged = true;
    }
    return rec;
  });
}

// ---------------------------------------------------------------------------
// Record persistence and reporting.

inline Json to_json(const EvalRecord& r) {
  Json j{{"pair_id", r.pair_id},
         {"left", r.left_model},
         {"right", r.right_model},
         {"order", to_string(r.order)},
         {"outcome", to_string(r.outcome)}};
  if (r.score_left) j["score_left"] = *r.score_left;
  if (r.score_right) j["score_right"] = *r.score_right;
  if (r.probability) j["probability"] = *r.probability;
  if (!r.raw.empty()) j["raw"] = r.raw;
  if (r.flagged) j["flagged"] = true;
  if (r.failure) j["failure"] = *r.failure;
  return j;
}

inline EvalRecord eval_record_from_json(const Json& j) {
  EvalRecord r;
  r.pair_id = detail::require_field(j, "pair_id").get<std::string>();
  r.left_model = detail::require_field(j, "left").get<std::string>();
  r.right_model = detail::require_field(j, "right").get<std::string>();
  const std::string order = detail::require_field(j, "order").get<std::string>();
  if (order == "as_given") r.order = PresentationOrder::AsGiven;
  else if (order == "reversed") r.order = PresentationOrder::Reversed;
  else throw Error("unknown presentation order '" + order + "'");
  const std::string outcome = detail::require_field(j, "outcome").get<std::string>();
  if (outcome == "win") r.outcome = Outcome::Win;
  else if (outcome == "loss") r.outcome = Outcome::Loss;
  else if (outcome == "tie") r.outcome = Outcome::Tie;
  else throw Error("unknown outcome '" + outcome + "'");
  if (auto it = j.find("score_left"); it != j.end()) r.score_left = it->get<double>();
  if (auto it = j.find("score_right"); it != j.end()) r.score_right = it->get<double>();
  if (auto it = j.find("probability"); it != j.end()) r.probability = it->get<double>();
  if (auto it = j.find("raw"); it != j.end()) r.raw = it->get<std::string>();
  if (auto it = j.find("flagged"); it != j.end()) r.flagged = it->get<bool>();
  if (auto it = j.find("failure"); it != j.end()) r.failure = it->get<std::string>();
  return r;
}

inline std::size_t save_eval_records(std::span<const EvalRecord> records, const std::string& path) {
  return detail::save_jsonl(records, path, [](const EvalRecord& r) { return to_json(r); });
}

inline std::vector<EvalRecord> load_eval_records(const std::string& path) {
  std::vector<EvalRecord> out;
  detail::for_each_jsonl(path, [&](std::size_t, const Json& j) {
    out.push_back(eval_record_from_json(j));
  });
  return out;
}

struct TallyRow {
  std::string comparison;  // e.g. "A1 vs A0"
  std::string order;       // as_given | reversed | debiased
  Tally tally;
};

// Rows for one evaluation run, labeled "<left> vs <right>".
inline std::vector<TallyRow> tally_rows(const EvalRun& run, const std::string& left_model,
                                        const std::string& right_model) {
  const std::string comparison = left_model + " vs " + right_model;
  std::vector<TallyRow> rows{{comparison, "as_given", run.as_given}};
  if (run.reversed.total() > 0) rows.push_back({comparison, "reversed", run.reversed});
  if (run.debiased.total() > 0) rows.push_back({comparison, "debiased", run.debiased});
  return rows;
}

// Rebuilds per-order and debiased tallies from persisted records, grouped by
// (left, right) model pair.
inline std::vector<TallyRow> aggregate_records(std::span<const EvalRecord> records) {
  std::map<std::pair<std::string, std::string>, std::map<std::string, const EvalRecord*>> given;
  std::map<std::pair<std::string, std::string>, std::map<std::string, const EvalRecord*>> reversed;
  std::map<std::pair<std::string, std::string>, std::pair<Tally, Tally>> orders;
  for (const EvalRecord& r : records) {
    if (r.failure) continue;
    const auto key = std::make_pair(r.left_model, r.right_model);
    if (r.order == PresentationOrder::AsGiven) {
      orders[key].first.add(r.outcome);
      given[key][r.pair_id] = &r;
    } else {
      orders[key].second.add(r.outcome);
      reversed[key][r.pair_id] = &r;
    }
  }
  std::vector<TallyRow> rows;
  for (const auto& [key, tallies] : orders) {
    const std::string comparison = key.first + " vs " + key.second;
    if (tallies.first.total() > 0) rows.push_back({comparison, "as_given", tallies.first});
    if (tallies.second.total() > 0) rows.push_back({comparison, "reversed", tallies.second});
    Tally debiased;
    for (const auto& [pair_id, rec] : given[key]) {
      auto other = reversed[key].find(pair_id);
      if (other != reversed[key].end()) debiased.add(debias_combine(*rec, *other->second));
    }
    if (debiased.total() > 0) rows.push_back({comparison, "debiased", debiased});
  }
  return rows;
}

namespace detail {

inline std::string pct(std::uint64_t part, std::uint64_t total) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * static_cast<double>(part) / static_cast<double>(total));
  return buf;
}

}  // namespace detail

// CSV plus bar-chart-ready JSON of wins/ties/losses per comparison and order.
inline void write_eval_report(std::span<const TallyRow> rows, const std::string& csv_path,
                              const std::string& json_path) {
  if (rows.empty()) throw EvalError(EvalError::Kind::EmptyTally, "report: no tallies");
  for (const TallyRow& row : rows)
    if (row.tally.total() == 0)
      throw EvalError(EvalError::Kind::EmptyTally,
                      "report: empty tally for '" + row.comparison + "' (" + row.order + ")");
  std::ofstream csv(csv_path, std::ios::binary | std::ios::trunc);
  if (!csv) throw IoError("cannot open '" + csv_path + "' for writing");
  csv << "comparison,order,wins,ties,losses,total,win_pct,tie_pct,loss_pct\n";
  Json chart = Json::array();
  for (const TallyRow& row : rows) {
    const Tally& t = row.tally;
    csv << row.comparison << ',' << row.order << ',' << t.wins << ',' << t.ties << ',' << t.losses
        << ',' << t.total() << ',' << detail::pct(t.wins, t.total()) << ','
        << detail::pct(t.ties, t.total()) << ',' << detail::pct(t.losses, t.total()) << '\n';
    chart.push_back(Json{{"comparison", row.comparison},
                         {"order", row.order},
                         {"wins", t.wins},
                         {"ties", t.ties},
                         {"losses", t.losses},
                         {"win_rate", t.win_rate()}});
  }
  csv.flush();
  if (!csv) throw IoError("write failed for '" + csv_path + "'");
  std::ofstream js(json_path, std::ios::binary | std::ios::trunc);
  if (!js) throw IoError("cannot open '" + json_path + "' for writing");
  js << chart.dump(2) << '\n';
  js.flush();
  if (!js) throw IoError("write failed for '" + json_path + "'");
}

// (context, two responses) items from paired conversation files: the shared
// context is everything before the final assistant turn, rendered with the
// trailing "Assistant:" cue; the responses are the final assistant turns.
inline std::vector<ResponsePair> response_pairs_from_conversations(
    std::span<const Conversation> left, std::span<const Conversation> right) {
  if (left.size() != right.size())
    throw ConfigError("left and right conversation files differ in length (" +
                      std::to_string(left.size()) + " vs " + std::to_string(right.size()) + ")");
  std::vector<ResponsePair> items;
  items.reserve(left.size());
  for (std::size_t i = 0; i < left.size(); ++i) {
    const Conversation& l = left[i];
    const Conversation& r = right[i];
    if (l.turns.empty() || l.turns.back().speaker != Speaker::Assistant)
      throw ConfigError("conversation '" + l.id + "' does not end with an assistant turn");
    if (r.turns.empty() || r.turns.back().speaker != Speaker::Assistant)
      throw ConfigError("conversation '" + r.id + "' does not end with an assistant turn");
    const std::span<const Turn> prefix(l.turns.data(), l.turns.size() - 1);
    items.push_back({render_context(prefix, RenderStyle(SimStyle::S1), std::nullopt,
                                    Speaker::Assistant),
                     l.turns.back().text, r.turns.back().text, l.id, r.id});
  }
  return items;
}

}  // namespace kaucus
