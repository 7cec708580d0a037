#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kaucus/core.hpp"
#include "kaucus/errors.hpp"

namespace kaucus {

struct CompletionRequest {
  std::string prompt;
  int max_tokens = 256;
  double temperature = 0.0;
  std::vector<std::string> stop;  // role cues; one completion yields one turn
  std::optional<std::uint64_t> seed;
};

enum class BackendKind { Completion, Summarizer, RewardScorer, Preference, Judge };

inline const char* to_string(BackendKind k) {
  switch (k) {
    case BackendKind::Completion: return "completion";
    case BackendKind::Summarizer: return "summarizer";
    case BackendKind::RewardScorer: return "reward";
    case BackendKind::Preference: return "preference";
    case BackendKind::Judge: return "judge";
  }
  return "completion";
}

struct BackendDescriptor {
  BackendKind kind = BackendKind::Completion;
  std::string endpoint;
  int timeout_ms = 30000;
  int retry_budget = 2;
};

inline void validate_descriptor(const BackendDescriptor& d) {
  if (d.endpoint.empty()) throw ConfigError("backend endpoint is empty");
  if (d.timeout_ms <= 0) throw ConfigError("backend timeout must be > 0");
  if (d.retry_budget < 0) throw ConfigError("backend retry budget must be >= 0");
}

// Truncate at the first stop string, then drop trailing whitespace.
inline std::string strip_completion(std::string text, std::span<const std::string> stop) {
  std::size_t cut = std::string::npos;
  for (const std::string& s : stop) {
    if (s.empty()) continue;
    const std::size_t at = text.find(s);
    if (at < cut) cut = at;
  }
  if (cut != std::string::npos) text.erase(cut);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
  return text;
}

// First two numeric literals in the reply, in order.
inline std::optional<std::pair<double, double>> parse_judge_scores(const std::string& raw) {
  static const std::regex number(R"([-+]?[0-9]+(?:\.[0-9]+)?)");
  auto it = std::sregex_iterator(raw.begin(), raw.end(), number);
  const auto end = std::sregex_iterator();
  if (it == end) return std::nullopt;
  const double first = std::stod(it->str());
  if (++it == end) return std::nullopt;
  return std::make_pair(first, std::stod(it->str()));
}

struct JudgeResult {
  double score_first = 0.0;   // conversation presented first
  double score_second = 0.0;  // conversation presented second
  std::string raw;
};

// ---------------------------------------------------------------------------
// Service contracts.

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual std::string complete(const CompletionRequest& request) = 0;
};

class SummarizerBackend {
 public:
  virtual ~SummarizerBackend() = default;
  virtual std::string summarize(const std::string& text) = 0;
};

class RewardBackend {
 public:
  virtual ~RewardBackend() = default;
  // Helpfulness probability in [0, 1] for one (context, response).
  virtual double score_response(const std::string& context, const std::string& response) = 0;
};

class PreferenceBackend {
 public:
  virtual ~PreferenceBackend() = default;
  // Probability in [0, 1] that response_a is the better answer, one pass.
  virtual double prefer(const std::string& context, const std::string& response_a,
                        const std::string& response_b) = 0;
};

class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  virtual JudgeResult judge_pair(const std::string& conversation_a,
                                 const std::string& conversation_b,
                                 const std::string& rubric) = 0;
};

namespace detail {

inline double checked_probability(double v, const char* who) {
  if (!(v >= 0.0 && v <= 1.0))
    throw BackendError(BackendError::Kind::OutOfRange,
                       std::string(who) + " returned " + std::to_string(v) + ", outside [0, 1]");
  return v;
}

inline JudgeResult parsed_judgment(std::string raw) {
  const auto scores = parse_judge_scores(raw);
  if (!scores) throw UnparseableJudgmentError(std::move(raw));
  return {scores->first, scores->second, std::move(raw)};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Deterministic scripted mocks. All are thread-safe; the scripted ones
// synchronize their cursor.

class ScriptedCompletionBackend : public CompletionBackend {
 public:
  explicit ScriptedCompletionBackend(std::vector<std::string> script)
      : script_(std::move(script)) {}

  std::string complete(const CompletionRequest& request) override {
    std::lock_guard lock(mutex_);
    if (cursor_ >= script_.size())
      throw BackendError(BackendError::Kind::ScriptExhausted,
                         "completion script exhausted after " + std::to_string(cursor_) + " calls");
    return strip_completion(script_[cursor_++], request.stop);
  }

  std::size_t consumed() const {
    std::lock_guard lock(mutex_);
    return cursor_;
  }

 private:
  mutable std::mutex mutex_;
  std::vector<std::string> script_;
  std::size_t cursor_ = 0;
};

class FunctionCompletionBackend : public CompletionBackend {
 public:
  using Fn = std::function<std::string(const CompletionRequest&)>;
  explicit FunctionCompletionBackend(Fn fn) : fn_(std::move(fn)) {}

  std::string complete(const CompletionRequest& request) override {
    return strip_completion(fn_(request), request.stop);
  }

 private:
  Fn fn_;
};

// Last line of the prompt that carries content: the bare trailing cue is
// skipped and a leading "Human: " / "Assistant: " / "Passage: " / "Summary: "
// tag is removed.
inline std::string last_content_line(const std::string& prompt) {
  static const std::string kTags[] = {"Human: ", "Assistant: ", "Passage: ", "Summary: "};
  std::size_t end = prompt.size();
  while (end > 0) {
    std::size_t begin = prompt.rfind('\n', end - 1);
    begin = begin == std::string::npos ? 0 : begin + 1;
    std::string line = trim_copy(std::string_view(prompt).substr(begin, end - begin));
    if (!line.empty() && line != "Human:" && line != "Assistant:") {
      for (const std::string& tag : kTags)
        if (line.starts_with(tag)) return line.substr(tag.size());
      return line;
    }
    if (begin == 0) break;
    end = begin - 1;
  }
  return {};
}

inline std::shared_ptr<CompletionBackend> make_echo_backend() {
  return std::make_shared<FunctionCompletionBackend>(
      [](const CompletionRequest& req) { return last_content_line(req.prompt); });
}

class ScriptedSummarizerBackend : public SummarizerBackend {
 public:
  using Fallback = std::function<std::string(const std::string&)>;
  explicit ScriptedSummarizerBackend(std::unordered_map<std::string, std::string> table,
                                     Fallback fallback = {})
      : table_(std::move(table)), fallback_(std::move(fallback)) {}

  std::string summarize(const std::string& text) override {
    if (trim_copy(text).empty()) throw Error("summarize: empty input");
    std::string summary;
    if (auto it = table_.find(text); it != table_.end()) summary = it->second;
    else if (fallback_) summary = fallback_(text);
    else throw Error("summarize: no scripted summary for input");
    if (trim_copy(summary).empty())
      throw BackendError(BackendError::Kind::EmptySummary, "summarizer returned a blank summary");
    return summary;
  }

 private:
  std::unordered_map<std::string, std::string> table_;
  Fallback fallback_;
};

class FunctionRewardBackend : public RewardBackend {
 public:
  using Fn = std::function<double(const std::string&, const std::string&)>;
  explicit FunctionRewardBackend(Fn fn) : fn_(std::move(fn)) {}

  double score_response(const std::string& context, const std::string& response) override {
    return detail::checked_probability(fn_(context, response), "reward scorer");
  }

 private:
  Fn fn_;
};

class FunctionPreferenceBackend : public PreferenceBackend {
 public:
  using Fn = std::function<double(const std::string&, const std::string&, const std::string&)>;
  explicit FunctionPreferenceBackend(Fn fn) : fn_(std::move(fn)) {}

  double prefer(const std::string& context, const std::string& a, const std::string& b) override {
    return detail::checked_probability(fn_(context, a, b), "preference model");
  }

 private:
  Fn fn_;
};

class FunctionJudgeBackend : public JudgeBackend {
 public:
  using Fn = std::function<std::string(const std::string&, const std::string&, const std::string&)>;
  explicit FunctionJudgeBackend(Fn fn) : fn_(std::move(fn)) {}

  JudgeResult judge_pair(const std::string& a, const std::string& b,
                         const std::string& rubric) override {
    return detail::parsed_judgment(fn_(a, b, rubric));
  }

 private:
  Fn fn_;
};

class ScriptedJudgeBackend : public JudgeBackend {
 public:
  explicit ScriptedJudgeBackend(std::vector<std::string> replies) : replies_(std::move(replies)) {}

  JudgeResult judge_pair(const std::string&, const std::string&, const std::string&) override {
    std::string raw;
    {
      std::lock_guard lock(mutex_);
      if (cursor_ >= replies_.size())
        throw BackendError(BackendError::Kind::ScriptExhausted,
                           "judge script exhausted after " + std::to_string(cursor_) + " calls");
      raw = replies_[cursor_++];
    }
    return detail::parsed_judgment(std::move(raw));
  }

 private:
  std::mutex mutex_;
  std::vector<std::string> replies_;
  std::size_t cursor_ = 0;
};

// ---------------------------------------------------------------------------
// Audit trail: ordered JSONL event log shared by the engine and the backend
// clients. Events carry a sequence number instead of wall time so that runs
// with fixed seeds and scripts stay byte-identical.

class AuditLog {
 public:
  void append(nlohmann::json event) {
    std::lock_guard lock(mutex_);
    event["seq"] = next_++;
    events_.push_back(std::move(event));
  }

  void append_all(std::vector<nlohmann::json> events) {
    std::lock_guard lock(mutex_);
    for (nlohmann::json& event : events) {
      event["seq"] = next_++;
      events_.push_back(std::move(event));
    }
  }

  // Snapshot; call after the producing run has finished.
  std::vector<nlohmann::json> events() const {
    std::lock_guard lock(mutex_);
    return events_;
  }

  std::size_t write_jsonl(const std::string& path) const {
    std::lock_guard lock(mutex_);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    for (const nlohmann::json& event : events_) out << event.dump() << '\n';
    out.flush();
    if (!out) throw IoError("write failed for '" + path + "'");
    return events_.size();
  }

 private:
  mutable std::mutex mutex_;
  std::vector<nlohmann::json> events_;
  std::uint64_t next_ = 0;
};

}  // namespace kaucus
