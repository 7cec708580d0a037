#pragma once

#include <chrono>
#include <cstdlib>
#include <memory>
#include <string>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "kaucus/backends.hpp"
#include "kaucus/errors.hpp"

namespace kaucus {

namespace detail {

struct SplitUrl {
  std::string base;  // scheme://host[:port]
  std::string path;  // /route (defaults to "/")
};

inline SplitUrl split_url(const std::string& endpoint) {
  const std::size_t scheme = endpoint.find("://");
  if (scheme == std::string::npos) throw ConfigError("endpoint '" + endpoint + "' has no scheme");
  const std::size_t slash = endpoint.find('/', scheme + 3);
  if (slash == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, slash), endpoint.substr(slash)};
}

}  // namespace detail

// One JSON-in/JSON-out POST per call with the descriptor's retry budget.
// Timeouts, non-2xx statuses, and malformed replies are all retried; the
// final failure carries the attempt count.
class HttpJsonClient {
 public:
  explicit HttpJsonClient(BackendDescriptor descriptor) : descriptor_(std::move(descriptor)) {
    validate_descriptor(descriptor_);
    url_ = detail::split_url(descriptor_.endpoint);
  }

  const BackendDescriptor& descriptor() const { return descriptor_; }

  // `extract` pulls the payload out of the reply; a missing or mistyped field
  // counts as a malformed response and is retried like a transport error.
  template <class Extract>
  auto post(const nlohmann::json& body, Extract&& extract) {
    int attempts = 0;
    for (;;) {
      ++attempts;
      try {
        return extract(post_once(body));
      } catch (const BackendError& e) {
        if (e.kind() != BackendError::Kind::Timeout && e.kind() != BackendError::Kind::Non2xx &&
            e.kind() != BackendError::Kind::MalformedResponse)
          throw;
        if (attempts > descriptor_.retry_budget)
          throw BackendError(e.kind(),
                             descriptor_.endpoint + ": " + e.what() + " (after " +
                                 std::to_string(attempts) + " attempts)",
                             attempts);
      }
    }
  }

 private:
  BackendDescriptor descriptor_;
  detail::SplitUrl url_;

  nlohmann::json post_once(const nlohmann::json& body) const {
    httplib::Client client(url_.base);
    const auto timeout = std::chrono::milliseconds(descriptor_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    if (const char* token = std::getenv("KAUCUS_AUTH_TOKEN"))
      headers.emplace("Authorization", std::string("Bearer ") + token);
    const httplib::Result result =
        client.Post(url_.path, headers, body.dump(), "application/json");
    if (!result)
      throw BackendError(BackendError::Kind::Timeout,
                         "transport failure: " + httplib::to_string(result.error()));
    if (result->status / 100 != 2)
      throw BackendError(BackendError::Kind::Non2xx,
                         "HTTP " + std::to_string(result->status));
    try {
      return nlohmann::json::parse(result->body);
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(BackendError::Kind::MalformedResponse,
                         std::string("reply is not JSON: ") + e.what());
    }
  }
};

namespace detail {

inline std::string extract_string(const nlohmann::json& reply, const char* key) {
  auto it = reply.find(key);
  if (it == reply.end() || !it->is_string())
    throw BackendError(BackendError::Kind::MalformedResponse,
                       std::string("reply lacks string field '") + key + "'");
  return it->get<std::string>();
}

inline double extract_number(const nlohmann::json& reply, const char* key) {
  auto it = reply.find(key);
  if (it == reply.end() || !it->is_number())
    throw BackendError(BackendError::Kind::MalformedResponse,
                       std::string("reply lacks numeric field '") + key + "'");
  return it->get<double>();
}

}  // namespace detail

class HttpCompletionBackend : public CompletionBackend {
 public:
  explicit HttpCompletionBackend(BackendDescriptor d) : client_(std::move(d)) {}

  std::string complete(const CompletionRequest& request) override {
    nlohmann::json body{{"prompt", request.prompt},
                        {"max_tokens", request.max_tokens},
                        {"temperature", request.temperature},
                        {"stop", request.stop}};
    if (request.seed) body["seed"] = *request.seed;
    const std::string text = client_.post(
        body, [](const nlohmann::json& reply) { return detail::extract_string(reply, "text"); });
    return strip_completion(text, request.stop);
  }

 private:
  HttpJsonClient client_;
};

class HttpSummarizerBackend : public SummarizerBackend {
 public:
  explicit HttpSummarizerBackend(BackendDescriptor d) : client_(std::move(d)) {}

  std::string summarize(const std::string& text) override {
    if (trim_copy(text).empty()) throw Error("summarize: empty input");
    const std::string summary =
        client_.post(nlohmann::json{{"text", text}}, [](const nlohmann::json& reply) {
          if (reply.contains("summary") && reply["summary"].is_string())
            return reply["summary"].get<std::string>();
          return detail::extract_string(reply, "text");
        });
    if (trim_copy(summary).empty())
      throw BackendError(BackendError::Kind::EmptySummary, "summarizer returned a blank summary");
    return summary;
  }

 private:
  HttpJsonClient client_;
};

class HttpRewardBackend : public RewardBackend {
 public:
  explicit HttpRewardBackend(BackendDescriptor d) : client_(std::move(d)) {}

  double score_response(const std::string& context, const std::string& response) override {
    const double score =
        client_.post(nlohmann::json{{"context", context}, {"response", response}},
                     [](const nlohmann::json& reply) { return detail::extract_number(reply, "score"); });
    return detail::checked_probability(score, "reward scorer");
  }

 private:
  HttpJsonClient client_;
};

class HttpPreferenceBackend : public PreferenceBackend {
 public:
  explicit HttpPreferenceBackend(BackendDescriptor d) : client_(std::move(d)) {}

  double prefer(const std::string& context, const std::string& a, const std::string& b) override {
    const double score = client_.post(
        nlohmann::json{{"context", context}, {"response_a", a}, {"response_b", b}},
        [](const nlohmann::json& reply) { return detail::extract_number(reply, "score"); });
    return detail::checked_probability(score, "preference model");
  }

 private:
  HttpJsonClient client_;
};

class HttpJudgeBackend : public JudgeBackend {
 public:
  explicit HttpJudgeBackend(BackendDescriptor d) : client_(std::move(d)) {}

  JudgeResult judge_pair(const std::string& a, const std::string& b,
                         const std::string& rubric) override {
    const std::string raw = client_.post(
        nlohmann::json{{"conversation_a", a}, {"conversation_b", b}, {"rubric", rubric}},
        [](const nlohmann::json& reply) { return detail::extract_string(reply, "text"); });
    return detail::parsed_judgment(raw);
  }

 private:
  HttpJsonClient client_;
};

// ---------------------------------------------------------------------------
// Endpoint factory. "http(s)://..." endpoints get HTTP clients; "mock:..."
// endpoints get deterministic in-process stand-ins so whole pipelines can run
// and be tested without services. Mock specs:
//
//   completion:  mock:constant:<text> | mock:echo-last-line |
//                mock:passage-words[:n] | mock:hash-words[:n]
//   summarizer:  mock:constant:<text> | mock:first-words[:n]
//   reward:      mock:score:constant:<p> | mock:score:length[:scale]
//   preference:  mock:prefer:constant:<p> | mock:prefer:longer
//   judge:       mock:judge:constant:<reply> | mock:judge:first:<a>:<b> | mock:judge:length

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline bool consume_prefix(std::string& spec, std::string_view prefix) {
  if (!std::string_view(spec).starts_with(prefix)) return false;
  spec.erase(0, prefix.size());
  return true;
}

inline int parse_count(const std::string& spec, int fallback) {
  if (spec.empty()) return fallback;
  try {
    const int n = std::stoi(spec);
    if (n >= 1) return n;
  } catch (const std::exception&) {
  }
  throw ConfigError("bad mock count '" + spec + "'");
}

inline std::string first_words(const std::string& text, int n) {
  std::string out;
  std::string word;
  int words = 0;
  auto flush = [&] {
    if (word.empty() || words == n) return;
    if (!out.empty()) out += ' ';
    out += word;
    word.clear();
    ++words;
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) flush();
    else word += c;
    if (words == n) break;
  }
  flush();
  return out;
}

// Words of the most recent passage block in the prompt; the block runs from
// the last "Passage: " tag to the cue line that follows it.
inline std::string passage_words(const std::string& prompt, int n) {
  const std::size_t tag = prompt.rfind("Passage: ");
  if (tag == std::string::npos) return last_content_line(prompt);
  const std::size_t begin = tag + 9;
  std::size_t end = prompt.find("\nHuman:", begin);
  if (end == std::string::npos) end = prompt.size();
  return first_words(prompt.substr(begin, end - begin), n);
}

inline std::uint64_t fnv_hash(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hash_words(const std::string& prompt, int n) {
  std::uint64_t h = splitmix64(fnv_hash(prompt));
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (!out.empty()) out += ' ';
    out += "w" + std::to_string(h % 4096);
    h = splitmix64(h);
  }
  return out;
}

inline double parse_probability(const std::string& spec) {
  try {
    const double p = std::stod(spec);
    if (p >= 0.0 && p <= 1.0) return p;
  } catch (const std::exception&) {
  }
  throw ConfigError("bad mock probability '" + spec + "'");
}

inline std::size_t count_words(const std::string& text) {
  std::size_t words = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c));
    if (!space && !in_word) ++words;
    in_word = !space;
  }
  return words;
}

}  // namespace detail

inline std::shared_ptr<CompletionBackend> make_completion_backend(const BackendDescriptor& d) {
  validate_descriptor(d);
  std::string spec = d.endpoint;
  if (!detail::consume_prefix(spec, "mock:"))
    return std::make_shared<HttpCompletionBackend>(d);
  if (detail::consume_prefix(spec, "constant:"))
    return std::make_shared<FunctionCompletionBackend>(
        [text = spec](const CompletionRequest&) { return text; });
  if (spec == "echo-last-line") return make_echo_backend();
  if (detail::consume_prefix(spec, "passage-words")) {
    const int n = detail::parse_count(spec.empty() ? "" : spec.substr(1), 12);
    return std::make_shared<FunctionCompletionBackend>(
        [n](const CompletionRequest& req) { return detail::passage_words(req.prompt, n); });
  }
  if (detail::consume_prefix(spec, "hash-words")) {
    const int n = detail::parse_count(spec.empty() ? "" : spec.substr(1), 8);
    return std::make_shared<FunctionCompletionBackend>(
        [n](const CompletionRequest& req) { return detail::hash_words(req.prompt, n); });
  }
  throw ConfigError("unknown completion mock '" + d.endpoint + "'");
}

inline std::shared_ptr<SummarizerBackend> make_summarizer_backend(const BackendDescriptor& d) {
  validate_descriptor(d);
  std::string spec = d.endpoint;
  if (!detail::consume_prefix(spec, "mock:"))
    return std::make_shared<HttpSummarizerBackend>(d);
  if (detail::consume_prefix(spec, "constant:"))
    return std::make_shared<ScriptedSummarizerBackend>(
        std::unordered_map<std::string, std::string>{},
        [text = spec](const std::string&) { return text; });
  if (detail::consume_prefix(spec, "first-words")) {
    const int n = detail::parse_count(spec.empty() ? "" : spec.substr(1), 12);
    return std::make_shared<ScriptedSummarizerBackend>(
        std::unordered_map<std::string, std::string>{},
        [n](const std::string& text) { return detail::first_words(text, n); });
  }
  throw ConfigError("unknown summarizer mock '" + d.endpoint + "'");
}

inline std::shared_ptr<RewardBackend> make_reward_backend(const BackendDescriptor& d) {
  validate_descriptor(d);
  std::string spec = d.endpoint;
  if (!detail::consume_prefix(spec, "mock:")) return std::make_shared<HttpRewardBackend>(d);
  if (detail::consume_prefix(spec, "score:constant:")) {
    const double p = detail::parse_probability(spec);
    return std::make_shared<FunctionRewardBackend>(
        [p](const std::string&, const std::string&) { return p; });
  }
  if (detail::consume_prefix(spec, "score:length")) {
    const double scale = spec.empty() ? 100.0 : std::stod(spec.substr(1));
    if (!(scale > 0)) throw ConfigError("bad mock scale in '" + d.endpoint + "'");
    return std::make_shared<FunctionRewardBackend>(
        [scale](const std::string&, const std::string& response) {
          return static_cast<double>(response.size()) / (static_cast<double>(response.size()) + scale);
        });
  }
  throw ConfigError("unknown reward mock '" + d.endpoint + "'");
}

inline std::shared_ptr<PreferenceBackend> make_preference_backend(const BackendDescriptor& d) {
  validate_descriptor(d);
  std::string spec = d.endpoint;
  if (!detail::consume_prefix(spec, "mock:")) return std::make_shared<HttpPreferenceBackend>(d);
  if (detail::consume_prefix(spec, "prefer:constant:")) {
    // Position-biased by construction: the same p whatever is presented first.
    const double p = detail::parse_probability(spec);
    return std::make_shared<FunctionPreferenceBackend>(
        [p](const std::string&, const std::string&, const std::string&) { return p; });
  }
  if (spec == "prefer:longer")
    // Antisymmetric by construction: p(a, b) + p(b, a) = 1.
    return std::make_shared<FunctionPreferenceBackend>(
        [](const std::string&, const std::string& a, const std::string& b) {
          const double la = static_cast<double>(a.size());
          const double lb = static_cast<double>(b.size());
          return la + lb > 0 ? la / (la + lb) : 0.5;
        });
  throw ConfigError("unknown preference mock '" + d.endpoint + "'");
}

inline std::shared_ptr<JudgeBackend> make_judge_backend(const BackendDescriptor& d) {
  validate_descriptor(d);
  std::string spec = d.endpoint;
  if (!detail::consume_prefix(spec, "mock:")) return std::make_shared<HttpJudgeBackend>(d);
  if (detail::consume_prefix(spec, "judge:constant:"))
    return std::make_shared<FunctionJudgeBackend>(
        [reply = spec](const std::string&, const std::string&, const std::string&) { return reply; });
  if (detail::consume_prefix(spec, "judge:first:")) {
    const std::size_t colon = spec.find(':');
    if (colon == std::string::npos) throw ConfigError("mock:judge:first needs two scores");
    return std::make_shared<FunctionJudgeBackend>(
        [reply = spec.substr(0, colon) + " " + spec.substr(colon + 1)](
            const std::string&, const std::string&, const std::string&) { return reply; });
  }
  if (spec == "judge:length")
    return std::make_shared<FunctionJudgeBackend>(
        [](const std::string& a, const std::string& b, const std::string&) {
          return std::to_string(detail::count_words(a)) + " " + std::to_string(detail::count_words(b));
        });
  throw ConfigError("unknown judge mock '" + d.endpoint + "'");
}

}  // namespace kaucus
