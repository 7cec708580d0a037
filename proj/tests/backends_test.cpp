#include "kaucus/backends.hpp"

#include <atomic>
#include <string>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

#include "kaucus/http_backends.hpp"

namespace kaucus {
namespace {

TEST(StripCompletion, CutsAtFirstStopAndTrimsTail) {
  const std::vector<std::string> stop{"\nHuman:", "\nAssistant:"};
  EXPECT_EQ(strip_completion("hi there\nHuman: next turn", stop), "hi there");
  EXPECT_EQ(strip_completion("hi\n\nAssistant: reply\nHuman: more", stop), "hi");
  EXPECT_EQ(strip_completion("clean already  \n", stop), "clean already");
  EXPECT_EQ(strip_completion("", stop), "");
}

TEST(JudgeParsing, FirstTwoNumericLiterals) {
  auto scores = parse_judge_scores("7 4");
  ASSERT_TRUE(scores);
  EXPECT_DOUBLE_EQ(scores->first, 7.0);
  EXPECT_DOUBLE_EQ(scores->second, 4.0);

  scores = parse_judge_scores("First: 8.5/10, second: 6/10");
  ASSERT_TRUE(scores);
  EXPECT_DOUBLE_EQ(scores->first, 8.5);
  EXPECT_DOUBLE_EQ(scores->second, 10.0);

  EXPECT_FALSE(parse_judge_scores("no numbers here"));
  EXPECT_FALSE(parse_judge_scores("only 7"));
}

TEST(ScriptedCompletion, PopsInOrderThenExhausts) {
  ScriptedCompletionBackend backend({"hello", "again"});
  CompletionRequest req;
  req.stop = {"\nHuman:"};
  EXPECT_EQ(backend.complete(req), "hello");
  EXPECT_EQ(backend.complete(req), "again");
  try {
    backend.complete(req);
    FAIL() << "expected ScriptExhausted";
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendError::Kind::ScriptExhausted);
  }
}

TEST(EchoBackend, ReturnsLastContentLine) {
  auto backend = make_echo_backend();
  CompletionRequest req;
  req.prompt = "Human: what is lava?\n\nAssistant:";
  EXPECT_EQ(backend->complete(req), "what is lava?");
  req.prompt = "Summary: s\n\nHuman:";
  EXPECT_EQ(backend->complete(req), "s");
}

TEST(ScriptedSummarizer, TableHitAndBlankDetection) {
  const std::unordered_map<std::string, std::string> table{{"conv1", "booking a flight"}};
  ScriptedSummarizerBackend summarizer(table);
  EXPECT_EQ(summarizer.summarize("conv1"), "booking a flight");

  ScriptedSummarizerBackend blank({}, [](const std::string&) { return "   "; });
  try {
    blank.summarize("anything");
    FAIL() << "expected EmptySummary";
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendError::Kind::EmptySummary);
  }
  EXPECT_THROW(summarizer.summarize("  "), Error);
}

TEST(ScriptedSummarizer, BatchPreservesOrder) {
  const std::unordered_map<std::string, std::string> table{
      {"a", "summary a"}, {"b", "summary b"}, {"c", "summary c"}};
  ScriptedSummarizerBackend summarizer(table);
  std::vector<std::string> out;
  for (const std::string input : {"a", "b", "c"}) out.push_back(summarizer.summarize(input));
  EXPECT_EQ(out, (std::vector<std::string>{"summary a", "summary b", "summary c"}));
}

TEST(RewardMock, TableAndRangeCheck) {
  FunctionRewardBackend scorer([](const std::string& c, const std::string& r) {
    return c == "ctx" && r == "r1" ? 0.9 : 0.1;
  });
  EXPECT_DOUBLE_EQ(scorer.score_response("ctx", "r1"), 0.9);
  EXPECT_DOUBLE_EQ(scorer.score_response("ctx", "r1"), 0.9);  // deterministic

  FunctionRewardBackend bad([](const std::string&, const std::string&) { return 1.3; });
  try {
    bad.score_response("c", "r");
    FAIL() << "expected OutOfRange";
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendError::Kind::OutOfRange);
  }
}

TEST(PreferenceMock, ConstantAndAntisymmetric) {
  FunctionPreferenceBackend always_a([](const std::string&, const std::string&,
                                        const std::string&) { return 1.0; });
  EXPECT_DOUBLE_EQ(always_a.prefer("c", "a", "b"), 1.0);

  FunctionPreferenceBackend indifferent([](const std::string&, const std::string&,
                                           const std::string&) { return 0.5; });
  EXPECT_DOUBLE_EQ(indifferent.prefer("c", "a", "b"), 0.5);

  FunctionPreferenceBackend longer([](const std::string&, const std::string& a,
                                      const std::string& b) {
    const double la = static_cast<double>(a.size());
    const double lb = static_cast<double>(b.size());
    return la / (la + lb);
  });
  const double p = longer.prefer("c", "longer answer", "short");
  const double q = longer.prefer("c", "short", "longer answer");
  EXPECT_NEAR(p + q, 1.0, 1e-12);
}

TEST(JudgeMock, ParsesScoresAndKeepsRaw) {
  FunctionJudgeBackend judge(
      [](const std::string&, const std::string&, const std::string&) { return "7 4"; });
  const JudgeResult r = judge.judge_pair("conv a", "conv b", "rubric");
  EXPECT_DOUBLE_EQ(r.score_first, 7.0);
  EXPECT_DOUBLE_EQ(r.score_second, 4.0);
  EXPECT_EQ(r.raw, "7 4");
}

TEST(JudgeMock, ProseIsUnparseableAndRetainsRaw) {
  FunctionJudgeBackend judge([](const std::string&, const std::string&, const std::string&) {
    return "both were lovely";
  });
  try {
    judge.judge_pair("a", "b", "rubric");
    FAIL() << "expected UnparseableJudgmentError";
  } catch (const UnparseableJudgmentError& e) {
    EXPECT_EQ(e.raw(), "both were lovely");
  }
}

TEST(JudgeMock, ConsistentMockScoresIdenticalConversationsEqually) {
  FunctionJudgeBackend judge([](const std::string& a, const std::string& b, const std::string&) {
    return std::to_string(a.size() % 10) + " " + std::to_string(b.size() % 10);
  });
  const JudgeResult r = judge.judge_pair("same text", "same text", "rubric");
  EXPECT_DOUBLE_EQ(r.score_first, r.score_second);
}

TEST(AuditLog, SequencesAndMergesInOrder) {
  AuditLog log;
  log.append({{"event", "retrieval"}});
  std::vector<nlohmann::json> buffered;
  buffered.push_back({{"event", "completion"}});
  buffered.push_back({{"event", "completion"}});
  log.append_all(std::move(buffered));
  const auto events = log.events();
  ASSERT_EQ(events.size(), 3u);
  for (std::size_t i = 0; i < events.size(); ++i) EXPECT_EQ(events[i]["seq"], i);
}

// --- HTTP clients against an in-process server ---------------------------

class TestServer {
 public:
  TestServer() = default;

  void start() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~TestServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  httplib::Server& handlers() { return server_; }
  std::string url(const std::string& path) const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

BackendDescriptor descriptor(BackendKind kind, const std::string& endpoint, int retries = 2) {
  BackendDescriptor d;
  d.kind = kind;
  d.endpoint = endpoint;
  d.timeout_ms = 2000;
  d.retry_budget = retries;
  return d;
}

TEST(HttpCompletion, PostsPromptAndStripsReply) {
  TestServer server;
  server.handlers().Post("/complete", [](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    EXPECT_EQ(body["prompt"], "Human: hi\n\nAssistant:");
    EXPECT_EQ(body["max_tokens"], 64);
    res.set_content(nlohmann::json{{"text", "hello there\nHuman: ignored"}}.dump(),
                    "application/json");
  });
  server.start();

  HttpCompletionBackend backend(descriptor(BackendKind::Completion, server.url("/complete")));
  CompletionRequest req;
  req.prompt = "Human: hi\n\nAssistant:";
  req.max_tokens = 64;
  req.stop = {"\nHuman:"};
  EXPECT_EQ(backend.complete(req), "hello there");
}

TEST(HttpCompletion, PersistentServerErrorCarriesAttemptCount) {
  TestServer server;
  std::atomic<int> calls{0};
  server.handlers().Post("/complete", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 500;
  });
  server.start();

  HttpCompletionBackend backend(
      descriptor(BackendKind::Completion, server.url("/complete"), /*retries=*/2));
  CompletionRequest req;
  req.prompt = "p";
  req.stop = {"\nHuman:"};
  try {
    backend.complete(req);
    FAIL() << "expected Non2xx";
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendError::Kind::Non2xx);
    EXPECT_EQ(e.attempts(), 3);  // initial try + 2 retries
  }
  EXPECT_EQ(calls.load(), 3);
}

TEST(HttpCompletion, RecoversWithinRetryBudget) {
  TestServer server;
  std::atomic<int> calls{0};
  server.handlers().Post("/complete", [&](const httplib::Request&, httplib::Response& res) {
    if (++calls < 3) {
      res.status = 503;
      return;
    }
    res.set_content(nlohmann::json{{"text", "recovered"}}.dump(), "application/json");
  });
  server.start();

  HttpCompletionBackend backend(
      descriptor(BackendKind::Completion, server.url("/complete"), /*retries=*/2));
  CompletionRequest req;
  req.prompt = "p";
  req.stop = {"\nHuman:"};
  EXPECT_EQ(backend.complete(req), "recovered");
  EXPECT_EQ(calls.load(), 3);
}

TEST(HttpCompletion, NonJsonReplyIsMalformed) {
  TestServer server;
  server.handlers().Post("/complete", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("plain text, not json", "text/plain");
  });
  server.start();

  HttpCompletionBackend backend(
      descriptor(BackendKind::Completion, server.url("/complete"), /*retries=*/0));
  CompletionRequest req;
  req.prompt = "p";
  req.stop = {"\nHuman:"};
  try {
    backend.complete(req);
    FAIL() << "expected MalformedResponse";
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendError::Kind::MalformedResponse);
  }
}

TEST(HttpReward, OutOfRangeScoreIsNotRetried) {
  TestServer server;
  std::atomic<int> calls{0};
  server.handlers().Post("/score", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.set_content(nlohmann::json{{"score", 1.3}}.dump(), "application/json");
  });
  server.start();

  HttpRewardBackend backend(descriptor(BackendKind::RewardScorer, server.url("/score")));
  try {
    backend.score_response("ctx", "resp");
    FAIL() << "expected OutOfRange";
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendError::Kind::OutOfRange);
  }
  EXPECT_EQ(calls.load(), 1);
}

TEST(HttpClient, AuthTokenTravelsAsBearerHeader) {
  TestServer server;
  server.handlers().Post("/complete", [](const httplib::Request& req, httplib::Response& res) {
    EXPECT_EQ(req.get_header_value("Authorization"), "Bearer sesame");
    res.set_content(nlohmann::json{{"text", "ok"}}.dump(), "application/json");
  });
  server.start();

  setenv("KAUCUS_AUTH_TOKEN", "sesame", 1);
  HttpCompletionBackend backend(descriptor(BackendKind::Completion, server.url("/complete")));
  CompletionRequest req;
  req.prompt = "p";
  req.stop = {"\nHuman:"};
  EXPECT_EQ(backend.complete(req), "ok");
  unsetenv("KAUCUS_AUTH_TOKEN");
}

TEST(HttpJudge, RepliesAreParsed) {
  TestServer server;
  server.handlers().Post("/judge", [](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    EXPECT_TRUE(body.contains("conversation_a"));
    EXPECT_TRUE(body.contains("rubric"));
    res.set_content(nlohmann::json{{"text", "I rate them 8 and 5."}}.dump(), "application/json");
  });
  server.start();

  HttpJudgeBackend backend(descriptor(BackendKind::Judge, server.url("/judge")));
  const JudgeResult r = backend.judge_pair("conv a", "conv b", "rate them");
  EXPECT_DOUBLE_EQ(r.score_first, 8.0);
  EXPECT_DOUBLE_EQ(r.score_second, 5.0);
}

// --- mock endpoint factory -------------------------------------------------

TEST(MockFactory, CompletionSchemes) {
  CompletionRequest req;
  req.prompt = "Human: question about lava\n\nPassage: lava is molten rock\nHuman:";
  req.stop = {"\nHuman:"};

  auto constant = make_completion_backend(descriptor(BackendKind::Completion, "mock:constant:hi"));
  EXPECT_EQ(constant->complete(req), "hi");

  auto passage =
      make_completion_backend(descriptor(BackendKind::Completion, "mock:passage-words:3"));
  EXPECT_EQ(passage->complete(req), "lava is molten");

  auto hash = make_completion_backend(descriptor(BackendKind::Completion, "mock:hash-words:4"));
  const std::string words = hash->complete(req);
  EXPECT_EQ(hash->complete(req), words);  // deterministic in the prompt
  EXPECT_EQ(std::count(words.begin(), words.end(), ' '), 3);

  EXPECT_THROW(make_completion_backend(descriptor(BackendKind::Completion, "mock:bogus")),
               ConfigError);
}

TEST(MockFactory, EvaluatorSchemes) {
  auto reward = make_reward_backend(descriptor(BackendKind::RewardScorer, "mock:score:constant:0.7"));
  EXPECT_DOUBLE_EQ(reward->score_response("c", "r"), 0.7);

  auto prefer = make_preference_backend(descriptor(BackendKind::Preference, "mock:prefer:longer"));
  EXPECT_GT(prefer->prefer("c", "a much longer answer", "nope"), 0.5);

  auto judge = make_judge_backend(descriptor(BackendKind::Judge, "mock:judge:first:9:3"));
  const JudgeResult r = judge->judge_pair("a", "b", "rubric");
  EXPECT_DOUBLE_EQ(r.score_first, 9.0);
  EXPECT_DOUBLE_EQ(r.score_second, 3.0);

  auto summarizer =
      make_summarizer_backend(descriptor(BackendKind::Summarizer, "mock:first-words:3"));
  EXPECT_EQ(summarizer->summarize("one two three four five"), "one two three");
}

}  // namespace
}  // namespace kaucus
