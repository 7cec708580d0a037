// Acceptance suite: runs every criterion end to end against the library and
// prints one PASS/FAIL line per criterion. Exits nonzero if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "kaucus/engine.hpp"
#include "kaucus/eval.hpp"
#include "kaucus/formatting.hpp"
#include "kaucus/metrics.hpp"
#include "kaucus/pipeline.hpp"
#include "kaucus/retrieval.hpp"

namespace {

using namespace kaucus;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

int failures = 0;

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define CHECK(cond, msg)                                                      \
  do {                                                                        \
    if (!(cond)) throw CheckFailure(std::string(msg) + "  [" #cond "]");      \
  } while (0)

void criterion(int number, const char* title, double time_limit_s,
               const std::function<void()>& body) {
  const auto start = Clock::now();
  try {
    body();
    const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
    if (time_limit_s > 0 && elapsed > time_limit_s)
      throw CheckFailure("exceeded time limit of " + std::to_string(time_limit_s) + "s (" +
                         std::to_string(elapsed) + "s)");
    std::printf("[PASS] criterion %2d: %s (%.2fs)\n", number, title, elapsed);
  } catch (const std::exception& e) {
    ++failures;
    std::printf("[FAIL] criterion %2d: %s\n        %s\n", number, title, e.what());
  }
}

std::string fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "kaucus-acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

Turn human(std::string text) { return {Speaker::Human, std::move(text), Provenance::Corpus, {}}; }
Turn assistant(std::string text) {
  return {Speaker::Assistant, std::move(text), Provenance::Corpus, {}};
}

// ---------------------------------------------------------------------------
// Criterion 1 — BM25 ranking and scores against an independent scalar oracle.

double oracle_bm25(const std::vector<std::vector<std::string>>& docs,
                   const std::vector<std::string>& query, std::size_t doc, double k1 = 1.2,
                   double b = 0.75) {
  const double n = static_cast<double>(docs.size());
  double total_len = 0;
  for (const auto& d : docs) total_len += static_cast<double>(d.size());
  const double avgdl = n > 0 ? total_len / n : 0.0;
  double score = 0.0;
  for (const std::string& term : query) {
    std::size_t df = 0;
    for (const auto& d : docs)
      if (std::count(d.begin(), d.end(), term) > 0) ++df;
    const double tf = static_cast<double>(std::count(docs[doc].begin(), docs[doc].end(), term));
    if (tf == 0.0) continue;
    const double idf =
        std::log(1.0 + (n - static_cast<double>(df) + 0.5) / (static_cast<double>(df) + 0.5));
    const double ratio = avgdl > 0.0 ? static_cast<double>(docs[doc].size()) / avgdl : 0.0;
    score += idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * ratio));
  }
  return score;
}

void criterion_bm25_oracle() {
  const std::vector<Passage> passages{
      {"d00", "the volcano erupted with molten lava"},
      {"d01", "lava cools into volcanic rock"},
      {"d02", "rivers carry sediment to the sea"},
      {"d03", "the sea stores most of the planet heat"},
      {"d04", "glaciers carve deep valleys over millennia"},
      {"d05", "volcanic ash enriches the soil"},
      {"d06", "sediment settles where the current slows"},
      {"d07", "heat from the core drives plate motion"},
      {"d08", "deep ocean vents host strange life"},
      {"d09", "rock layers record the history of the planet"},
  };
  std::vector<std::vector<std::string>> docs;
  for (const Passage& p : passages) docs.push_back(tokenize(p.text));
  const InvertedIndex index = InvertedIndex::build(passages);

  const std::vector<std::string> queries{"volcano lava", "the sediment current",
                                         "heat of the planet", "deep rock history", "lava"};
  for (const std::string& query_text : queries) {
    const std::vector<std::string> query = tokenize(query_text);
    std::vector<SearchHit> expected;
    for (std::size_t d = 0; d < docs.size(); ++d) {
      const double score = oracle_bm25(docs, query, d);
      if (score > 0.0) expected.push_back({passages[d].doc_id, score});
    }
    std::sort(expected.begin(), expected.end(), [](const SearchHit& a, const SearchHit& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.doc_id < b.doc_id;
    });
    const std::vector<SearchHit> got = index.search(query_text, 10);
    CHECK(got.size() == expected.size(), "result count differs from oracle for '" + query_text + "'");
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].doc_id == expected[i].doc_id, "ranking differs at " + std::to_string(i));
      CHECK(std::abs(got[i].score - expected[i].score) <= 1e-6, "score off oracle by > 1e-6");
    }
  }

  // worked two-document example
  const InvertedIndex tiny =
      InvertedIndex::build(std::vector<Passage>{{"d1", "cat sat"}, {"d2", "dog ran far"}});
  const double score = tiny.bm25_score(std::vector<std::string>{"cat"}, "d1");
  CHECK(std::abs(score - 0.7549) <= 1e-4, "worked example is not ~0.7549");
  CHECK(std::abs(score - oracle_bm25({{"cat", "sat"}, {"dog", "ran", "far"}}, {"cat"}, 0)) <= 1e-6,
        "worked example off the oracle");
}

// ---------------------------------------------------------------------------
// Criterion 2 — MTLD hand-traced values.

void criterion_mtld_oracle() {
  CHECK(mtld(std::vector<std::string>(10, "a")) == 2.0, "ten identical tokens must give exactly 2.0");
  const std::vector<std::string> blocks{"a", "b", "c", "d", "e", "a", "b", "c", "d", "e"};
  CHECK(mtld(blocks) == 10.0, "a b c d e a b c d e must give exactly 10.0");
  bool degenerate = false;
  try {
    mtld(std::vector<std::string>{"a", "b", "c", "d", "e", "f"});
  } catch (const MetricError& e) {
    degenerate = e.kind() == MetricError::Kind::DegenerateText;
  }
  CHECK(degenerate, "all-distinct input must raise DegenerateText");
}

// ---------------------------------------------------------------------------
// Criterion 3 — analytic HD-D vs Monte-Carlo sample TTR.

void criterion_hdd_monte_carlo() {
  CHECK(std::abs(hdd(std::vector<std::string>(42, "a")) - 1.0 / 42.0) < 1e-12,
        "42 identical tokens must give 1/42");
  std::vector<std::string> all_distinct;
  for (int i = 0; i < 42; ++i) all_distinct.push_back("t" + std::to_string(i));
  CHECK(std::abs(hdd(all_distinct) - 1.0) < 1e-9, "42 distinct tokens must give 1.0");

  std::mt19937_64 rng(2024);
  for (int profile = 0; profile < 20; ++profile) {
    std::uniform_int_distribution<std::size_t> size_dist(42, 200);
    std::uniform_int_distribution<int> vocab_dist(2, 40);
    const std::size_t n = size_dist(rng);
    const int vocab = vocab_dist(rng);
    std::uniform_int_distribution<int> word(0, vocab - 1);
    std::vector<std::string> tokens;
    tokens.reserve(n);
    for (std::size_t i = 0; i < n; ++i) tokens.push_back("v" + std::to_string(word(rng)));

    const double analytic = hdd(tokens);

    std::vector<std::size_t> indices(n);
    for (std::size_t i = 0; i < n; ++i) indices[i] = i;
    double total = 0.0;
    for (int sample = 0; sample < 5000; ++sample) {
      for (std::size_t i = 0; i < 42; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(indices[i], indices[pick(rng)]);
      }
      std::unordered_set<std::string_view> types;
      for (std::size_t i = 0; i < 42; ++i) types.insert(std::string_view(tokens[indices[i]]));
      total += static_cast<double>(types.size()) / 42.0;
    }
    const double mc = total / 5000.0;
    CHECK(std::abs(analytic - mc) <= 0.01,
          "profile " + std::to_string(profile) + ": |analytic - MC| = " +
              std::to_string(std::abs(analytic - mc)));
  }
}

// ---------------------------------------------------------------------------
// Criterion 4 — MTLD stability under length doubling on Zipf streams.

std::vector<std::string> zipf_stream(std::size_t n, std::size_t vocab, double exponent,
                                     std::uint64_t seed) {
  std::vector<double> cdf(vocab);
  double total = 0.0;
  for (std::size_t r = 0; r < vocab; ++r) {
    total += 1.0 / std::pow(static_cast<double>(r + 1), exponent);
    cdf[r] = total;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, total);
  std::vector<std::string> tokens;
  tokens.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), uniform(rng));
    tokens.push_back("z" + std::to_string(it - cdf.begin()));
  }
  return tokens;
}

void criterion_mtld_length_stability() {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::vector<std::string> stream = zipf_stream(2000, 200, 1.2, seed);
    const std::vector<std::string> half(stream.begin(), stream.begin() + 1000);
    const double m_half = mtld(half);
    const double m_full = mtld(stream);
    const double rel = std::abs(m_full - m_half) / m_half;
    CHECK(rel < 0.15, "seed " + std::to_string(seed) + ": relative change " + std::to_string(rel));
  }
}

// ---------------------------------------------------------------------------
// Criterion 5 — 125 interactions, 5 new turns each, metrics scoped to
// generated utterances only.

InteractionConfig mock_s1_config(int budget, std::uint64_t seed) {
  InteractionConfig cfg;
  cfg.style = RenderStyle(SimStyle::S1);
  cfg.turn_budget = budget;
  cfg.simulator = std::make_shared<FunctionCompletionBackend>([](const CompletionRequest& req) {
    return detail::hash_words(req.prompt, 7);
  });
  cfg.assistant = std::make_shared<FunctionCompletionBackend>([](const CompletionRequest& req) {
    return detail::hash_words("assistant" + req.prompt, 9);
  });
  cfg.seed = seed;
  return cfg;
}

void criterion_measurement_protocol() {
  std::vector<Trigger> triggers;
  for (int i = 0; i < 125; ++i)
    triggers.push_back(Trigger::from_history(
        {human("historysentineltoken question " + std::to_string(i)),
         assistant("historysentineltoken answer " + std::to_string(i))}));

  const BatchOutcome outcome = run_batch(triggers, mock_s1_config(5, 9), 4, nullptr);
  CHECK(outcome.conversations.size() == 125, "expected 125 conversations");
  CHECK(outcome.failures.empty(), "no conversation may fail");

  std::size_t expected_generated_tokens = 0;
  for (const Conversation& conv : outcome.conversations) {
    CHECK(conv.turns.size() == 7, "each conversation must hold 2 history + 5 new turns");
    Speaker expected_speaker = Speaker::Human;  // history ends with the assistant
    for (std::size_t i = 2; i < conv.turns.size(); ++i) {
      CHECK(conv.turns[i].speaker == expected_speaker, "generated turns must alternate");
      CHECK(conv.turns[i].provenance != Provenance::Corpus, "generated turns carry provenance");
      expected_generated_tokens += tokenize(conv.turns[i].text).size();
      expected_speaker = opposite(expected_speaker);
    }
  }

  const std::vector<std::pair<std::string, std::vector<Conversation>>> groups{
      {"S1", outcome.conversations}};
  const DiversityReport generated = diversity_report(groups, {}, MetricScope::GeneratedOnly);
  CHECK(generated.rows[0].tokens == expected_generated_tokens,
        "generated scope must count generated tokens only");
  const std::vector<std::string> scoped =
      scoped_tokens(outcome.conversations, MetricScope::GeneratedOnly);
  for (const std::string& token : scoped)
    CHECK(token != "historysentineltoken", "history tokens leaked into the generated scope");
  // each history turn tokenizes to 3 tokens, two history turns per conversation
  const DiversityReport all = diversity_report(groups, {}, MetricScope::All);
  CHECK(all.rows[0].tokens == expected_generated_tokens + 125 * 6,
        "full scope must add exactly the history tokens");
  CHECK(generated.rows[0].mtld.has_value() && generated.rows[0].hdd.has_value(),
        "metrics must be computable on the generated stream");
}

// ---------------------------------------------------------------------------
// Criterion 6 — pair-export laws.

void criterion_pair_export_laws() {
  // history-seeded budget-5 batch
  std::vector<Trigger> triggers;
  for (int i = 0; i < 20; ++i)
    triggers.push_back(Trigger::from_history(
        {human("q " + std::to_string(i)), assistant("a " + std::to_string(i))}));
  const BatchOutcome five = run_batch(triggers, mock_s1_config(5, 1), 2, nullptr);
  for (const Conversation& conv : five.conversations) {
    std::size_t humans = 0;
    std::size_t assistants = 0;
    for (const Turn& t : conv.turns) (t.speaker == Speaker::Human ? humans : assistants)++;
    CHECK(extract_simulator_pairs(conv, RenderStyle(SimStyle::S1)).size() == humans,
          "simulator pairs must equal human turns");
    CHECK(extract_assistant_pairs(conv).size() == assistants,
          "assistant pairs must equal assistant turns");
  }

  // summary-seeded budget-10 batch: ten turns = 5 pairs per conversation
  InteractionConfig cfg = mock_s1_config(10, 2);
  cfg.style = RenderStyle(SimStyle::SCTRL);
  std::vector<Trigger> summaries;
  for (int i = 0; i < 10; ++i)
    summaries.push_back(Trigger::from_summary("topic number " + std::to_string(i)));
  const BatchOutcome ten = run_batch(summaries, cfg, 2, nullptr);
  CHECK(ten.conversations.size() == 10, "expected 10 conversations");
  for (const Conversation& conv : ten.conversations) {
    CHECK(conv.turns.size() == 10, "budget 10 must yield ten turns");
    CHECK(extract_assistant_pairs(conv).size() == 5, "ten turns must yield exactly 5 pairs");
  }
}

// ---------------------------------------------------------------------------
// Criterion 7 — retrieval-injection law in an SRAG run.

std::vector<Passage> topical_passages() {
  const char* topics[] = {"volcano", "river",  "glacier", "coral",  "desert", "forest",
                          "tundra",  "island", "canyon",  "geyser", "swamp",  "prairie"};
  std::vector<Passage> passages;
  int id = 0;
  for (const char* topic : topics) {
    passages.push_back({"p" + std::to_string(id++),
                        std::string("the ") + topic + " region shows " + topic +
                            " formations and the wider study of " + topic + " systems"});
  }
  return passages;
}

void criterion_retrieval_injection() {
  const std::vector<Passage> passages = topical_passages();
  const InvertedIndex index = InvertedIndex::build(passages);

  InteractionConfig cfg;
  cfg.style = RenderStyle(SimStyle::SRAG);
  cfg.turn_budget = 5;
  cfg.retriever = top1_retriever(index);
  cfg.seed = 3;
  cfg.simulator = std::make_shared<FunctionCompletionBackend>([](const CompletionRequest& req) {
    return detail::passage_words(req.prompt, 6);
  });
  // assistant drifts through topics so that queries vary
  cfg.assistant = std::make_shared<FunctionCompletionBackend>([](const CompletionRequest& req) {
    const char* topics[] = {"river", "glacier", "coral", "desert", "forest"};
    return std::string("tell me about the ") + topics[req.prompt.size() % 5] + " one";
  });

  std::vector<Trigger> triggers;
  for (int i = 0; i < 10; ++i)
    triggers.push_back(Trigger::from_history(
        {human("opener"), assistant("the volcano region is fascinating " + std::to_string(i))}));

  AuditLog audit;
  const BatchOutcome outcome = run_batch(triggers, cfg, 1, &audit);
  CHECK(outcome.failures.empty(), "SRAG batch must succeed");

  // reconstruct the expected queries per conversation and walk the audit log
  std::map<std::string, std::vector<std::string>> expected_queries;
  std::map<std::string, std::size_t> generated_humans;
  for (const Conversation& conv : outcome.conversations) {
    std::string rolling;  // most recent assistant response so far
    for (const Turn& turn : conv.turns) {
      if (turn.provenance == Provenance::SimulatorGenerated) {
        ++generated_humans[conv.id];
        expected_queries[conv.id].push_back(rolling);
      }
      if (turn.speaker == Speaker::Assistant) rolling = turn.text;
    }
  }

  std::map<std::string, std::size_t> retrievals_seen;
  for (const auto& event : audit.events()) {
    if (event.at("event") != "retrieval") continue;
    const std::string conv_id = event.at("conversation").get<std::string>();
    const std::size_t k = retrievals_seen[conv_id]++;
    CHECK(k < expected_queries[conv_id].size(), "more retrievals than simulator turns");
    CHECK(event.at("query").get<std::string>() == expected_queries[conv_id][k],
          "query must equal the previous assistant response verbatim");
    CHECK(!event.at("doc_id").is_null(), "every retrieval must land on a passage");
  }
  for (const auto& [conv_id, count] : generated_humans)
    CHECK(retrievals_seen[conv_id] == count,
          "one retrieval per generated human turn in " + conv_id);

  // every simulator prompt carries the top-1 passage block right before the cue
  std::map<std::string, std::size_t> prompt_index;
  for (const auto& event : audit.events()) {
    if (event.at("event") != "completion" || event.at("role") != "simulator") continue;
    const std::string conv_id = event.at("conversation").get<std::string>();
    const std::string prompt = event.at("prompt").get<std::string>();
    const std::string query = expected_queries[conv_id][prompt_index[conv_id]++];
    const std::vector<SearchHit> hits = index.search(query, 1);
    CHECK(!hits.empty(), "top-1 retrieval must hit");
    const std::string block = "Passage: " + index.passage(hits[0].doc_id).text + "\nHuman:";
    CHECK(prompt.ends_with(block), "prompt must end with the top-1 passage block before the cue");
  }
}

// ---------------------------------------------------------------------------
// Criterion 8 — order-reversal debiasing.

void criterion_debiasing() {
  std::vector<std::pair<Conversation, Conversation>> pairs;
  for (int i = 0; i < 20; ++i) {
    Conversation left;
    left.id = "L" + std::to_string(i);
    left.turns = {human("q"), assistant("left answer " + std::to_string(i))};
    Conversation right;
    right.id = "R" + std::to_string(i);
    right.turns = {human("q"), assistant("right answer " + std::to_string(i))};
    pairs.emplace_back(std::move(left), std::move(right));
  }

  FunctionJudgeBackend position_biased(
      [](const std::string&, const std::string&, const std::string&) { return "9 3"; });
  EvalOptions options;
  options.both_orders = true;
  const EvalRun judged = judge_eval(pairs, position_biased, options);
  CHECK(judged.as_given.wins == 20 && judged.as_given.losses == 0, "as-given must be 100% wins");
  CHECK(judged.reversed.losses == 20 && judged.reversed.wins == 0, "reversed must be 100% losses");
  CHECK(judged.debiased.ties == 20, "debiased combination must be 100% ties");

  // antisymmetric preference model: p for the left content, 1-p swapped
  FunctionPreferenceBackend antisymmetric(
      [](const std::string&, const std::string& a, const std::string&) {
        return a.find("left") != std::string::npos ? 0.8 : 0.2;
      });
  std::vector<ResponsePair> items;
  for (int i = 0; i < 20; ++i)
    items.push_back({"Human: q\n\nAssistant:", "left answer", "right answer",
                     "L" + std::to_string(i), "R" + std::to_string(i)});
  const EvalRun forward = preference_eval(items, antisymmetric, options);
  CHECK(forward.as_given.wins == 20 && forward.reversed.wins == 20 && forward.debiased.wins == 20,
        "antisymmetric model must win in both orders and debiased");

  std::vector<ResponsePair> swapped;
  for (const ResponsePair& item : items)
    swapped.push_back({item.context, item.right_response, item.left_response, item.right_id,
                       item.left_id});
  const EvalRun backward = preference_eval(swapped, antisymmetric, options);
  CHECK(backward.debiased.losses == 20,
        "relabeling the sides must mirror the debiased outcome exactly");
}

// ---------------------------------------------------------------------------
// Criterion 9 — byte-identical artifacts across repeated pipeline runs.

void criterion_determinism() {
  const std::string dir = fresh_dir("determinism");
  {
    std::ofstream corpus(dir + "/corpus.jsonl", std::ios::binary);
    for (int i = 0; i < 6; ++i)
      corpus << R"({"id":"c)" << i
             << R"(","turns":[{"speaker":"human","text":"question )" << i
             << R"( about the volcano"},{"speaker":"assistant","text":"the volcano region answer )"
             << i << R"("}]})"
             << "\n";
    std::ofstream passages(dir + "/passages.jsonl", std::ios::binary);
    for (const Passage& p : topical_passages())
      passages << Json{{"doc_id", p.doc_id}, {"text", p.text}}.dump() << "\n";
  }

  Json config;
  config["seed"] = 77;
  config["out_dir"] = dir + "/out";
  config["style"] = "SRAG";
  config["turn_budget"] = 4;
  config["concurrency"] = 3;
  config["run_label"] = "det";
  config["paths"] = {{"conversations", dir + "/corpus.jsonl"},
                     {"passages", dir + "/passages.jsonl"},
                     {"triggers", dir + "/corpus.jsonl"},
                     {"eval_left", dir + "/out/simulated.jsonl"},
                     {"eval_right", dir + "/out/simulated.jsonl"}};
  config["backends"] = {{"simulator", "mock:passage-words:6"},
                        {"assistant", "mock:hash-words:5"},
                        {"judge", "mock:judge:length"},
                        {"reward", "mock:score:length"},
                        {"preference", "mock:prefer:longer"}};
  config["eval"] = {{"modes", {"judge", "score", "prefer"}}, {"both_orders", true}};
  const PipelineConfig cfg = PipelineConfig::from_json(config);
  const std::set<Stage> stages{Stage::Index, Stage::Format, Stage::Simulate,
                               Stage::Export, Stage::Metrics, Stage::Evaluate};

  const std::vector<std::string> artifacts{
      cfg.paths.index,           cfg.paths.simulator_pairs,
      cfg.paths.simulated,       cfg.paths.assistant_pairs,
      cfg.paths.metrics_csv,     cfg.paths.audit,
      cfg.paths.manifest,        cfg.paths.eval_dir + "/judge_records.jsonl",
      cfg.paths.eval_dir + "/score_records.jsonl",
      cfg.paths.eval_dir + "/prefer_records.jsonl",
      cfg.paths.eval_dir + "/report.csv"};

  run_pipeline(cfg, stages);
  std::map<std::string, std::string> first;
  for (const std::string& path : artifacts) {
    CHECK(fs::exists(path), "missing artifact " + path);
    first[path] = read_file(path);
  }
  run_pipeline(cfg, stages);  // identical config, seed, and mocks
  for (const std::string& path : artifacts)
    CHECK(read_file(path) == first[path], "artifact differs across runs: " + path);
}

// ---------------------------------------------------------------------------
// Criterion 10 — the measurement separates a retrieval-conditioned simulator
// from a constant-vocabulary one, in the reported direction.

std::vector<Passage> rich_passages() {
  return {
      {"p0", "the volcano region features craters basalt magma calderas and steaming fumaroles"},
      {"p1", "the river region features meanders silt deltas floodplains and braided channels"},
      {"p2", "the glacier region features moraines crevasses icefalls seracs and frozen cirques"},
      {"p3", "the coral region features polyps atolls lagoons reefs and calcified colonies"},
      {"p4", "the desert region features dunes playas mesas arroyos and shifting sands"},
      {"p5", "the forest region features canopies lichens ferns understory and tangled roots"},
      {"p6", "the tundra region features permafrost sedges lemmings hummocks and arctic mosses"},
      {"p7", "the island region features archipelagos shoals breakers headlands and tidal pools"},
      {"p8", "the canyon region features strata buttes rapids talus and carved escarpments"},
      {"p9", "the geyser region features springs travertine eruptions basins and boiling pools"},
      {"p10", "the swamp region features mangroves peat tannins cypress and drifting algae"},
      {"p11", "the prairie region features grasses bison wildflowers loess and rolling swales"},
  };
}

void criterion_directional_sanity() {
  const std::vector<Passage> passages = rich_passages();
  const InvertedIndex index = InvertedIndex::build(passages);
  static const char* topics[] = {"volcano", "river",  "glacier", "coral",  "desert", "forest",
                                 "tundra",  "island", "canyon",  "geyser", "swamp",  "prairie"};

  auto run_with_simulator = [&](std::shared_ptr<CompletionBackend> simulator) {
    InteractionConfig cfg;
    cfg.style = RenderStyle(SimStyle::SRAG);
    cfg.turn_budget = 5;
    cfg.retriever = top1_retriever(index);
    cfg.seed = 5;
    cfg.simulator = std::move(simulator);
    // the assistant drifts across topics so retrieval keeps moving
    cfg.assistant = std::make_shared<FunctionCompletionBackend>([](const CompletionRequest& req) {
      return std::string("tell me about the ") + topics[detail::fnv_hash(req.prompt) % 12] +
             " region";
    });
    std::vector<Trigger> triggers;
    for (int i = 0; i < 10; ++i)
      triggers.push_back(Trigger::from_history(
          {human("hello there"),
           assistant(std::string("let us discuss the ") + topics[i % 12] + " region")}));
    const BatchOutcome outcome = run_batch(triggers, cfg, 1, nullptr);
    CHECK(outcome.failures.empty(), "mock run must not fail");
    const DiversityReport report = diversity_report({{"run", outcome.conversations}}, {},
                                                    MetricScope::GeneratedOnly);
    CHECK(report.rows[0].mtld.has_value() && report.rows[0].hdd.has_value(),
          "metrics must be defined for the run");
    return std::make_pair(*report.rows[0].mtld, *report.rows[0].hdd);
  };

  // copies tokens out of the retrieved passage
  auto retrieval_conditioned = std::make_shared<FunctionCompletionBackend>(
      [](const CompletionRequest& req) { return detail::passage_words(req.prompt, 8); });
  // fixed vocabulary, every turn alike
  auto constant_vocabulary = std::make_shared<FunctionCompletionBackend>(
      [](const CompletionRequest&) { return std::string("please say the same thing again"); });

  const auto [mtld_rag, hdd_rag] = run_with_simulator(retrieval_conditioned);
  const auto [mtld_flat, hdd_flat] = run_with_simulator(constant_vocabulary);

  CHECK(mtld_rag > mtld_flat, "retrieval-conditioned simulator must score higher MTLD (" +
                                  std::to_string(mtld_rag) + " vs " + std::to_string(mtld_flat) +
                                  ")");
  CHECK(hdd_rag > hdd_flat, "retrieval-conditioned simulator must score higher HD-D (" +
                                std::to_string(hdd_rag) + " vs " + std::to_string(hdd_flat) + ")");
}

}  // namespace

int main() {
  criterion(1, "BM25 search matches the independent scalar oracle to 1e-6", 1.0,
            criterion_bm25_oracle);
  criterion(2, "MTLD reproduces hand-traced values exactly", 1.0, criterion_mtld_oracle);
  criterion(3, "analytic HD-D within 0.01 of Monte-Carlo sample TTR (20 profiles)", 30.0,
            criterion_hdd_monte_carlo);
  criterion(4, "MTLD stable under length doubling on Zipf streams (10 seeds)", 0.0,
            criterion_mtld_length_stability);
  criterion(5, "125 interactions x 5 new turns, metrics scoped to generated text", 60.0,
            criterion_measurement_protocol);
  criterion(6, "pair-export laws: pairs per turn counts, 5 pairs from budget 10", 0.0,
            criterion_pair_export_laws);
  criterion(7, "SRAG injects top-1 passage per simulator turn, query = last assistant reply", 0.0,
            criterion_retrieval_injection);
  criterion(8, "order-reversal debiasing neutralizes position bias", 0.0, criterion_debiasing);
  criterion(9, "repeated pipeline runs produce byte-identical artifacts", 0.0,
            criterion_determinism);
  criterion(10, "pipeline separates knowledge-augmented from constant simulators", 60.0,
            criterion_directional_sanity);

  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all acceptance criteria passed\n");
  return 0;
}
