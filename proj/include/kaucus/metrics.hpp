#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kaucus/core.hpp"
#include "kaucus/errors.hpp"
#include "kaucus/tokenize.hpp"

namespace kaucus {

struct MetricConfig {
  double mtld_threshold = 0.72;
  std::size_t hdd_sample_size = 42;
  std::size_t min_token_warning = 50;
};

inline void validate_metric_config(const MetricConfig& cfg) {
  if (!(cfg.mtld_threshold > 0.0 && cfg.mtld_threshold < 1.0))
    throw ConfigError("mtld_threshold must lie in (0, 1)");
  if (cfg.hdd_sample_size < 1) throw ConfigError("hdd_sample_size must be >= 1");
}

struct TtrFamily {
  double ttr = 0.0;
  double root_ttr = 0.0;
  double log_ttr = 0.0;
};

// ttr = V/N, root_ttr = V/sqrt(N), log_ttr = ln V / ln N.
inline TtrFamily ttr_family(std::span<const std::string> tokens) {
  if (tokens.empty()) throw MetricError(MetricError::Kind::EmptyText, "ttr_family: no tokens");
  if (tokens.size() == 1)
    throw MetricError(MetricError::Kind::LogUndefined, "log_ttr is undefined for a single token");
  std::unordered_set<std::string_view> types(tokens.begin(), tokens.end());
  const double v = static_cast<double>(types.size());
  const double n = static_cast<double>(tokens.size());
  return {v / n, v / std::sqrt(n), std::log(v) / std::log(n)};
}

namespace detail {

// One directional MTLD pass: count full factors each time the running TTR
// sinks to the threshold, plus a partial factor for the remainder.
template <class It>
double mtld_factors(It first, It last, double threshold) {
  double factors = 0.0;
  std::unordered_set<std::string_view> types;
  std::size_t count = 0;
  for (It it = first; it != last; ++it) {
    ++count;
    types.insert(std::string_view(*it));
    const double ttr = static_cast<double>(types.size()) / static_cast<double>(count);
    if (ttr <= threshold) {
      factors += 1.0;
      types.clear();
      count = 0;
    }
  }
  if (count > 0) {
    const double remainder_ttr = static_cast<double>(types.size()) / static_cast<double>(count);
    factors += (1.0 - remainder_ttr) / (1.0 - threshold);
  }
  return factors;
}

}  // namespace detail

// Bidirectional MTLD: mean of N/factors over the forward and reversed stream.
inline double mtld(std::span<const std::string> tokens, const MetricConfig& cfg = {}) {
  validate_metric_config(cfg);
  if (tokens.empty()) throw MetricError(MetricError::Kind::EmptyText, "mtld: no tokens");
  const double n = static_cast<double>(tokens.size());
  const double forward = detail::mtld_factors(tokens.begin(), tokens.end(), cfg.mtld_threshold);
  const double backward = detail::mtld_factors(tokens.rbegin(), tokens.rend(), cfg.mtld_threshold);
  if (forward == 0.0 || backward == 0.0)
    throw MetricError(MetricError::Kind::DegenerateText,
                      "mtld: running TTR never reaches the threshold");
  return 0.5 * (n / forward + n / backward);
}

// HD-D: the expected TTR of a random sample of `hdd_sample_size` tokens drawn
// without replacement — sum over types of (1/s) * (1 - P[type absent from the
// sample]), with the absence probability hypergeometric.
inline double hdd(std::span<const std::string> tokens, const MetricConfig& cfg = {}) {
  validate_metric_config(cfg);
  if (tokens.empty()) throw MetricError(MetricError::Kind::EmptyText, "hdd: no tokens");
  const std::size_t n = tokens.size();
  const std::size_t s = cfg.hdd_sample_size;
  if (n < s)
    throw MetricError(MetricError::Kind::TextTooShort,
                      "hdd: " + std::to_string(n) + " tokens < sample size " + std::to_string(s));
  std::unordered_map<std::string_view, std::size_t> freq;
  for (const std::string& t : tokens) ++freq[std::string_view(t)];
  auto log_choose = [](double m, double k) {
    return std::lgamma(m + 1.0) - std::lgamma(k + 1.0) - std::lgamma(m - k + 1.0);
  };
  double sum = 0.0;
  for (const auto& [_, f] : freq) {
    double p_absent = 0.0;
    if (n - f >= s)
      p_absent = std::exp(log_choose(static_cast<double>(n - f), static_cast<double>(s)) -
                          log_choose(static_cast<double>(n), static_cast<double>(s)));
    sum += (1.0 - p_absent) / static_cast<double>(s);
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Report over conversation groups.

enum class MetricScope { GeneratedOnly, All };

inline std::optional<MetricScope> parse_metric_scope(std::string_view name) {
  if (name == "generated") return MetricScope::GeneratedOnly;
  if (name == "all") return MetricScope::All;
  return std::nullopt;
}

struct GroupMetrics {
  std::string group;
  std::size_t conversations = 0;
  std::size_t tokens = 0;
  std::optional<double> mtld;
  std::optional<double> root_ttr;
  std::optional<double> log_ttr;
  std::optional<double> hdd;
  std::optional<double> ttr;
  std::vector<std::string> warnings;
};

struct DiversityReport {
  std::vector<GroupMetrics> rows;
  MetricConfig config;
  MetricScope scope = MetricScope::GeneratedOnly;
};

inline std::vector<std::string> scoped_tokens(std::span<const Conversation> conversations,
                                              MetricScope scope) {
  std::vector<std::string> tokens;
  for (const Conversation& conv : conversations) {
    for (const Turn& turn : conv.turns) {
      if (scope == MetricScope::GeneratedOnly && turn.provenance == Provenance::Corpus) continue;
      std::vector<std::string> t = tokenize(turn.text);
      tokens.insert(tokens.end(), std::make_move_iterator(t.begin()),
                    std::make_move_iterator(t.end()));
    }
  }
  return tokens;
}

// Metric failures flag the group instead of aborting the others; no value is
// ever fabricated for a group that cannot support a metric.
inline DiversityReport diversity_report(
    const std::vector<std::pair<std::string, std::vector<Conversation>>>& groups,
    const MetricConfig& cfg = {}, MetricScope scope = MetricScope::GeneratedOnly) {
  validate_metric_config(cfg);
  if (groups.empty()) throw Error("diversity_report: no conversations");
  DiversityReport report;
  report.config = cfg;
  report.scope = scope;
  for (const auto& [name, conversations] : groups) {
    GroupMetrics row;
    row.group = name;
    row.conversations = conversations.size();
    const std::vector<std::string> tokens = scoped_tokens(conversations, scope);
    row.tokens = tokens.size();
    if (tokens.empty()) {
      row.warnings.push_back("no tokens in scope");
      report.rows.push_back(std::move(row));
      continue;
    }
    if (tokens.size() < cfg.min_token_warning)
      row.warnings.push_back("fewer than " + std::to_string(cfg.min_token_warning) + " tokens");
    try {
      const TtrFamily t = ttr_family(tokens);
      row.ttr = t.ttr;
      row.root_ttr = t.root_ttr;
      row.log_ttr = t.log_ttr;
    } catch (const MetricError& e) {
      row.warnings.push_back(std::string("ttr: ") + e.what());
    }
    try {
      row.mtld = mtld(tokens, cfg);
    } catch (const MetricError& e) {
      row.warnings.push_back(std::string("mtld: ") + e.what());
    }
    try {
      row.hdd = hdd(tokens, cfg);
    } catch (const MetricError& e) {
      row.warnings.push_back(std::string("hdd: ") + e.what());
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

namespace detail {

inline std::string format_metric(const std::optional<double>& v) {
  if (!v) return {};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace detail

inline void write_diversity_csv(const DiversityReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "group,conversations,tokens,MTLD,RootTTR,LogTTR,HDD,TTR,warnings\n";
  for (const GroupMetrics& row : report.rows) {
    std::string warnings;
    for (const std::string& w : row.warnings) {
      if (!warnings.empty()) warnings += "; ";
      warnings += w;
    }
    out << detail::csv_escape(row.group) << ',' << row.conversations << ',' << row.tokens << ','
        << detail::format_metric(row.mtld) << ',' << detail::format_metric(row.root_ttr) << ','
        << detail::format_metric(row.log_ttr) << ',' << detail::format_metric(row.hdd) << ','
        << detail::format_metric(row.ttr) << ',' << detail::csv_escape(warnings) << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline nlohmann::json diversity_report_json(const DiversityReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const GroupMetrics& row : report.rows) {
    nlohmann::json j{{"group", row.group},
                     {"conversations", row.conversations},
                     {"tokens", row.tokens},
                     {"warnings", row.warnings}};
    if (row.mtld) j["MTLD"] = *row.mtld;
    if (row.root_ttr) j["RootTTR"] = *row.root_ttr;
    if (row.log_ttr) j["LogTTR"] = *row.log_ttr;
    if (row.hdd) j["HDD"] = *row.hdd;
    if (row.ttr) j["TTR"] = *row.ttr;
    rows.push_back(std::move(j));
  }
  return nlohmann::json{{"scope", report.scope == MetricScope::GeneratedOnly ? "generated" : "all"},
                        {"rows", std::move(rows)}};
}

}  // namespace kaucus
