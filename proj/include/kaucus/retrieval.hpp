#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kaucus/core.hpp"
#include "kaucus/errors.hpp"
#include "kaucus/tokenize.hpp"

namespace kaucus {

struct Bm25Params {
  double k1 = 1.2;  // term-frequency saturation
  double b = 0.75;  // document-length normalization
};

struct SearchHit {
  std::string doc_id;
  double score = 0.0;

  bool operator==(const SearchHit&) const = default;
};

namespace detail {

// Little-endian binary writer/reader with an FNV-1a checksum over the stream.

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t hash = kFnvOffset) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= kFnvPrime;
  }
  return hash;
}

struct ByteWriter {
  std::string buffer;

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buffer.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buffer.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u64(s.size());
    buffer.append(s);
  }
};

struct ByteReader {
  std::string_view bytes;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > bytes.size())
      throw RetrievalError(RetrievalError::Kind::Corruption, "index file truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s(bytes.substr(pos, n));
    pos += n;
    return s;
  }
};

}  // namespace detail

// Inverted index over a passage collection with BM25 scoring. Immutable after
// build; concurrent searches are safe.
class InvertedIndex {
 public:
  struct Posting {
    std::uint32_t doc = 0;  // ordinal into the document table
    std::uint32_t tf = 0;
  };

  static InvertedIndex build(std::span<const Passage> passages, Bm25Params params = {}) {
    if (params.k1 < 0.0)
      throw RetrievalError(RetrievalError::Kind::BadArgument, "k1 must be >= 0");
    if (params.b < 0.0 || params.b > 1.0)
      throw RetrievalError(RetrievalError::Kind::BadArgument, "b must be in [0, 1]");
    InvertedIndex index;
    index.params_ = params;
    std::uint64_t total_tokens = 0;
    for (const Passage& passage : passages) {
      if (index.ordinals_.contains(passage.doc_id))
        throw RetrievalError(RetrievalError::Kind::DuplicateDocId,
                             "duplicate doc_id '" + passage.doc_id + "'");
      const auto ordinal = static_cast<std::uint32_t>(index.docs_.size());
      index.ordinals_.emplace(passage.doc_id, ordinal);
      const std::vector<std::string> tokens = tokenize(passage.text);
      total_tokens += tokens.size();
      std::unordered_map<std::string, std::uint32_t> tf;
      for (const std::string& t : tokens) ++tf[t];
      for (auto& [term, count] : tf) index.postings_[term].push_back({ordinal, count});
      index.docs_.push_back({passage.doc_id, passage.text, static_cast<std::uint32_t>(tokens.size())});
    }
    index.avgdl_ = index.docs_.empty()
                       ? 0.0
                       : static_cast<double>(total_tokens) / static_cast<double>(index.docs_.size());
    index.sort_postings();
    return index;
  }

  std::size_t doc_count() const { return docs_.size(); }
  double avgdl() const { return avgdl_; }
  const Bm25Params& params() const { return params_; }
  std::size_t term_count() const { return postings_.size(); }

  bool contains(const std::string& doc_id) const { return ordinals_.contains(doc_id); }

  Passage passage(const std::string& doc_id) const {
    auto it = ordinals_.find(doc_id);
    if (it == ordinals_.end())
      throw RetrievalError(RetrievalError::Kind::UnknownDocId, "unknown doc_id '" + doc_id + "'");
    return {docs_[it->second].id, docs_[it->second].text};
  }

  // Sum over query-token instances of idf(t) * tf*(k1+1) / (tf + k1*(1 - b + b*len/avgdl)).
  // A duplicated query token therefore counts twice.
  double bm25_score(std::span<const std::string> query_tokens, const std::string& doc_id) const {
    auto it = ordinals_.find(doc_id);
    if (it == ordinals_.end())
      throw RetrievalError(RetrievalError::Kind::UnknownDocId, "unknown doc_id '" + doc_id + "'");
    const std::uint32_t ordinal = it->second;
    double score = 0.0;
    for (const std::string& term : query_tokens) {
      auto post = postings_.find(term);
      if (post == postings_.end()) continue;
      for (const Posting& p : post->second) {
        if (p.doc == ordinal) {
          score += term_score(p.tf, docs_[ordinal].length, post->second.size());
          break;
        }
      }
    }
    return score;
  }

  // Documents with positive score, by descending score then ascending doc_id,
  // truncated to k.
  std::vector<SearchHit> search(const std::string& query_text, std::size_t k) const {
    if (k == 0) throw RetrievalError(RetrievalError::Kind::BadArgument, "k must be >= 1");
    const std::vector<std::string> tokens = tokenize(query_text);
    std::unordered_map<std::uint32_t, double> accumulator;
    for (const std::string& term : tokens) {
      auto post = postings_.find(term);
      if (post == postings_.end()) continue;
      const std::size_t df = post->second.size();
      for (const Posting& p : post->second)
        accumulator[p.doc] += term_score(p.tf, docs_[p.doc].length, df);
    }
    std::vector<SearchHit> hits;
    hits.reserve(accumulator.size());
    for (const auto& [doc, score] : accumulator)
      if (score > 0.0) hits.push_back({docs_[doc].id, score});
    std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.doc_id < b.doc_id;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
  }

  void save(const std::string& path) const {
    detail::ByteWriter w;
    w.buffer.append(kMagic);
    w.u32(kVersion);
    w.f64(params_.k1);
    w.f64(params_.b);
    w.u64(docs_.size());
    w.f64(avgdl_);
    for (const Doc& doc : docs_) {
      w.str(doc.id);
      w.str(doc.text);
      w.u32(doc.length);
    }
    std::vector<std::string> terms;
    terms.reserve(postings_.size());
    for (const auto& [term, _] : postings_) terms.push_back(term);
    std::sort(terms.begin(), terms.end());
    w.u64(terms.size());
    for (const std::string& term : terms) {
      const auto& list = postings_.at(term);
      w.str(term);
      w.u64(list.size());
      for (const Posting& p : list) {
        w.u32(p.doc);
        w.u32(p.tf);
      }
    }
    const std::uint64_t checksum = detail::fnv1a(w.buffer);
    w.u64(checksum);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(w.buffer.data(), static_cast<std::streamsize>(w.buffer.size()));
    out.flush();
    if (!out) throw IoError("write failed for '" + path + "'");
  }

  static InvertedIndex load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < kMagic.size() + 4 + 8)
      throw RetrievalError(RetrievalError::Kind::Corruption, "index file truncated");
    if (bytes.compare(0, kMagic.size(), kMagic) != 0)
      throw RetrievalError(RetrievalError::Kind::Corruption, "not an index file");
    const std::string_view payload(bytes.data(), bytes.size() - 8);
    detail::ByteReader checker{std::string_view(bytes).substr(bytes.size() - 8)};
    if (detail::fnv1a(payload) != checker.u64())
      throw RetrievalError(RetrievalError::Kind::Corruption, "index checksum mismatch");

    detail::ByteReader r{payload, kMagic.size()};
    const std::uint32_t version = r.u32();
    if (version != kVersion)
      throw RetrievalError(RetrievalError::Kind::VersionMismatch,
                           "index version " + std::to_string(version) + ", expected " +
                               std::to_string(kVersion));
    InvertedIndex index;
    index.params_.k1 = r.f64();
    index.params_.b = r.f64();
    const std::uint64_t doc_count = r.u64();
    index.avgdl_ = r.f64();
    for (std::uint64_t i = 0; i < doc_count; ++i) {
      Doc doc;
      doc.id = r.str();
      doc.text = r.str();
      doc.length = r.u32();
      index.ordinals_.emplace(doc.id, static_cast<std::uint32_t>(i));
      index.docs_.push_back(std::move(doc));
    }
    const std::uint64_t term_count = r.u64();
    for (std::uint64_t i = 0; i < term_count; ++i) {
      std::string term = r.str();
      const std::uint64_t n = r.u64();
      std::vector<Posting> list;
      list.reserve(n);
      for (std::uint64_t p = 0; p < n; ++p) {
        Posting posting;
        posting.doc = r.u32();
        posting.tf = r.u32();
        if (posting.doc >= index.docs_.size())
          throw RetrievalError(RetrievalError::Kind::Corruption, "posting references unknown document");
        list.push_back(posting);
      }
      index.postings_.emplace(std::move(term), std::move(list));
    }
    return index;
  }

 private:
  struct Doc {
    std::string id;
    std::string text;
    std::uint32_t length = 0;
  };

  static constexpr std::uint32_t kVersion = 1;
  inline static const std::string kMagic = "KIDX";

  Bm25Params params_;
  std::vector<Doc> docs_;
  std::unordered_map<std::string, std::uint32_t> ordinals_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;  // each list sorted by doc_id
  double avgdl_ = 0.0;

  // +1-smoothed idf: always positive, even for terms in every document.
  double idf(std::size_t df) const {
    const double n = static_cast<double>(docs_.size());
    return std::log(1.0 + (n - static_cast<double>(df) + 0.5) / (static_cast<double>(df) + 0.5));
  }

  double term_score(std::uint32_t tf, std::uint32_t doc_length, std::size_t df) const {
    const double length_ratio = avgdl_ > 0.0 ? static_cast<double>(doc_length) / avgdl_ : 0.0;
    const double norm = 1.0 - params_.b + params_.b * length_ratio;
    const double t = static_cast<double>(tf);
    return idf(df) * (t * (params_.k1 + 1.0)) / (t + params_.k1 * norm);
  }

  void sort_postings() {
    for (auto& [_, list] : postings_)
      std::sort(list.begin(), list.end(), [this](const Posting& a, const Posting& b) {
        return docs_[a.doc].id < docs_[b.doc].id;
      });
  }
};

// Adapter handing the engine and pair extraction the top passage per query.
// The index must outlive the returned callable.
inline Top1Retriever top1_retriever(const InvertedIndex& index) {
  return [&index](const std::string& query) -> std::optional<Passage> {
    const std::vector<SearchHit> hits = index.search(query, 1);
    if (hits.empty()) return std::nullopt;
    return index.passage(hits.front().doc_id);
  };
}

}  // namespace kaucus
