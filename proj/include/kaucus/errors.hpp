#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace kaucus {

// Base class for everything this toolkit throws.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Violations of the conversation/turn invariants.
class ValidationError : public Error {
 public:
  enum class Kind {
    EmptyConversation,
    EmptyTurn,
    AlternationViolation,
    FirstSpeakerViolation,
    KnowledgeOnAssistantTurn,
    ProvenanceMismatch,
    TriggerInvalid,
  };

  ValidationError(Kind kind, std::string conversation_id, std::ptrdiff_t turn_index,
                  const std::string& what)
      : Error(what),
        kind_(kind),
        conversation_id_(std::move(conversation_id)),
        turn_index_(turn_index) {}

  Kind kind() const { return kind_; }
  const std::string& conversation_id() const { return conversation_id_; }
  // -1 when the violation is not tied to a single turn.
  std::ptrdiff_t turn_index() const { return turn_index_; }

 private:
  Kind kind_;
  std::string conversation_id_;
  std::ptrdiff_t turn_index_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what) : Error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Prompt-rendering and pair-extraction contract violations.
class FormatError : public Error {
 public:
  enum class Kind {
    MissingSummary,
    UnexpectedSummary,
    PassageOnNonHuman,
    MissingRetriever,
    UnexpectedRetriever,
  };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class RetrievalError : public Error {
 public:
  enum class Kind {
    DuplicateDocId,
    UnknownDocId,
    VersionMismatch,
    Corruption,
    BadArgument,
    QueryFailed,
  };

  RetrievalError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class BackendError : public Error {
 public:
  enum class Kind {
    Timeout,
    Non2xx,
    MalformedResponse,
    OutOfRange,
    EmptySummary,
    UnparseableJudgment,
    ScriptExhausted,
    EmptyGeneration,
  };

  BackendError(Kind kind, const std::string& what, int attempts = 1)
      : Error(what), kind_(kind), attempts_(attempts) {}
  Kind kind() const { return kind_; }
  int attempts() const { return attempts_; }

 private:
  Kind kind_;
  int attempts_;
};

// Judgment text that yields no two numeric scores; the raw reply is kept for audit.
class UnparseableJudgmentError : public BackendError {
 public:
  explicit UnparseableJudgmentError(std::string raw)
      : BackendError(Kind::UnparseableJudgment, "judge reply has no two numeric scores"),
        raw_(std::move(raw)) {}
  const std::string& raw() const { return raw_; }

 private:
  std::string raw_;
};

class MetricError : public Error {
 public:
  enum class Kind {
    EmptyText,
    LogUndefined,
    DegenerateText,
    TextTooShort,
  };

  MetricError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class EvalError : public Error {
 public:
  enum class Kind {
    PairMismatch,
    EmptyTally,
  };

  EvalError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace kaucus
