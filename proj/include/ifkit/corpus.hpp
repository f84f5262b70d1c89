#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace ifkit {

class Gateway;

enum class ConstraintKind {
  word_count_min,
  word_count_max,
  keyword_frequency,
  letter_frequency,
  no_comma,
  end_phrase,
  repeat_prompt,
  enclosing_format,
  output_json_only,
  lowercase_only,
  capital_word_count,
  sentence_count_max,
  response_language,
  quote_wrap,
  custom,  // "custom:<name>", handled only by registered verifier plugins
};

std::string_view kind_name(ConstraintKind kind);
std::optional<ConstraintKind> parse_kind(std::string_view name);
const std::vector<ConstraintKind>& builtin_kinds();

using ParamValue = std::variant<std::int64_t, std::string, bool>;
using ParamMap = std::map<std::string, ParamValue, std::less<>>;

/// Half-open byte range [start, end) into the prompt.
struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start; }
  bool operator==(const CharSpan&) const = default;
};

struct AtomicConstraint {
  std::string id;
  ConstraintKind kind = ConstraintKind::no_comma;
  std::string custom_name;  // only for ConstraintKind::custom
  ParamMap params;
  std::optional<CharSpan> span;

  std::string kind_label() const;
  std::int64_t int_param(std::string_view key) const;
  const std::string& string_param(std::string_view key) const;
  bool bool_param(std::string_view key, bool fallback) const;

  bool operator==(const AtomicConstraint&) const = default;
};

enum class CompositionOp { And, Chain, Selection, Nested };

std::string_view op_name(CompositionOp op);
std::optional<CompositionOp> parse_op(std::string_view name);

struct CompositionEdge {
  std::string from;
  std::string to;
  CompositionOp op = CompositionOp::And;

  bool operator==(const CompositionEdge&) const = default;
};

enum class QuestionMode { rule, judge };

struct ScoringQuestion {
  std::string id;
  std::string text;
  QuestionMode mode = QuestionMode::judge;
  std::optional<std::string> rule_binding;

  bool operator==(const ScoringQuestion&) const = default;
};

enum class CorpusSource { ifeval, complexbench, custom };

std::string_view source_name(CorpusSource source);
std::optional<CorpusSource> parse_source(std::string_view name);

struct InstructionRecord {
  std::string id;
  std::string prompt;
  std::vector<AtomicConstraint> constraints;
  std::vector<CompositionEdge> edges;
  std::vector<ScoringQuestion> questions;
  CorpusSource source = CorpusSource::custom;

  /// Index of the constraint with this id, if any.
  std::optional<std::size_t> constraint_index(std::string_view constraint_id) const;

  bool operator==(const InstructionRecord&) const = default;
};

/// Throws CorpusError describing the first violated invariant.
void validate_params(const AtomicConstraint& constraint, std::string_view record_id);
void validate_record(const InstructionRecord& record);

/// Kahn topological order of constraint indices. Ties break by constraint
/// order, so a chain A->B->C yields (A, B, C). Throws CorpusError listing one
/// cycle, or naming the ids of a dangling edge.
std::vector<std::size_t> topological_order(const InstructionRecord& record);

nlohmann::json to_json(const InstructionRecord& record);
/// `line` is used for error messages only (0 = unknown).
InstructionRecord record_from_json(const nlohmann::json& j, std::size_t line = 0);

std::vector<InstructionRecord> load_ifeval(const std::filesystem::path& path);
std::vector<InstructionRecord> load_complexbench(const std::filesystem::path& path);
/// Reads each line's own "source" field (default ifeval); validates as the matching loader would.
std::vector<InstructionRecord> load_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, const std::vector<InstructionRecord>& records);

// Span annotation ----------------------------------------------------------

struct SpanOverride {
  std::string record_id;
  std::string constraint_id;
  CharSpan span;
};

class SpanOverrides {
 public:
  SpanOverrides() = default;
  explicit SpanOverrides(const std::vector<SpanOverride>& entries);
  static SpanOverrides load(const std::filesystem::path& path);

  std::optional<CharSpan> find(std::string_view record_id, std::string_view constraint_id) const;
  bool empty() const { return entries_.empty(); }

 private:
  std::map<std::pair<std::string, std::string>, CharSpan> entries_;
};

/// Where spans come from. Overrides win; the LLM path is used only when a
/// gateway and model are set.
struct SpanSource {
  const SpanOverrides* overrides = nullptr;
  Gateway* gateway = nullptr;
  std::string model;
};

struct SpanFillResult {
  InstructionRecord record;
  std::vector<std::string> warnings;
};

/// Human-readable description of a constraint used in the extraction prompt.
std::string describe_constraint(const AtomicConstraint& constraint);

/// Exact byte search of `needle` in `prompt`; nullopt when absent or empty.
std::optional<CharSpan> locate_substring(std::string_view prompt, std::string_view needle);

SpanFillResult extract_constraint_spans(const InstructionRecord& record, const SpanSource& source);

}  // namespace ifkit
