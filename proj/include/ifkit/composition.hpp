#pragma once

#include <set>
#include <string>
#include <vector>

#include "ifkit/corpus.hpp"
#include "ifkit/verifier.hpp"

namespace ifkit {

class Gateway;

struct CascadeResult {
  std::vector<Verdict> effective;
  /// Constraints whose raw pass was forced to fail by a failed prerequisite.
  std::set<std::string> overridden;
};

/// Dependency cascade: a constraint fails if its raw verdict fails or any DAG
/// ancestor fails. Every edge op propagates failure the same way.
CascadeResult cascade(const InstructionRecord& record, const std::vector<Verdict>& raw);

/// Effective passes / total constraints (1.0 when the record has none).
double score(const InstructionRecord& record, const CascadeResult& result);

/// Runs cascade over a verifier result and refreshes `effective` and `ratio`.
void apply_cascade(const InstructionRecord& record, InstructionResult& result);

struct JudgeVerdict {
  bool pass = false;
  /// Set when the reply was neither YES nor NO; pass is then false.
  bool unparseable = false;
  std::string reply;
};

/// YES/NO prefix parse, case-insensitive; nullopt when neither.
std::optional<bool> parse_yes_no(std::string_view reply);

JudgeVerdict judge_question(const ScoringQuestion& question, std::string_view response, Gateway& gateway,
                            const std::string& judge_model);

struct QuestionScore {
  std::size_t total = 0;
  std::size_t passed = 0;
  std::size_t judge_warnings = 0;
  /// Record has Selection edges, so the denominator choice matters.
  bool selection_flag = false;
  double ratio() const { return total == 0 ? 1.0 : static_cast<double>(passed) / static_cast<double>(total); }
};

/// Question-level score: rule questions read the effective verdict of their
/// bound constraint, judge questions go through the judge model. Every
/// question stays in the denominator.
QuestionScore score_questions(const InstructionRecord& record, const CascadeResult& result, std::string_view response,
                              Gateway* gateway, const std::string& judge_model);

}  // namespace ifkit
