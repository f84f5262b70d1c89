#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ifkit/corpus.hpp"

namespace ifkit {

struct Verdict {
  std::string constraint_id;
  bool pass = false;
  std::string detail;
  /// Index into loose_variants() of the first passing variant; none on failure.
  std::optional<std::size_t> variant_used;

  bool operator==(const Verdict&) const = default;
};

struct InstructionResult {
  std::string record_id;
  std::vector<Verdict> verdicts;   // raw, in constraint order
  std::vector<Verdict> effective;  // after dependency cascade
  double ratio = 0.0;
};

/// Fraction of passing verdicts; 1.0 for an empty list.
double pass_ratio(std::span<const Verdict> verdicts);

/// Order: original, fenced-block-stripped, first-line-dropped,
/// last-line-dropped, first-and-last-dropped, asterisk-stripped,
/// fenced+asterisk-stripped, all-of-the-above. Derived variants are trimmed;
/// empty derived variants and duplicates are dropped. Element 0 is always the
/// original text.
std::vector<std::string> loose_variants(std::string_view response);

/// Outcome of one rule on one text.
struct RuleCheck {
  bool pass = false;
  std::string detail;
};

/// Language detection hook. Returns pass/fail for "text is entirely in
/// `language_code`", or nullopt when the detector does not know the language.
class LanguageDetector {
 public:
  virtual ~LanguageDetector() = default;
  virtual std::optional<RuleCheck> check(std::string_view text, std::string_view language_code) const = 0;
};

/// Unicode-script share for non-Latin languages, stopword voting for Latin ones.
class ScriptStopwordDetector final : public LanguageDetector {
 public:
  std::optional<RuleCheck> check(std::string_view text, std::string_view language_code) const override;
  static std::vector<std::string> supported_languages();
};

using ConstraintPlugin =
    std::function<RuleCheck(const AtomicConstraint& constraint, std::string_view text, std::string_view prompt)>;

class Verifier {
 public:
  Verifier();
  explicit Verifier(std::shared_ptr<const LanguageDetector> detector);

  /// Handles constraints of kind "custom:<name>".
  void register_plugin(std::string name, ConstraintPlugin plugin);

  /// Applies the rule to `text` exactly as given (no loose variants).
  RuleCheck check_strict(const AtomicConstraint& constraint, std::string_view text, std::string_view prompt) const;

  /// Loose evaluation: passes iff any loose variant passes.
  Verdict verify_atomic(const AtomicConstraint& constraint, std::string_view response, std::string_view prompt) const;

  /// Raw verdicts in constraint order; `effective` starts equal to them.
  InstructionResult verify_instruction(const InstructionRecord& record, std::string_view response) const;

 private:
  std::shared_ptr<const LanguageDetector> detector_;
  std::map<std::string, ConstraintPlugin, std::less<>> plugins_;
};

/// Default-configured verifier shared by the free functions.
const Verifier& default_verifier();

inline Verdict verify_atomic(const AtomicConstraint& c, std::string_view response, std::string_view prompt) {
  return default_verifier().verify_atomic(c, response, prompt);
}
inline InstructionResult verify_instruction(const InstructionRecord& r, std::string_view response) {
  return default_verifier().verify_instruction(r, response);
}

/// OpenMP-parallel verification of records[i] against responses[i].
std::vector<InstructionResult> verify_batch(const Verifier& verifier, std::span<const InstructionRecord> records,
                                            std::span<const std::string> responses);

namespace serial {
/// Single-threaded reference for verify_batch.
std::vector<InstructionResult> verify_batch(const Verifier& verifier, std::span<const InstructionRecord> records,
                                            std::span<const std::string> responses);
}  // namespace serial

// Rule primitives, exposed for tests and docs.
namespace rules {
std::size_t word_count(std::string_view text);
std::size_t sentence_count(std::string_view text);
std::size_t keyword_count(std::string_view text, std::string_view keyword, bool case_sensitive);
std::size_t letter_count(std::string_view text, char letter);
std::size_t capital_word_count(std::string_view text);
}  // namespace rules

}  // namespace ifkit
