#include "ifkit/verifier.hpp"

#include <algorithm>
#include <exception>

#include <json.hpp>

#include "ifkit/error.hpp"
#include "ifkit/text.hpp"

namespace ifkit {

double pass_ratio(std::span<const Verdict> verdicts) {
  if (verdicts.empty()) return 1.0;
  const auto passes = std::count_if(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
  return static_cast<double>(passes) / static_cast<double>(verdicts.size());
}

// Loose variants -----------------------------------------------------------

namespace {

std::string strip_fences(std::string_view s) {
  std::vector<std::string_view> kept;
  for (auto line : text::split_lines(s))
    if (!text::trim_left(line).starts_with("```")) kept.push_back(line);
  return text::join_lines(kept);
}

std::string drop_lines(std::string_view s, bool first, bool last) {
  auto lines = text::split_lines(s);
  if (first && !lines.empty()) lines.erase(lines.begin());
  if (last && !lines.empty()) lines.pop_back();
  return text::join_lines(lines);
}

std::string strip_asterisks(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s)
    if (c != '*') out.push_back(c);
  return out;
}

}  // namespace

std::vector<std::string> loose_variants(std::string_view response) {
  const auto fenced = strip_fences(response);
  const auto fenced_stars = strip_asterisks(fenced);
  const std::string derived[] = {
      fenced,
      drop_lines(response, true, false),
      drop_lines(response, false, true),
      drop_lines(response, true, true),
      strip_asterisks(response),
      fenced_stars,
      drop_lines(fenced_stars, true, true),
  };
  std::vector<std::string> out{std::string(response)};
  for (const auto& d : derived) {
    std::string v(text::trim(d));
    if (v.empty()) continue;
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(std::move(v));
  }
  return out;
}

// Rule primitives ----------------------------------------------------------

namespace rules {

std::size_t word_count(std::string_view s) { return text::words(s).size(); }

std::size_t sentence_count(std::string_view s) {
  std::size_t count = 0;
  bool pending = false;  // non-space text since the last boundary
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (!text::is_space(c)) pending = true;
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == s.size() || text::is_space(s[i + 1]))) {
      ++count;
      pending = false;
    }
  }
  return count + (pending ? 1 : 0);
}

std::size_t keyword_count(std::string_view s, std::string_view keyword, bool case_sensitive) {
  if (keyword.empty()) return 0;
  std::string hay(s), needle(keyword);
  if (!case_sensitive) {
    hay = text::to_lower(hay);
    needle = text::to_lower(needle);
  }
  std::size_t count = 0;
  std::size_t pos = 0;
  while ((pos = hay.find(needle, pos)) != std::string::npos) {
    const bool left_ok = pos == 0 || !text::is_ascii_alnum(hay[pos - 1]);
    const std::size_t end = pos + needle.size();
    const bool right_ok = end == hay.size() || !text::is_ascii_alnum(hay[end]);
    if (left_ok && right_ok) {
      ++count;
      pos = end;
    } else {
      ++pos;
    }
  }
  return count;
}

std::size_t letter_count(std::string_view s, char letter) {
  const char target = text::to_lower(letter);
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [&](char c) { return text::to_lower(c) == target; }));
}

std::size_t capital_word_count(std::string_view s) {
  std::size_t count = 0;
  for (auto w : text::words(s)) {
    const bool has_upper = std::any_of(w.begin(), w.end(), text::is_ascii_upper);
    const bool has_lower = std::any_of(w.begin(), w.end(), text::is_ascii_lower);
    if (has_upper && !has_lower) ++count;
  }
  return count;
}

}  // namespace rules

namespace {

bool is_uppercase_cp(char32_t cp) {
  return (cp >= 'A' && cp <= 'Z') || (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) || (cp >= 0x391 && cp <= 0x3A9) ||
         (cp >= 0x410 && cp <= 0x42F);
}

std::string excerpt_tail(std::string_view s, std::size_t n = 40) {
  return "\"" + std::string(s.size() > n ? s.substr(s.size() - n) : s) + "\"";
}

std::string count_detail(const char* what, std::size_t got, const char* rel, std::int64_t bound) {
  return std::string(what) + " " + std::to_string(got) + " " + rel + " " + std::to_string(bound);
}

RuleCheck at_least(const char* what, std::size_t got, std::int64_t bound) {
  const bool ok = static_cast<std::int64_t>(got) >= bound;
  return {ok, count_detail(what, got, ok ? ">=" : "<", bound)};
}

RuleCheck at_most(const char* what, std::size_t got, std::int64_t bound) {
  const bool ok = static_cast<std::int64_t>(got) <= bound;
  return {ok, count_detail(what, got, ok ? "<=" : ">", bound)};
}

}  // namespace

// Verifier -----------------------------------------------------------------

Verifier::Verifier() : detector_(std::make_shared<ScriptStopwordDetector>()) {}

Verifier::Verifier(std::shared_ptr<const LanguageDetector> detector) : detector_(std::move(detector)) {
  if (!detector_) detector_ = std::make_shared<ScriptStopwordDetector>();
}

void Verifier::register_plugin(std::string name, ConstraintPlugin plugin) { plugins_[std::move(name)] = std::move(plugin); }

RuleCheck Verifier::check_strict(const AtomicConstraint& c, std::string_view t, std::string_view prompt) const {
  using K = ConstraintKind;
  switch (c.kind) {
    case K::word_count_min: return at_least("word count", rules::word_count(t), c.int_param("min_words"));
    case K::word_count_max: return at_most("word count", rules::word_count(t), c.int_param("max_words"));
    case K::keyword_frequency: {
      const auto& kw = c.string_param("keyword");
      const auto n = rules::keyword_count(t, kw, c.bool_param("case_sensitive", false));
      return at_least(("occurrences of \"" + kw + "\"").c_str(), n, c.int_param("min_count"));
    }
    case K::letter_frequency: {
      const auto& letter = c.string_param("letter");
      const auto n = rules::letter_count(t, letter.empty() ? '\0' : letter[0]);
      return at_least(("occurrences of letter '" + letter + "'").c_str(), n, c.int_param("min_count"));
    }
    case K::no_comma: {
      std::size_t n = static_cast<std::size_t>(std::count(t.begin(), t.end(), ','));
      if (c.bool_param("cjk", false)) {
        constexpr std::string_view fullwidth = "\xEF\xBC\x8C";
        for (auto pos = t.find(fullwidth); pos != std::string_view::npos; pos = t.find(fullwidth, pos + 3)) ++n;
      }
      if (n == 0) return {true, "no commas"};
      return {false, "found " + std::to_string(n) + " comma(s)"};
    }
    case K::end_phrase: {
      const auto& phrase = c.string_param("phrase");
      const auto trimmed = text::trim_right(t);
      if (trimmed.ends_with(phrase)) return {true, "ends with the phrase"};
      return {false, "response ends with " + excerpt_tail(trimmed)};
    }
    case K::repeat_prompt: {
      const auto& wanted = c.string_param("prompt_to_repeat");
      if (text::trim_left(t).starts_with(wanted)) return {true, "begins with the requested text"};
      return {false, "response does not begin with the requested text verbatim"};
    }
    case K::enclosing_format: {
      const auto& open = c.string_param("open");
      const auto& close = c.string_param("close");
      for (auto pos = t.find(open); pos != std::string_view::npos; pos = t.find(open, pos + 1)) {
        const auto inner_start = pos + open.size();
        const auto end = t.find(close, inner_start);
        if (end == std::string_view::npos) break;
        const auto inner = t.substr(inner_start, end - inner_start);
        if (!inner.empty() && inner.find('\n') == std::string_view::npos)
          return {true, "found " + open + std::string(inner) + close};
      }
      return {false, "no non-empty single-line " + open + "..." + close + " found"};
    }
    case K::output_json_only: {
      const auto body = text::trim(t);
      if (body.empty()) return {false, "empty response"};
      try {
        const auto j = nlohmann::json::parse(body);
        if (j.is_object() || j.is_array()) return {true, "single JSON value"};
        return {false, "JSON value is neither an object nor an array"};
      } catch (const nlohmann::json::parse_error&) {
        return {false, "not a single well-formed JSON object or array"};
      }
    }
    case K::lowercase_only: {
      for (auto cp : text::decode_utf8(t))
        if (is_uppercase_cp(cp)) return {false, "contains uppercase letters"};
      return {true, "all lowercase"};
    }
    case K::capital_word_count:
      return at_most("all-capital words", rules::capital_word_count(t), c.int_param("max_count"));
    case K::sentence_count_max:
      return at_most("sentences", rules::sentence_count(t), c.int_param("max_sentences"));
    case K::response_language: {
      const auto& code = c.string_param("language_code");
      auto res = detector_->check(t, code);
      if (!res) throw VerifyError("no language detector for language code '" + code + "'");
      return *res;
    }
    case K::quote_wrap: {
      const auto body = text::trim(t);
      if (body.size() >= 2 && body.front() == '"' && body.back() == '"') return {true, "wrapped in double quotes"};
      constexpr std::string_view lq = "\xE2\x80\x9C", rq = "\xE2\x80\x9D";
      if (body.size() >= 6 && body.starts_with(lq) && body.ends_with(rq)) return {true, "wrapped in double quotes"};
      return {false, "not wrapped in double quotes"};
    }
    case K::custom: {
      auto it = plugins_.find(c.custom_name);
      if (it == plugins_.end()) throw VerifyError("no verifier registered for constraint kind '" + c.kind_label() + "'");
      return it->second(c, t, prompt);
    }
  }
  throw VerifyError("unhandled constraint kind");
}

Verdict Verifier::verify_atomic(const AtomicConstraint& c, std::string_view response, std::string_view prompt) const {
  if (c.kind == ConstraintKind::custom && !plugins_.contains(c.custom_name))
    throw VerifyError("no verifier registered for constraint kind '" + c.kind_label() + "'");
  const auto variants = loose_variants(response);
  std::string first_detail;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    auto check = check_strict(c, variants[i], prompt);
    if (check.pass) return {c.id, true, std::move(check.detail), i};
    if (i == 0) first_detail = std::move(check.detail);
  }
  if (first_detail.empty()) first_detail = "constraint not satisfied";
  return {c.id, false, std::move(first_detail), std::nullopt};
}

InstructionResult Verifier::verify_instruction(const InstructionRecord& record, std::string_view response) const {
  InstructionResult result;
  result.record_id = record.id;
  result.verdicts.reserve(record.constraints.size());
  for (const auto& c : record.constraints) {
    try {
      result.verdicts.push_back(verify_atomic(c, response, record.prompt));
    } catch (const VerifyError& e) {
      throw VerifyError("record '" + record.id + "' constraint '" + c.id + "': " + e.what());
    }
  }
  result.effective = result.verdicts;
  result.ratio = pass_ratio(result.effective);
  return result;
}

const Verifier& default_verifier() {
  static const Verifier v;
  return v;
}

namespace {
void check_batch_sizes(std::span<const InstructionRecord> records, std::span<const std::string> responses) {
  if (records.size() != responses.size())
    throw VerifyError("verify_batch: " + std::to_string(records.size()) + " records but " +
                      std::to_string(responses.size()) + " responses");
}
}  // namespace

std::vector<InstructionResult> verify_batch(const Verifier& verifier, std::span<const InstructionRecord> records,
                                            std::span<const std::string> responses) {
  check_batch_sizes(records, responses);
  const auto n = static_cast<std::ptrdiff_t>(records.size());
  std::vector<InstructionResult> out(records.size());
  std::vector<std::exception_ptr> errors(records.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = verifier.verify_instruction(records[static_cast<std::size_t>(i)],
                                                                     responses[static_cast<std::size_t>(i)]);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

namespace serial {
std::vector<InstructionResult> verify_batch(const Verifier& verifier, std::span<const InstructionRecord> records,
                                            std::span<const std::string> responses) {
  check_batch_sizes(records, responses);
  std::vector<InstructionResult> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) out.push_back(verifier.verify_instruction(records[i], responses[i]));
  return out;
}
}  // namespace serial

}  // namespace ifkit
