#include "ifkit/corpus.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "ifkit/error.hpp"
#include "ifkit/gateway.hpp"
#include "ifkit/text.hpp"

namespace ifkit {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<ConstraintKind, std::string_view>, 14> kKindNames{{
    {ConstraintKind::word_count_min, "word_count_min"},
    {ConstraintKind::word_count_max, "word_count_max"},
    {ConstraintKind::keyword_frequency, "keyword_frequency"},
    {ConstraintKind::letter_frequency, "letter_frequency"},
    {ConstraintKind::no_comma, "no_comma"},
    {ConstraintKind::end_phrase, "end_phrase"},
    {ConstraintKind::repeat_prompt, "repeat_prompt"},
    {ConstraintKind::enclosing_format, "enclosing_format"},
    {ConstraintKind::output_json_only, "output_json_only"},
    {ConstraintKind::lowercase_only, "lowercase_only"},
    {ConstraintKind::capital_word_count, "capital_word_count"},
    {ConstraintKind::sentence_count_max, "sentence_count_max"},
    {ConstraintKind::response_language, "response_language"},
    {ConstraintKind::quote_wrap, "quote_wrap"},
}};

enum class ParamType { integer, string, boolean };

struct ParamRule {
  std::string_view key;
  ParamType type;
  bool required;
};

std::vector<ParamRule> param_rules(ConstraintKind kind) {
  using K = ConstraintKind;
  using T = ParamType;
  switch (kind) {
    case K::word_count_min: return {{"min_words", T::integer, true}};
    case K::word_count_max: return {{"max_words", T::integer, true}};
    case K::keyword_frequency:
      return {{"keyword", T::string, true}, {"min_count", T::integer, true}, {"case_sensitive", T::boolean, false}};
    case K::letter_frequency: return {{"letter", T::string, true}, {"min_count", T::integer, true}};
    case K::no_comma: return {{"cjk", T::boolean, false}};
    case K::end_phrase: return {{"phrase", T::string, true}};
    case K::repeat_prompt: return {{"prompt_to_repeat", T::string, true}};
    case K::enclosing_format: return {{"open", T::string, true}, {"close", T::string, true}};
    case K::capital_word_count: return {{"max_count", T::integer, true}};
    case K::sentence_count_max: return {{"max_sentences", T::integer, true}};
    case K::response_language: return {{"language_code", T::string, true}};
    case K::output_json_only:
    case K::lowercase_only:
    case K::quote_wrap:
    case K::custom: return {};
  }
  return {};
}

std::string_view type_name(ParamType t) {
  switch (t) {
    case ParamType::integer: return "integer";
    case ParamType::string: return "string";
    case ParamType::boolean: return "boolean";
  }
  return "?";
}

bool holds(const ParamValue& v, ParamType t) {
  switch (t) {
    case ParamType::integer: return std::holds_alternative<std::int64_t>(v);
    case ParamType::string: return std::holds_alternative<std::string>(v);
    case ParamType::boolean: return std::holds_alternative<bool>(v);
  }
  return false;
}

[[noreturn]] void fail_record(std::string_view record_id, const std::string& msg) {
  throw CorpusError("record '" + std::string(record_id) + "': " + msg);
}

std::string where(std::size_t line) {
  return line ? "line " + std::to_string(line) + ": " : std::string();
}

[[noreturn]] void fail_field(std::size_t line, const std::string& field, const std::string& msg) {
  throw CorpusError(where(line) + "field '" + field + "': " + msg);
}

const json& require(const json& j, const char* key, std::size_t line, const std::string& prefix) {
  auto it = j.find(key);
  if (it == j.end()) fail_field(line, prefix + key, "missing");
  return *it;
}

std::string require_string(const json& j, const char* key, std::size_t line, const std::string& prefix) {
  const auto& v = require(j, key, line, prefix);
  if (!v.is_string()) fail_field(line, prefix + key, "expected string");
  return v.get<std::string>();
}

std::size_t require_index(const json& v, std::size_t line, const std::string& field) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) fail_field(line, field, "expected non-negative integer");
  return v.get<std::size_t>();
}

}  // namespace

std::string_view kind_name(ConstraintKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "custom";
}

std::optional<ConstraintKind> parse_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames)
    if (n == name) return k;
  if (name.starts_with("custom:") && name.size() > 7) return ConstraintKind::custom;
  return std::nullopt;
}

const std::vector<ConstraintKind>& builtin_kinds() {
  static const std::vector<ConstraintKind> kinds = [] {
    std::vector<ConstraintKind> v;
    for (const auto& [k, name] : kKindNames) v.push_back(k);
    return v;
  }();
  return kinds;
}

std::string AtomicConstraint::kind_label() const {
  if (kind == ConstraintKind::custom) return "custom:" + custom_name;
  return std::string(kind_name(kind));
}

std::int64_t AtomicConstraint::int_param(std::string_view key) const {
  auto it = params.find(key);
  if (it == params.end() || !std::holds_alternative<std::int64_t>(it->second))
    throw CorpusError("constraint '" + id + "': missing integer param '" + std::string(key) + "'");
  return std::get<std::int64_t>(it->second);
}

const std::string& AtomicConstraint::string_param(std::string_view key) const {
  auto it = params.find(key);
  if (it == params.end() || !std::holds_alternative<std::string>(it->second))
    throw CorpusError("constraint '" + id + "': missing string param '" + std::string(key) + "'");
  return std::get<std::string>(it->second);
}

bool AtomicConstraint::bool_param(std::string_view key, bool fallback) const {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  if (!std::holds_alternative<bool>(it->second))
    throw CorpusError("constraint '" + id + "': param '" + std::string(key) + "' must be boolean");
  return std::get<bool>(it->second);
}

std::string_view op_name(CompositionOp op) {
  switch (op) {
    case CompositionOp::And: return "And";
    case CompositionOp::Chain: return "Chain";
    case CompositionOp::Selection: return "Selection";
    case CompositionOp::Nested: return "Nested";
  }
  return "And";
}

std::optional<CompositionOp> parse_op(std::string_view name) {
  for (auto op : {CompositionOp::And, CompositionOp::Chain, CompositionOp::Selection, CompositionOp::Nested})
    if (op_name(op) == name) return op;
  return std::nullopt;
}

std::string_view source_name(CorpusSource source) {
  switch (source) {
    case CorpusSource::ifeval: return "ifeval";
    case CorpusSource::complexbench: return "complexbench";
    case CorpusSource::custom: return "custom";
  }
  return "custom";
}

std::optional<CorpusSource> parse_source(std::string_view name) {
  for (auto s : {CorpusSource::ifeval, CorpusSource::complexbench, CorpusSource::custom})
    if (source_name(s) == name) return s;
  return std::nullopt;
}

std::optional<std::size_t> InstructionRecord::constraint_index(std::string_view constraint_id) const {
  for (std::size_t i = 0; i < constraints.size(); ++i)
    if (constraints[i].id == constraint_id) return i;
  return std::nullopt;
}

void validate_params(const AtomicConstraint& c, std::string_view record_id) {
  const std::string who = "constraint '" + c.id + "' (" + c.kind_label() + ")";
  if (c.kind == ConstraintKind::custom) {
    if (c.custom_name.empty()) fail_record(record_id, who + ": custom kind needs a name");
    return;
  }
  const auto rules = param_rules(c.kind);
  for (const auto& rule : rules) {
    auto it = c.params.find(rule.key);
    if (it == c.params.end()) {
      if (rule.required) fail_record(record_id, who + ": missing param '" + std::string(rule.key) + "'");
      continue;
    }
    if (!holds(it->second, rule.type))
      fail_record(record_id, who + ": param '" + std::string(rule.key) + "' must be " + std::string(type_name(rule.type)));
    if (rule.type == ParamType::integer && std::get<std::int64_t>(it->second) < 0)
      fail_record(record_id, who + ": param '" + std::string(rule.key) + "' must be non-negative");
    if (rule.type == ParamType::string && std::get<std::string>(it->second).empty())
      fail_record(record_id, who + ": param '" + std::string(rule.key) + "' must be non-empty");
  }
  for (const auto& [key, value] : c.params) {
    const bool known = std::any_of(rules.begin(), rules.end(), [&](const ParamRule& r) { return r.key == key; });
    if (!known) fail_record(record_id, who + ": unexpected param '" + key + "'");
  }
  if (c.kind == ConstraintKind::letter_frequency) {
    const auto& letter = std::get<std::string>(c.params.find("letter")->second);
    if (letter.size() != 1 || !(text::is_ascii_lower(letter[0]) || text::is_ascii_upper(letter[0])))
      fail_record(record_id, who + ": param 'letter' must be a single ASCII letter");
  }
}

std::vector<std::size_t> topological_order(const InstructionRecord& record) {
  const std::size_t n = record.constraints.size();
  std::vector<std::vector<std::size_t>> children(n);
  std::vector<std::size_t> indegree(n, 0);
  for (const auto& e : record.edges) {
    const auto from = record.constraint_index(e.from);
    const auto to = record.constraint_index(e.to);
    if (!from || !to) {
      std::string missing;
      if (!from) missing += "'" + e.from + "'";
      if (!to) missing += std::string(missing.empty() ? "" : ", ") + "'" + e.to + "'";
      fail_record(record.id, "edge " + e.from + " -> " + e.to + " has dangling endpoint(s) " + missing);
    }
    if (*from == *to) fail_record(record.id, "dependency cycle: " + e.from + " -> " + e.to);
    children[*from].push_back(*to);
    ++indegree[*to];
  }

  std::vector<std::size_t> order;
  order.reserve(n);
  std::set<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.insert(i);
  while (!ready.empty()) {
    const auto v = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(v);
    for (auto c : children[v])
      if (--indegree[c] == 0) ready.insert(c);
  }
  if (order.size() == n) return order;

  // Walk back along unresolved in-edges until a node repeats; that loop is a cycle.
  std::vector<std::vector<std::size_t>> parents(n);
  for (std::size_t v = 0; v < n; ++v)
    for (auto c : children[v])
      if (indegree[c] > 0 && indegree[v] > 0) parents[c].push_back(v);
  std::size_t cur = 0;
  while (indegree[cur] == 0) ++cur;
  std::vector<std::size_t> path;
  std::vector<int> seen_at(n, -1);
  while (seen_at[cur] < 0) {
    seen_at[cur] = static_cast<int>(path.size());
    path.push_back(cur);
    cur = parents[cur].front();
  }
  std::vector<std::size_t> cycle(path.begin() + seen_at[cur], path.end());
  std::reverse(cycle.begin(), cycle.end());
  std::string desc;
  for (auto v : cycle) desc += record.constraints[v].id + " -> ";
  desc += record.constraints[cycle.front()].id;
  fail_record(record.id, "dependency cycle: " + desc);
}

void validate_record(const InstructionRecord& r) {
  if (r.id.empty()) throw CorpusError("record with empty id");
  if (text::trim(r.prompt).empty()) fail_record(r.id, "prompt is empty");
  std::set<std::string, std::less<>> ids;
  for (const auto& c : r.constraints) {
    if (c.id.empty()) fail_record(r.id, "constraint with empty id");
    if (!ids.insert(c.id).second) fail_record(r.id, "duplicate constraint id '" + c.id + "'");
    validate_params(c, r.id);
    if (c.span) {
      if (c.span->start >= c.span->end || c.span->end > r.prompt.size())
        fail_record(r.id, "constraint '" + c.id + "': span [" + std::to_string(c.span->start) + ", " +
                              std::to_string(c.span->end) + ") is empty or outside the prompt");
    }
  }
  topological_order(r);
  std::set<std::string, std::less<>> qids;
  for (const auto& q : r.questions) {
    if (q.id.empty()) fail_record(r.id, "question with empty id");
    if (!qids.insert(q.id).second) fail_record(r.id, "duplicate question id '" + q.id + "'");
    if (q.mode == QuestionMode::rule) {
      if (!q.rule_binding) fail_record(r.id, "rule question '" + q.id + "' has no rule_binding");
      if (!ids.contains(*q.rule_binding))
        fail_record(r.id, "question '" + q.id + "' binds unknown constraint '" + *q.rule_binding + "'");
    } else if (text::trim(q.text).empty()) {
      fail_record(r.id, "judge question '" + q.id + "' has empty text");
    }
  }
}

json to_json(const InstructionRecord& r) {
  json constraints = json::array();
  for (const auto& c : r.constraints) {
    json params = json::object();
    for (const auto& [key, value] : c.params) std::visit([&](const auto& v) { params[key] = v; }, value);
    json jc = {{"id", c.id}, {"kind", c.kind_label()}, {"params", params}};
    if (c.span) jc["span"] = {c.span->start, c.span->end};
    constraints.push_back(std::move(jc));
  }
  json edges = json::array();
  for (const auto& e : r.edges) edges.push_back({{"from", e.from}, {"to", e.to}, {"op", op_name(e.op)}});
  json questions = json::array();
  for (const auto& q : r.questions) {
    json jq = {{"id", q.id}, {"text", q.text}, {"mode", q.mode == QuestionMode::rule ? "rule" : "judge"}};
    if (q.rule_binding) jq["rule_binding"] = *q.rule_binding;
    questions.push_back(std::move(jq));
  }
  return {{"id", r.id},
          {"prompt", r.prompt},
          {"constraints", constraints},
          {"edges", edges},
          {"questions", questions},
          {"source", source_name(r.source)}};
}

InstructionRecord record_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) fail_field(line, "<record>", "expected object");
  InstructionRecord r;
  r.id = require_string(j, "id", line, "");
  r.prompt = require_string(j, "prompt", line, "");

  const auto& cs = require(j, "constraints", line, "");
  if (!cs.is_array()) fail_field(line, "constraints", "expected array");
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const auto& jc = cs[i];
    const std::string prefix = "constraints[" + std::to_string(i) + "].";
    if (!jc.is_object()) fail_field(line, prefix.substr(0, prefix.size() - 1), "expected object");
    AtomicConstraint c;
    c.id = require_string(jc, "id", line, prefix);
    const auto kind = require_string(jc, "kind", line, prefix);
    const auto parsed = parse_kind(kind);
    if (!parsed) throw CorpusError(where(line) + "record '" + r.id + "': unknown constraint kind '" + kind + "'");
    c.kind = *parsed;
    if (c.kind == ConstraintKind::custom) c.custom_name = kind.substr(7);
    if (auto it = jc.find("params"); it != jc.end()) {
      if (!it->is_object()) fail_field(line, prefix + "params", "expected object");
      for (const auto& [key, value] : it->items()) {
        if (value.is_boolean()) {
          c.params[key] = value.get<bool>();
        } else if (value.is_number_integer()) {
          c.params[key] = value.get<std::int64_t>();
        } else if (value.is_string()) {
          c.params[key] = value.get<std::string>();
        } else {
          fail_field(line, prefix + "params." + key, "expected integer, string or boolean");
        }
      }
    }
    if (auto it = jc.find("span"); it != jc.end() && !it->is_null()) {
      if (!it->is_array() || it->size() != 2) fail_field(line, prefix + "span", "expected [start, end]");
      c.span = CharSpan{require_index((*it)[0], line, prefix + "span"), require_index((*it)[1], line, prefix + "span")};
    }
    r.constraints.push_back(std::move(c));
  }

  if (auto it = j.find("edges"); it != j.end()) {
    if (!it->is_array()) fail_field(line, "edges", "expected array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& je = (*it)[i];
      const std::string prefix = "edges[" + std::to_string(i) + "].";
      CompositionEdge e;
      e.from = require_string(je, "from", line, prefix);
      e.to = require_string(je, "to", line, prefix);
      const auto op = require_string(je, "op", line, prefix);
      const auto parsed = parse_op(op);
      if (!parsed) fail_field(line, prefix + "op", "unknown op '" + op + "'");
      e.op = *parsed;
      r.edges.push_back(std::move(e));
    }
  }

  if (auto it = j.find("questions"); it != j.end()) {
    if (!it->is_array()) fail_field(line, "questions", "expected array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& jq = (*it)[i];
      const std::string prefix = "questions[" + std::to_string(i) + "].";
      ScoringQuestion q;
      q.id = require_string(jq, "id", line, prefix);
      q.text = jq.contains("text") ? require_string(jq, "text", line, prefix) : std::string();
      const auto mode = require_string(jq, "mode", line, prefix);
      if (mode == "rule") {
        q.mode = QuestionMode::rule;
      } else if (mode == "judge") {
        q.mode = QuestionMode::judge;
      } else {
        fail_field(line, prefix + "mode", "expected 'rule' or 'judge'");
      }
      if (auto b = jq.find("rule_binding"); b != jq.end() && !b->is_null()) {
        if (!b->is_string()) fail_field(line, prefix + "rule_binding", "expected string");
        q.rule_binding = b->get<std::string>();
      }
      r.questions.push_back(std::move(q));
    }
  }

  if (auto it = j.find("source"); it != j.end()) {
    if (!it->is_string()) fail_field(line, "source", "expected string");
    const auto s = parse_source(it->get<std::string>());
    if (!s) fail_field(line, "source", "unknown source '" + it->get<std::string>() + "'");
    r.source = *s;
  }
  return r;
}

namespace {

template <typename Fn>
std::vector<InstructionRecord> load_lines(const std::filesystem::path& path, Fn&& per_record) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot read corpus file " + path.string());
  std::vector<InstructionRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw CorpusError(where(lineno) + "malformed JSON: " + e.what());
    }
    auto record = record_from_json(j, lineno);
    per_record(record, j, lineno);
    try {
      validate_record(record);
    } catch (const CorpusError& e) {
      throw CorpusError(where(lineno) + e.what());
    }
    records.push_back(std::move(record));
  }
  return records;
}

}  // namespace

std::vector<InstructionRecord> load_ifeval(const std::filesystem::path& path) {
  return load_lines(path, [](InstructionRecord& r, const json&, std::size_t line) {
    if (!r.edges.empty()) fail_field(line, "edges", "IFEval records carry no composition edges");
    r.source = CorpusSource::ifeval;
  });
}

std::vector<InstructionRecord> load_complexbench(const std::filesystem::path& path) {
  return load_lines(path, [](InstructionRecord& r, const json&, std::size_t) { r.source = CorpusSource::complexbench; });
}

std::vector<InstructionRecord> load_corpus(const std::filesystem::path& path) {
  return load_lines(path, [](InstructionRecord& r, const json& j, std::size_t line) {
    if (!j.contains("source")) r.source = CorpusSource::ifeval;
    if (r.source == CorpusSource::ifeval && !r.edges.empty())
      fail_field(line, "edges", "IFEval records carry no composition edges");
  });
}

void write_corpus(const std::filesystem::path& path, const std::vector<InstructionRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CorpusError("cannot write corpus file " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  if (!out) throw CorpusError("write failed for " + path.string());
}

// Span annotation ----------------------------------------------------------

SpanOverrides::SpanOverrides(const std::vector<SpanOverride>& entries) {
  for (const auto& e : entries) entries_[{e.record_id, e.constraint_id}] = e.span;
}

SpanOverrides SpanOverrides::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot read span override file " + path.string());
  std::vector<SpanOverride> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw CorpusError(where(lineno) + "malformed JSON: " + e.what());
    }
    SpanOverride o;
    o.record_id = require_string(j, "record_id", lineno, "");
    o.constraint_id = require_string(j, "constraint_id", lineno, "");
    o.span.start = require_index(require(j, "start", lineno, ""), lineno, "start");
    o.span.end = require_index(require(j, "end", lineno, ""), lineno, "end");
    entries.push_back(std::move(o));
  }
  return SpanOverrides(entries);
}

std::optional<CharSpan> SpanOverrides::find(std::string_view record_id, std::string_view constraint_id) const {
  auto it = entries_.find({std::string(record_id), std::string(constraint_id)});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string describe_constraint(const AtomicConstraint& c) {
  std::ostringstream os;
  os << c.kind_label();
  if (!c.params.empty()) {
    os << " (";
    bool first = true;
    for (const auto& [key, value] : c.params) {
      if (!first) os << ", ";
      first = false;
      os << key << " = ";
      std::visit(
          [&](const auto& v) {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, bool>) {
              os << (v ? "true" : "false");
            } else if constexpr (std::is_same_v<V, std::string>) {
              os << '"' << v << '"';
            } else {
              os << v;
            }
          },
          value);
    }
    os << ")";
  }
  return os.str();
}

std::optional<CharSpan> locate_substring(std::string_view prompt, std::string_view needle) {
  if (needle.empty()) return std::nullopt;
  const auto pos = prompt.find(needle);
  if (pos == std::string_view::npos) return std::nullopt;
  return CharSpan{pos, pos + needle.size()};
}

SpanFillResult extract_constraint_spans(const InstructionRecord& record, const SpanSource& source) {
  SpanFillResult result{record, {}};
  const bool has_llm = source.gateway != nullptr && !source.model.empty();
  const bool has_overrides = source.overrides != nullptr && !source.overrides->empty();
  if (!has_llm && !has_overrides) {
    result.warnings.push_back("record '" + record.id + "': no span annotator available; spans unchanged");
    return result;
  }

  for (auto& c : result.record.constraints) {
    if (has_overrides) {
      if (auto span = source.overrides->find(record.id, c.id)) {
        if (span->start < span->end && span->end <= record.prompt.size()) {
          c.span = *span;
        } else {
          c.span.reset();
          result.warnings.push_back("record '" + record.id + "' constraint '" + c.id +
                                    "': override span outside the prompt; left empty");
        }
        continue;
      }
    }
    if (!has_llm) {
      result.warnings.push_back("record '" + record.id + "' constraint '" + c.id + "': no override and no LLM annotator");
      continue;
    }
    ChatRequest req;
    req.model = source.model;
    req.messages.push_back(
        {Role::user, render_prompt(TemplateId::span_extraction,
                                   {{"instruction", record.prompt}, {"constraint", describe_constraint(c)}})});
    const auto reply = source.gateway->complete(req);
    const auto needle = text::trim(reply.text);
    if (auto span = locate_substring(record.prompt, needle)) {
      c.span = *span;
    } else {
      c.span.reset();
      result.warnings.push_back("record '" + record.id + "' constraint '" + c.id +
                                "': extracted text not found verbatim in prompt");
    }
  }
  return result;
}

}  // namespace ifkit
