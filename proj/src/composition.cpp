#include "ifkit/composition.hpp"

#include <algorithm>

#include "ifkit/error.hpp"
#include "ifkit/gateway.hpp"
#include "ifkit/text.hpp"

namespace ifkit {

CascadeResult cascade(const InstructionRecord& record, const std::vector<Verdict>& raw) {
  const auto n = record.constraints.size();
  if (raw.size() != n)
    throw CompositionError("record '" + record.id + "': " + std::to_string(raw.size()) + " verdicts for " +
                           std::to_string(n) + " constraints");
  for (std::size_t i = 0; i < n; ++i) {
    if (raw[i].constraint_id != record.constraints[i].id)
      throw CompositionError("record '" + record.id + "': verdict " + std::to_string(i) + " is for '" +
                             raw[i].constraint_id + "', expected '" + record.constraints[i].id + "'");
  }

  std::vector<std::size_t> order;
  try {
    order = topological_order(record);
  } catch (const CorpusError& e) {
    throw CompositionError(e.what());
  }

  std::vector<std::vector<std::size_t>> parents(n);
  for (const auto& e : record.edges) parents[*record.constraint_index(e.to)].push_back(*record.constraint_index(e.from));

  CascadeResult result;
  result.effective = raw;
  for (auto v : order) {
    auto& verdict = result.effective[v];
    if (!verdict.pass) continue;
    const auto failed = std::find_if(parents[v].begin(), parents[v].end(),
                                     [&](std::size_t p) { return !result.effective[p].pass; });
    if (failed == parents[v].end()) continue;
    verdict.pass = false;
    verdict.variant_used.reset();
    verdict.detail = "prerequisite '" + record.constraints[*failed].id + "' failed";
    result.overridden.insert(verdict.constraint_id);
  }
  return result;
}

double score(const InstructionRecord& record, const CascadeResult& result) {
  if (record.constraints.empty()) return 1.0;
  const auto passes = std::count_if(result.effective.begin(), result.effective.end(), [](const Verdict& v) { return v.pass; });
  return static_cast<double>(passes) / static_cast<double>(record.constraints.size());
}

void apply_cascade(const InstructionRecord& record, InstructionResult& result) {
  auto c = cascade(record, result.verdicts);
  result.ratio = score(record, c);
  result.effective = std::move(c.effective);
}

std::optional<bool> parse_yes_no(std::string_view reply) {
  auto s = text::trim(reply);
  while (!s.empty() && (s.front() == '"' || s.front() == '\'' || s.front() == '*')) s.remove_prefix(1);
  auto word_ends = [&](std::size_t n) { return s.size() == n || !(text::is_ascii_alnum(s[n])); };
  if (text::starts_with_ci(s, "yes") && word_ends(3)) return true;
  if (text::starts_with_ci(s, "no") && word_ends(2)) return false;
  return std::nullopt;
}

JudgeVerdict judge_question(const ScoringQuestion& question, std::string_view response, Gateway& gateway,
                            const std::string& judge_model) {
  if (question.mode != QuestionMode::judge)
    throw CompositionError("question '" + question.id + "' is not a judge question");
  ChatRequest req;
  req.model = judge_model;
  req.messages.push_back(
      {Role::user, render_prompt(TemplateId::judge, {{"question", question.text}, {"response", std::string(response)}})});
  JudgeVerdict v;
  v.reply = gateway.complete(req).text;
  if (const auto yes = parse_yes_no(v.reply)) {
    v.pass = *yes;
  } else {
    v.pass = false;
    v.unparseable = true;
  }
  return v;
}

QuestionScore score_questions(const InstructionRecord& record, const CascadeResult& result, std::string_view response,
                              Gateway* gateway, const std::string& judge_model) {
  QuestionScore qs;
  qs.selection_flag = std::any_of(record.edges.begin(), record.edges.end(),
                                  [](const CompositionEdge& e) { return e.op == CompositionOp::Selection; });
  for (const auto& q : record.questions) {
    ++qs.total;
    if (q.mode == QuestionMode::rule) {
      const auto idx = record.constraint_index(*q.rule_binding);
      if (!idx || *idx >= result.effective.size())
        throw CompositionError("question '" + q.id + "' binds unknown constraint");
      if (result.effective[*idx].pass) ++qs.passed;
      continue;
    }
    if (gateway == nullptr || judge_model.empty())
      throw CompositionError("record '" + record.id + "' has judge questions but no judge model is configured");
    const auto v = judge_question(q, response, *gateway, judge_model);
    if (v.pass) ++qs.passed;
    if (v.unparseable) ++qs.judge_warnings;
  }
  return qs;
}

}  // namespace ifkit
