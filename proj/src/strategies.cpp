#include "ifkit/strategies.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include "assets.hpp"
#include "ifkit/composition.hpp"
#include "ifkit/error.hpp"
#include "ifkit/text.hpp"

namespace ifkit {

using nlohmann::json;

namespace {
constexpr std::array<std::pair<Strategy, std::string_view>, 6> kStrategyNames{{
    {Strategy::direct, "direct"},
    {Strategy::cot, "cot"},
    {Strategy::few_shot, "few_shot"},
    {Strategy::self_reflection, "self_reflection"},
    {Strategy::self_selective, "self_selective"},
    {Strategy::classifier_selective, "classifier_selective"},
}};
}  // namespace

std::string_view strategy_name(Strategy s) {
  for (const auto& [k, name] : kStrategyNames)
    if (k == s) return name;
  return "direct";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  for (const auto& [k, n] : kStrategyNames)
    if (n == name) return k;
  return std::nullopt;
}

const std::vector<Strategy>& all_strategies() {
  static const std::vector<Strategy> v = [] {
    std::vector<Strategy> out;
    for (const auto& [k, name] : kStrategyNames) out.push_back(k);
    return out;
  }();
  return v;
}

// Outcome serialisation ----------------------------------------------------

namespace {

json verdicts_json(const std::vector<Verdict>& verdicts) {
  json arr = json::array();
  for (const auto& v : verdicts) {
    json jv = {{"constraint_id", v.constraint_id}, {"pass", v.pass}, {"detail", v.detail}};
    jv["variant_used"] = v.variant_used ? json(*v.variant_used) : json(nullptr);
    arr.push_back(std::move(jv));
  }
  return arr;
}

std::vector<Verdict> verdicts_from_json(const json& arr) {
  std::vector<Verdict> out;
  for (const auto& jv : arr) {
    Verdict v;
    v.constraint_id = jv.at("constraint_id").get<std::string>();
    v.pass = jv.at("pass").get<bool>();
    v.detail = jv.at("detail").get<std::string>();
    if (!jv.at("variant_used").is_null()) v.variant_used = jv.at("variant_used").get<std::size_t>();
    out.push_back(std::move(v));
  }
  return out;
}

json optional_bool(const std::optional<bool>& b) { return b ? json(*b) : json(nullptr); }

std::optional<bool> optional_bool(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<bool>();
}

}  // namespace

json to_json(const StrategyOutcome& o) {
  return {{"record_id", o.record_id},
          {"strategy", strategy_name(o.strategy)},
          {"raw_text", o.raw_text},
          {"think", o.think},
          {"answer", o.answer},
          {"gate_decision", optional_bool(o.gate_decision)},
          {"reflection_satisfies", optional_bool(o.reflection_satisfies)},
          {"verdicts", verdicts_json(o.result.verdicts)},
          {"effective", verdicts_json(o.result.effective)},
          {"ratio", o.result.ratio},
          {"think_tokens", o.think_tokens},
          {"completion_tokens", o.completion_tokens},
          {"usage_reported", o.usage_reported},
          {"calls_made", o.calls_made},
          {"gate_calls", o.gate_calls},
          {"clean_segmentation", o.clean_segmentation},
          {"question_ratio", o.question_ratio ? json(*o.question_ratio) : json(nullptr)},
          {"selection_flag", o.selection_flag},
          {"warnings", o.warnings}};
}

StrategyOutcome outcome_from_json(const json& j) {
  StrategyOutcome o;
  o.record_id = j.at("record_id").get<std::string>();
  const auto s = parse_strategy(j.at("strategy").get<std::string>());
  if (!s) throw StrategyError("unknown strategy in outcome: " + j.at("strategy").get<std::string>());
  o.strategy = *s;
  o.raw_text = j.at("raw_text").get<std::string>();
  o.think = j.at("think").get<std::string>();
  o.answer = j.at("answer").get<std::string>();
  o.gate_decision = optional_bool(j.at("gate_decision"));
  o.reflection_satisfies = optional_bool(j.at("reflection_satisfies"));
  o.result.record_id = o.record_id;
  o.result.verdicts = verdicts_from_json(j.at("verdicts"));
  o.result.effective = verdicts_from_json(j.at("effective"));
  o.result.ratio = j.at("ratio").get<double>();
  o.think_tokens = j.at("think_tokens").get<std::int64_t>();
  o.completion_tokens = j.at("completion_tokens").get<std::int64_t>();
  o.usage_reported = j.at("usage_reported").get<bool>();
  o.calls_made = j.at("calls_made").get<int>();
  o.gate_calls = j.at("gate_calls").get<int>();
  o.clean_segmentation = j.at("clean_segmentation").get<bool>();
  if (j.contains("question_ratio") && !j.at("question_ratio").is_null())
    o.question_ratio = j.at("question_ratio").get<double>();
  o.selection_flag = j.value("selection_flag", false);
  o.warnings = j.at("warnings").get<std::vector<std::string>>();
  return o;
}

// Few-shot sets ------------------------------------------------------------

FewShotSet parse_shots(std::string_view jsonl) {
  FewShotSet shots;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      shots.push_back({j.at("instruction").get<std::string>(), j.at("think").get<std::string>(),
                       j.at("answer").get<std::string>()});
    } catch (const json::exception& e) {
      throw StrategyError("few-shot line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return shots;
}

FewShotSet load_shots(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StrategyError("cannot read few-shot file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_shots(ss.str());
}

const FewShotSet& default_shots(CorpusSource source) {
  static const FewShotSet ifeval = parse_shots(assets::fewshot_ifeval);
  static const FewShotSet complexbench = parse_shots(assets::fewshot_complexbench);
  switch (source) {
    case CorpusSource::ifeval: return ifeval;
    case CorpusSource::complexbench: return complexbench;
    case CorpusSource::custom: break;
  }
  throw StrategyError("no default few-shot set for custom corpora; pass one explicitly");
}

std::string format_shots(const FewShotSet& shots) {
  std::string out;
  for (std::size_t i = 0; i < shots.size(); ++i) {
    if (i) out += "\n\n";
    out += "### Example " + std::to_string(i + 1) + "\nINSTRUCTION:\n" + shots[i].instruction + "\nTHINK:\n" +
           shots[i].think + "\nANSWER:\n" + shots[i].answer;
  }
  return out;
}

// Parsers ------------------------------------------------------------------

ReflectionParse parse_reflection(std::string_view completion) {
  const auto final_at = find_line_marker(completion, "FINAL ANSWER:");
  if (!final_at) throw ReflectionParseError("reflection reply has no FINAL ANSWER section");

  ReflectionParse out;
  out.final_answer = std::string(text::trim(completion.substr(*final_at + 13)));
  const auto head = completion.substr(0, *final_at);
  const auto sat_at = find_line_marker(head, "SATISFIES ALL CONSTRAINTS:");
  const auto refl_at = find_line_marker(head, "REFLECTION:");
  if (refl_at) {
    const auto start = *refl_at + 11;
    const auto end = (sat_at && *sat_at > start) ? *sat_at : head.size();
    out.reflection = std::string(text::trim(head.substr(start, end - start)));
  }
  if (sat_at) out.satisfies = parse_yes_no(head.substr(*sat_at + 26));
  return out;
}

GateDecision parse_gate(std::string_view completion) {
  auto s = text::trim(completion);
  auto strip = [](char c) { return c == '.' || c == '!' || c == '?' || c == ',' || c == ';' || c == ':' || c == '"' || c == '\'' || c == '*'; };
  while (!s.empty() && strip(s.back())) s.remove_suffix(1);
  while (!s.empty() && strip(s.front())) s.remove_prefix(1);
  const auto lower = text::to_lower(text::trim(s));
  if (lower == "yes") return {true, false};
  if (lower == "no") return {false, false};
  return {true, true};
}

// Execution ----------------------------------------------------------------

namespace {

struct Pass {
  ChatResponse response;
  CotSegments segments;
};

class Runner {
 public:
  Runner(const InstructionRecord& record, const StrategyContext& ctx, StrategyOutcome& out)
      : record_(record), ctx_(ctx), out_(out) {}

  ChatResponse call(std::string content) {
    ChatRequest req;
    req.model = ctx_.model;
    req.temperature = ctx_.temperature;
    req.max_tokens = ctx_.max_tokens;
    req.messages.push_back({Role::user, std::move(content)});
    return ctx_.gateway->complete(req);
  }

  void count(const ChatResponse& r) {
    ++out_.calls_made;
    out_.completion_tokens += r.completion_tokens;
    out_.usage_reported = out_.usage_reported || r.usage_reported;
  }

  void direct() {
    const auto r = call(record_.prompt);
    count(r);
    out_.raw_text = r.text;
    out_.think.clear();
    out_.answer = r.text;
  }

  void reasoning(const std::string& prompt) {
    const auto r = call(prompt);
    count(r);
    out_.raw_text = r.text;
    const auto seg = segment_cot(r.text);
    out_.think = seg.think;
    out_.answer = seg.answer;
    out_.clean_segmentation = seg.clean;
    if (!seg.clean) out_.warnings.push_back("no line-initial ANSWER: marker; scoring the whole completion");
  }

  void cot() { reasoning(render_prompt(TemplateId::cot, {{"question", record_.prompt}})); }

  void few_shot() {
    const FewShotSet& shots = ctx_.shots ? *ctx_.shots : default_shots(record_.source);
    reasoning(render_prompt(TemplateId::few_shot, {{"q", record_.prompt}, {"examples_str", format_shots(shots)}}));
  }

  void self_reflection() {
    cot();
    const std::string candidate = out_.answer;
    const auto r = call(render_prompt(TemplateId::self_reflection, {{"instruction", record_.prompt},
                                                                   {"thinking", out_.think},
                                                                   {"candidate_answer", candidate}}));
    count(r);
    out_.raw_text = r.text;
    try {
      const auto parsed = parse_reflection(r.text);
      out_.reflection_satisfies = parsed.satisfies;
      out_.answer = parsed.satisfies.value_or(false) ? candidate : parsed.final_answer;
    } catch (const ReflectionParseError& e) {
      out_.warnings.push_back(std::string(e.what()) + "; keeping the candidate answer");
      out_.answer = candidate;
    }
  }

  void self_selective() {
    const auto r = call(render_prompt(TemplateId::selective_gate, {{"instruction", record_.prompt}}));
    ++out_.gate_calls;
    const auto gate = parse_gate(r.text);
    if (gate.warning) out_.warnings.push_back("gate reply '" + r.text + "' is neither YES nor NO; reasoning by default");
    out_.gate_decision = gate.use_reasoning;
    if (gate.use_reasoning) {
      cot();
    } else {
      direct();
    }
  }

  void classifier_selective() {
    if (ctx_.router == nullptr) throw StrategyError("classifier_selective needs a router");
    const bool use = ctx_.router->use_reasoning(record_.prompt);
    out_.gate_decision = use;
    if (use) {
      cot();
    } else {
      direct();
    }
  }

 private:
  const InstructionRecord& record_;
  const StrategyContext& ctx_;
  StrategyOutcome& out_;
};

}  // namespace

StrategyOutcome run_strategy(Strategy strategy, const InstructionRecord& record, const StrategyContext& context) {
  if (context.gateway == nullptr) throw StrategyError("strategy context has no gateway");
  StrategyOutcome out;
  out.record_id = record.id;
  out.strategy = strategy;
  Runner runner(record, context, out);
  try {
    switch (strategy) {
      case Strategy::direct: runner.direct(); break;
      case Strategy::cot: runner.cot(); break;
      case Strategy::few_shot: runner.few_shot(); break;
      case Strategy::self_reflection: runner.self_reflection(); break;
      case Strategy::self_selective: runner.self_selective(); break;
      case Strategy::classifier_selective: runner.classifier_selective(); break;
    }
  } catch (const StrategyError&) {
    throw;
  } catch (const Error& e) {
    throw StrategyError(std::string(strategy_name(strategy)) + " on record '" + record.id + "': " + e.what());
  }

  out.think_tokens = static_cast<std::int64_t>(text::words(out.think).size());
  const Verifier& verifier = context.verifier ? *context.verifier : default_verifier();
  out.result = verifier.verify_instruction(record, out.answer);
  apply_cascade(record, out.result);
  if (!record.questions.empty()) {
    const CascadeResult cascaded{out.result.effective, {}};
    const auto qs = score_questions(record, cascaded, out.answer, context.gateway,
                                    context.judge_model.empty() ? context.model : context.judge_model);
    out.question_ratio = qs.ratio();
    out.selection_flag = qs.selection_flag;
    if (qs.judge_warnings > 0)
      out.warnings.push_back(std::to_string(qs.judge_warnings) + " judge replies were neither YES nor NO");
  }
  return out;
}

double selective_mean(const std::map<std::string, double>& base, const std::map<std::string, double>& cot,
                      const std::map<std::string, int>& use_cot) {
  if (base.empty()) throw StrategyError("selective_mean over an empty set");
  double sum = 0.0;
  for (const auto& [id, b] : base) {
    const auto c = cot.find(id);
    const auto u = use_cot.find(id);
    if (c == cot.end() || u == use_cot.end()) throw StrategyError("selective_mean: id '" + id + "' missing");
    sum += u->second ? c->second : b;
  }
  return sum / static_cast<double>(base.size());
}

}  // namespace ifkit
