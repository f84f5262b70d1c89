#include "ifkit/cli.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "ifkit/attention.hpp"
#include "ifkit/corpus.hpp"
#include "ifkit/error.hpp"
#include "ifkit/reporting.hpp"
#include "ifkit/strategies.hpp"
#include "ifkit/text.hpp"

namespace ifkit {

using nlohmann::json;

// Mock provider --------------------------------------------------------------

namespace {

std::string_view template_prefix(TemplateId id) {
  const auto body = template_text(id);
  return body.substr(0, body.find('{'));
}

std::string_view between(std::string_view s, std::string_view open, std::string_view close) {
  const auto a = s.find(open);
  if (a == std::string_view::npos) return s;
  const auto from = a + open.size();
  const auto b = s.find(close, from);
  return s.substr(from, b == std::string_view::npos ? std::string_view::npos : b - from);
}

std::string mock_answer(std::string_view instruction, std::string_view salt = "") {
  static const std::vector<std::string> canned = {
      "here is a short answer written entirely in lowercase letters",
      "A Short Answer. It has two sentences.",
      "\"A quoted reply without any commas at all\"",
      "{\"answer\": \"mock\"}",
      "<<Mock Title>>\nA short body follows the title.",
  };
  const auto h = sha256_hex(std::string(salt) + std::string(instruction));
  return canned[std::stoul(h.substr(0, 8), nullptr, 16) % canned.size()];
}

ChatResponse mock_reply(const ChatRequest& req) {
  const std::string prompt = req.messages.empty() ? std::string() : req.messages.back().content;
  std::string reply;
  if (prompt.starts_with(template_prefix(TemplateId::selective_gate))) {
    const auto instr = between(prompt, "\"\"\"", "\"\"\"");
    reply = sha256_hex(instr).back() % 2 == 0 ? "YES" : "NO";
  } else if (prompt.starts_with(template_prefix(TemplateId::self_reflection))) {
    const auto candidate = between(prompt, "### Candidate answer:\n", "\n\n### Response format:");
    reply = "REFLECTION:\nEvery constraint is met.\n\nSATISFIES ALL CONSTRAINTS:\nYes\n\nFINAL ANSWER:\n" +
            std::string(candidate);
  } else if (prompt.starts_with(template_prefix(TemplateId::cot))) {
    auto instr = between(prompt, "INSTRUCTION:\n", "\n");
    reply = "THINK:\nI list the constraints and check each one before answering.\nANSWER:\n" + mock_answer(instr, "cot");
  } else if (prompt.starts_with(template_prefix(TemplateId::span_extraction))) {
    reply = "NONE";
  } else if (prompt.starts_with(template_prefix(TemplateId::judge))) {
    reply = "YES";
  } else {
    reply = mock_answer(prompt);
  }
  ChatResponse r;
  r.text = reply;
  r.prompt_tokens = static_cast<std::int64_t>(text::words(prompt).size());
  r.completion_tokens = static_cast<std::int64_t>(text::words(reply).size());
  r.usage_reported = true;
  return r;
}

}  // namespace

std::shared_ptr<Provider> make_mock_provider() { return std::make_shared<FunctionProvider>(mock_reply); }

// Commands ---------------------------------------------------------------------

namespace {

struct EvalArgs {
  std::string dataset, strategy, model, out = "runs", shots, judge_model, router, router_url, cache_dir;
  bool mock = false;
  std::uint64_t seed = 0;
  int max_tokens = 4096;
  int workers = 4;
};

struct ReportArgs {
  std::vector<std::string> runs;
  std::string out, format = "csv";
};

struct AttnArgs {
  std::string dataset, out, overrides, model, trace, base, cot, format = "csv";
  bool mock = false;
};

struct RouterArgs {
  std::string base, cot, dataset, labels, router, out;
  double split = 0.5;
  std::uint64_t seed = 0;
};

std::shared_ptr<Provider> choose_provider(bool mock) { return mock ? make_mock_provider() : make_provider_from_env(); }

std::map<std::string, double> ratios_of(const RunRecord& run) {
  std::map<std::string, double> out;
  for (const auto& o : run.outcomes) out[o.record_id] = o.scored_ratio();
  return out;
}

void write_table(const Table& t, const std::string& format_name, const std::string& path, std::ostream& out) {
  const auto format = parse_format(format_name);
  if (!format) throw ReportError("unknown format '" + format_name + "'");
  if (path.empty()) {
    out << render(t, *format);
  } else {
    emit(t, *format, path);
  }
}

int run_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const auto strategy = parse_strategy(a.strategy);
  if (!strategy) throw StrategyError("unknown strategy '" + a.strategy + "'");
  const auto records = load_corpus(a.dataset);

  GatewayOptions gopts;
  if (!a.cache_dir.empty()) gopts.cache_dir = a.cache_dir;
  Gateway gateway(choose_provider(a.mock), gopts);

  std::optional<FewShotSet> shots;
  if (!a.shots.empty()) shots = load_shots(a.shots);
  std::unique_ptr<RoutePredictor> router;
  if (!a.router.empty()) router = std::make_unique<LinearRoutePredictor>(load_router(a.router));
  if (!a.router_url.empty()) router = std::make_unique<HttpRoutePredictor>(a.router_url);
  if (*strategy == Strategy::classifier_selective && !router)
    throw StrategyError("classifier_selective needs --router or --router-url");

  StrategyContext ctx;
  ctx.gateway = &gateway;
  ctx.model = a.model;
  ctx.max_tokens = a.max_tokens;
  ctx.router = router.get();
  ctx.shots = shots ? &*shots : nullptr;
  ctx.judge_model = a.judge_model;

  RunStore store(a.out);
  RunRecord header;
  header.model_id = a.model;
  header.strategy = *strategy;
  header.dataset = a.dataset;
  header.config = {templates_hash(), ctx.temperature, a.max_tokens, a.seed, a.judge_model, a.mock};
  const auto dir = store.begin(header);

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= records.size() || failed.load()) return;
      try {
        store.append(dir, run_strategy(*strategy, records[i], ctx));
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed = true;
        return;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const auto n = static_cast<std::size_t>(std::max(1, a.workers));
    for (std::size_t w = 0; w < std::min(n, std::max<std::size_t>(records.size(), 1)); ++w) pool.emplace_back(worker);
  }
  for (const auto& w : gateway.warnings()) err << "warning: " << w << '\n';
  if (first_error) {
    err << "run left incomplete at " << dir.string() << '\n';
    std::rethrow_exception(first_error);
  }
  store.finish(dir, header);
  const auto run = load_run(dir);
  const auto agg = aggregate(run);
  out << dir.string() << '\n'
      << "records=" << agg.count << " accuracy=" << format_fixed(agg.mean_percent, 1) << "%\n";
  return exit_ok;
}

int run_report(const ReportArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<RunRecord> runs;
  for (const auto& r : a.runs) {
    auto loaded = load_runs(r);
    runs.insert(runs.end(), std::make_move_iterator(loaded.begin()), std::make_move_iterator(loaded.end()));
  }
  if (runs.empty()) throw ReportError("no runs found");

  std::set<std::string> datasets;
  for (const auto& r : runs) datasets.insert(std::filesystem::path(r.dataset).stem().string());
  auto label_of = [&](const RunRecord& r) {
    return datasets.size() > 1 ? r.model_id + " @ " + std::filesystem::path(r.dataset).stem().string() : r.model_id;
  };

  ScoreTable scores;
  for (auto s : all_strategies())
    if (std::any_of(runs.begin(), runs.end(), [&](const RunRecord& r) { return r.strategy == s; }))
      scores.columns.emplace_back(strategy_name(s));
  std::map<std::string, std::size_t> row_of;
  std::map<std::pair<std::string, std::string>, const RunRecord*> by_label_strategy;
  for (const auto& r : runs) {
    if (!r.complete) err << "warning: run " << r.run_id << " is incomplete\n";
    const auto label = label_of(r);
    if (!row_of.contains(label)) {
      row_of[label] = scores.rows.size();
      scores.rows.push_back({label, std::vector<std::optional<double>>(scores.columns.size())});
    }
    const auto col = *scores.column(strategy_name(r.strategy));
    if (by_label_strategy.contains({label, std::string(strategy_name(r.strategy))}))
      err << "warning: several " << strategy_name(r.strategy) << " runs for " << label << "; using " << r.run_id << '\n';
    by_label_strategy[{label, std::string(strategy_name(r.strategy))}] = &r;
    scores.rows[row_of[label]].values[col] = aggregate(r).mean_percent;
  }
  const bool has_cot = scores.column("cot").has_value();
  const auto table = to_table(has_cot ? delta_vs_cot(scores) : scores);
  write_table(table, a.format, a.out, out);

  Table corr{{"model", "records", "pearson_think_tokens_vs_score_diff"}, {}};
  for (const auto& [label, row] : row_of) {
    const auto base = by_label_strategy.find({label, "direct"});
    const auto cot = by_label_strategy.find({label, "cot"});
    if (base == by_label_strategy.end() || cot == by_label_strategy.end()) continue;
    const auto base_ratios = ratios_of(*base->second);
    std::vector<double> lengths, diffs;
    for (const auto& o : cot->second->outcomes) {
      const auto b = base_ratios.find(o.record_id);
      if (b == base_ratios.end()) continue;
      lengths.push_back(static_cast<double>(o.think_tokens));
      diffs.push_back(o.scored_ratio() - b->second);
    }
    std::string r = "undefined";
    try {
      r = format_fixed(pearson(lengths, diffs), 4);
    } catch (const ReportError& e) {
      err << "warning: " << label << ": " << e.what() << '\n';
    }
    corr.rows.push_back({label, std::to_string(lengths.size()), r});
  }
  if (!corr.rows.empty()) {
    if (a.out.empty()) {
      out << '\n';
      write_table(corr, a.format, "", out);
    } else {
      auto p = std::filesystem::path(a.out);
      const auto corr_path = p.parent_path() / (p.stem().string() + ".correlation" + p.extension().string());
      write_table(corr, a.format, corr_path.string(), out);
    }
  }
  return exit_ok;
}

int run_attn_spans(const AttnArgs& a, std::ostream& out, std::ostream& err) {
  auto records = load_corpus(a.dataset);
  SpanOverrides overrides;
  if (!a.overrides.empty()) overrides = SpanOverrides::load(a.overrides);
  std::unique_ptr<Gateway> gateway;
  if (!a.model.empty()) gateway = std::make_unique<Gateway>(choose_provider(a.mock));
  SpanSource source{&overrides, gateway.get(), a.model};
  std::size_t with_span = 0, total = 0;
  for (auto& r : records) {
    auto filled = extract_constraint_spans(r, source);
    for (const auto& w : filled.warnings) err << "warning: " << w << '\n';
    r = std::move(filled.record);
    for (const auto& c : r.constraints) {
      ++total;
      with_span += c.span.has_value();
    }
  }
  write_corpus(a.out, records);
  out << with_span << " of " << total << " constraints have spans\n";
  return exit_ok;
}

std::string fmt(double v) { return format_fixed(v, 9); }

int run_attn_compute(const AttnArgs& a, std::ostream& out) {
  const auto trace = load_trace(a.trace);
  const auto m = trace_metrics(trace);
  Table t{{"metric", "layer", "step", "value"}, {}};
  for (std::size_t l = 0; l < m.alpha.size(); ++l)
    for (std::size_t s = 0; s < m.alpha[l].size(); ++s)
      t.rows.push_back({"alpha", std::to_string(l), std::to_string(s), fmt(m.alpha[l][s])});
  for (std::size_t s = 0; s < m.alpha_bar.size(); ++s)
    t.rows.push_back({"alpha_bar", "", std::to_string(s), fmt(m.alpha_bar[s])});
  for (std::size_t l = 0; l < m.beta_bar.size(); ++l)
    t.rows.push_back({"beta_bar", std::to_string(l), "", fmt(m.beta_bar[l])});
  write_table(t, a.format, a.out, out);
  return exit_ok;
}

std::map<std::string, std::filesystem::path> trace_dirs(const std::filesystem::path& root) {
  std::map<std::string, std::filesystem::path> out;
  if (std::filesystem::exists(root / "meta.json")) {
    out[""] = root;
    return out;
  }
  if (!std::filesystem::is_directory(root)) throw AttentionError("not a trace directory: " + root.string());
  for (const auto& e : std::filesystem::directory_iterator(root))
    if (e.is_directory() && std::filesystem::exists(e.path() / "meta.json")) out[e.path().filename().string()] = e.path();
  if (out.empty()) throw AttentionError("no traces under " + root.string());
  return out;
}

int run_attn_compare(const AttnArgs& a, std::ostream& out) {
  const auto base = trace_dirs(a.base);
  const auto cot = trace_dirs(a.cot);
  std::vector<std::string> ids;
  for (const auto& [id, p] : base) {
    if (!cot.contains(id)) throw AttentionError("trace '" + id + "' has no cot counterpart");
    ids.push_back(id);
  }
  for (const auto& [id, p] : cot)
    if (!base.contains(id)) throw AttentionError("trace '" + id + "' has no base counterpart");

  Table t{{"trace", "layer", "beta_base", "beta_cot", "delta_beta"}, {}};
  for (const auto& id : ids) {
    const auto bt = load_trace(base.at(id));
    const auto ct = load_trace(cot.at(id));
    const auto bm = trace_metrics(bt);
    const auto cm = trace_metrics(ct, bt.constraint_spans.empty() ? ct.constraint_spans : bt.constraint_spans);
    const auto drop = attention_drop(bm.beta_bar, cm.beta_bar);
    const auto name = id.empty() ? std::filesystem::path(a.base).filename().string() : id;
    for (std::size_t l = 0; l < drop.per_layer.size(); ++l)
      t.rows.push_back({name, std::to_string(l), fmt(bm.beta_bar[l]), fmt(cm.beta_bar[l]), fmt(drop.per_layer[l])});
    double mb = 0, mc = 0;
    for (std::size_t l = 0; l < drop.per_layer.size(); ++l) {
      mb += bm.beta_bar[l];
      mc += cm.beta_bar[l];
    }
    const auto L = static_cast<double>(drop.per_layer.size());
    t.rows.push_back({name, "mean", fmt(mb / L), fmt(mc / L), fmt(drop.mean)});
  }
  write_table(t, a.format, a.out, out);
  return exit_ok;
}

int run_attn_groups(const AttnArgs& a, std::ostream& out, std::ostream& err) {
  const auto base = ratios_of(load_run(a.base));
  const auto cot = ratios_of(load_run(a.cot));
  const auto g = group_outcomes(base, cot);
  Table t{{"record_id", "base_ratio", "cot_ratio", "group"}, {}};
  for (const auto& [id, o] : g.by_id)
    t.rows.push_back({id, fmt(base.at(id)), fmt(cot.at(id)), std::string(outcome_name(o))});
  write_table(t, a.format, a.out, out);
  err << "WIN=" << g.win.size() << " LOSE=" << g.lose.size() << " TIE=" << g.tie.size() << '\n';
  return exit_ok;
}

std::vector<LabeledSample> read_labels(const std::string& path, std::vector<std::string>* splits) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RouterError("cannot read labels " + path);
  std::vector<LabeledSample> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      out.push_back({j.at("record_id").get<std::string>(), j.at("instruction").get<std::string>(),
                     j.at("label").get<int>()});
      if (splits) splits->push_back(j.value("split", "train"));
    } catch (const json::exception& e) {
      throw RouterError(path + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

int run_router_label(const RouterArgs& a, std::ostream& out) {
  const auto base = ratios_of(load_run(a.base));
  const auto cot = ratios_of(load_run(a.cot));
  const auto labels = label_samples(base, cot);
  std::map<std::string, std::string> prompts;
  for (const auto& r : load_corpus(a.dataset)) prompts[r.id] = r.prompt;
  std::vector<LabeledSample> samples;
  for (const auto& [id, label] : labels) {
    const auto p = prompts.find(id);
    if (p == prompts.end()) throw RouterError("record '" + id + "' not found in " + a.dataset);
    samples.push_back({id, p->second, label});
  }
  const auto [train, eval] = split_samples(samples, a.seed, a.split);
  std::ofstream f(a.out, std::ios::binary);
  if (!f) throw RouterError("cannot write " + a.out);
  auto dump = [&](const std::vector<LabeledSample>& v, const char* split) {
    for (const auto& s : v)
      f << json{{"record_id", s.record_id},     {"instruction", s.instruction},
                {"base_ratio", base.at(s.record_id)}, {"cot_ratio", cot.at(s.record_id)},
                {"label", s.label},             {"split", split}}
               .dump()
        << '\n';
  };
  dump(train, "train");
  dump(eval, "eval");
  const auto positives = std::count_if(samples.begin(), samples.end(), [](const auto& s) { return s.label == 1; });
  out << samples.size() << " labels (" << positives << " prefer reasoning), " << train.size() << " train / "
      << eval.size() << " eval\n";
  return exit_ok;
}

int run_router_train(const RouterArgs& a, std::ostream& out) {
  std::vector<std::string> splits;
  const auto all = read_labels(a.labels, &splits);
  std::vector<LabeledSample> train, eval;
  for (std::size_t i = 0; i < all.size(); ++i) (splits[i] == "eval" ? eval : train).push_back(all[i]);
  TrainOptions opts;
  opts.seed = a.seed;
  const auto model = train_router(train, opts);
  save_router(model, a.out);
  out << "trained on " << train.size() << " samples, validation accuracy " << format_fixed(model.val_accuracy, 3);
  if (!eval.empty()) out << ", eval accuracy " << format_fixed(router_accuracy(model, eval), 3);
  out << '\n';
  return exit_ok;
}

int run_router_apply(const RouterArgs& a, std::ostream& out) {
  const LinearRoutePredictor predictor(load_router(a.router));
  Table t{{"record_id", "probability", "use_cot"}, {}};
  for (const auto& r : load_corpus(a.dataset))
    t.rows.push_back({r.id, format_fixed(predictor.model().probability(r.prompt), 6),
                      predictor.use_reasoning(r.prompt) ? "1" : "0"});
  write_table(t, "csv", a.out, out);
  return exit_ok;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Instruction-following evaluation toolkit", "ifkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Run one prompting strategy over a corpus");
  eval->add_option("--dataset", ev.dataset, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  std::vector<std::string> strategy_names;
  for (auto s : all_strategies()) strategy_names.emplace_back(strategy_name(s));
  eval->add_option("--strategy", ev.strategy, "Prompting strategy")->required()->check(CLI::IsMember(strategy_names));
  eval->add_option("--model", ev.model, "Model id sent to the endpoint")->required();
  eval->add_flag("--mock", ev.mock, "Use the offline mock provider");
  eval->add_option("--out", ev.out, "Run store root")->capture_default_str();
  eval->add_option("--seed", ev.seed, "Seed recorded with the run")->capture_default_str();
  eval->add_option("--shots", ev.shots, "Few-shot JSONL replacing the shipped set");
  eval->add_option("--judge-model", ev.judge_model, "Model for judge questions (default: --model)");
  eval->add_option("--router", ev.router, "Trained router file (classifier_selective)");
  eval->add_option("--router-url", ev.router_url, "External router endpoint (classifier_selective)");
  eval->add_option("--max-tokens", ev.max_tokens)->capture_default_str();
  eval->add_option("--cache-dir", ev.cache_dir, "Completion cache directory");
  eval->add_option("--workers", ev.workers, "Records evaluated concurrently")->capture_default_str();

  ReportArgs rep;
  auto* report = app.add_subcommand("report", "Aggregate runs into tables with deltas and correlations");
  report->add_option("runs", rep.runs, "Run directories or run store roots")->required();
  report->add_option("--out", rep.out, "Output file (stdout when absent)");
  report->add_option("--format", rep.format, "csv|markdown|jsonl")->capture_default_str();

  AttnArgs at;
  auto* attn = app.add_subcommand("attn", "Constraint-attention analysis");
  attn->require_subcommand(1);
  auto* spans = attn->add_subcommand("spans", "Annotate constraint spans in a corpus");
  spans->add_option("--dataset", at.dataset)->required()->check(CLI::ExistingFile);
  spans->add_option("--out", at.out, "Annotated corpus JSONL")->required();
  spans->add_option("--overrides", at.overrides, "Span override JSONL")->check(CLI::ExistingFile);
  spans->add_option("--model", at.model, "LLM used to locate spans without an override");
  spans->add_flag("--mock", at.mock);
  auto* compute = attn->add_subcommand("compute", "alpha, alpha_bar and beta_bar for one trace");
  compute->add_option("--trace", at.trace)->required()->check(CLI::ExistingDirectory);
  compute->add_option("--out", at.out);
  compute->add_option("--format", at.format)->capture_default_str();
  auto* compare = attn->add_subcommand("compare", "Per-layer attention drop between base and cot traces");
  compare->add_option("--base", at.base)->required()->check(CLI::ExistingDirectory);
  compare->add_option("--cot", at.cot)->required()->check(CLI::ExistingDirectory);
  compare->add_option("--out", at.out);
  compare->add_option("--format", at.format)->capture_default_str();
  auto* groups = attn->add_subcommand("groups", "WIN/LOSE/TIE buckets from a base and a cot run");
  groups->add_option("--base", at.base)->required()->check(CLI::ExistingDirectory);
  groups->add_option("--cot", at.cot)->required()->check(CLI::ExistingDirectory);
  groups->add_option("--out", at.out);
  groups->add_option("--format", at.format)->capture_default_str();

  RouterArgs ro;
  auto* router = app.add_subcommand("router", "Selective-reasoning router");
  router->require_subcommand(1);
  auto* label = router->add_subcommand("label", "Label records from a base and a cot run");
  label->add_option("--base", ro.base)->required()->check(CLI::ExistingDirectory);
  label->add_option("--cot", ro.cot)->required()->check(CLI::ExistingDirectory);
  label->add_option("--dataset", ro.dataset)->required()->check(CLI::ExistingFile);
  label->add_option("--out", ro.out)->required();
  label->add_option("--split", ro.split, "Training fraction")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  label->add_option("--seed", ro.seed)->capture_default_str();
  auto* train = router->add_subcommand("train", "Train a router from labels");
  train->add_option("--labels", ro.labels)->required()->check(CLI::ExistingFile);
  train->add_option("--out", ro.out)->required();
  train->add_option("--seed", ro.seed)->capture_default_str();
  auto* apply = router->add_subcommand("apply", "Route every record of a corpus");
  apply->add_option("--router", ro.router)->required()->check(CLI::ExistingFile);
  apply->add_option("--dataset", ro.dataset)->required()->check(CLI::ExistingFile);
  apply->add_option("--out", ro.out);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* deepest = &app;
    while (!deepest->get_subcommands().empty()) deepest = deepest->get_subcommands().front();
    out << deepest->help();
    return exit_ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    const CLI::App* deepest = &app;
    while (!deepest->get_subcommands().empty()) deepest = deepest->get_subcommands().front();
    err << "error: " << e.what() << "\n\n" << deepest->help();
    return exit_usage;
  }

  try {
    if (*eval) return run_eval(ev, out, err);
    if (*report) return run_report(rep, out, err);
    if (*spans) return run_attn_spans(at, out, err);
    if (*compute) return run_attn_compute(at, out);
    if (*compare) return run_attn_compare(at, out);
    if (*groups) return run_attn_groups(at, out, err);
    if (*label) return run_router_label(ro, out);
    if (*train) return run_router_train(ro, out);
    if (*apply) return run_router_apply(ro, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_runtime;
  }
  err << app.help();
  return exit_usage;
}

int dispatch(const std::vector<std::string>& args) { return dispatch(args, std::cout, std::cerr); }

}  // namespace ifkit
