#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ifkit/cli.hpp"
#include "ifkit/reporting.hpp"

using namespace ifkit;
namespace fs = std::filesystem;

namespace {

const fs::path kData = IFKIT_DATA_DIR;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / "ifkit_cli_test" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::vector<fs::path> subdirs(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

fs::path eval_mock(const fs::path& runs, const std::string& strategy, const fs::path& dataset) {
  const auto before = fs::exists(runs) ? subdirs(runs).size() : 0;
  const auto r = run({"eval", "--dataset", dataset.string(), "--strategy", strategy, "--model", "m", "--mock", "--out",
                      runs.string()});
  REQUIRE_MESSAGE(r.code == exit_ok, r.err);
  const auto dirs = subdirs(runs);
  REQUIRE(dirs.size() == before + 1);
  for (const auto& d : dirs)
    if (load_run(d).strategy == parse_strategy(strategy)) return d;
  FAIL("run not found");
  return {};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("eval with the mock provider creates a complete run") {
  const auto runs = scratch("eval");
  const auto created = HttpProvider::instances_created();
  const auto dir = eval_mock(runs, "cot", kData / "ifeval_tiny.jsonl");
  CHECK(HttpProvider::instances_created() == created);
  const auto rec = load_run(dir);
  CHECK(rec.complete);
  CHECK(rec.outcomes.size() == 6);
  CHECK(rec.config.mock);
  CHECK(rec.model_id == "m");
  CHECK(fs::exists(dir / "outcomes.jsonl"));
}

TEST_CASE("eval without required flags is a usage error") {
  const auto r = run({"eval"});
  CHECK(r.code == exit_usage);
  CHECK(r.err.find("--dataset") != std::string::npos);
  CHECK(run({}).code == exit_usage);
  CHECK(run({"frobnicate"}).code == exit_usage);
  CHECK(run({"eval", "--dataset", (kData / "ifeval_tiny.jsonl").string(), "--strategy", "cot", "--model", "m",
             "--bogus"})
            .code == exit_usage);
  CHECK(run({"eval", "--dataset", (kData / "ifeval_tiny.jsonl").string(), "--strategy", "ensemble", "--model", "m",
             "--mock"})
            .code == exit_usage);
  CHECK(run({"--help"}).code == exit_ok);
}

TEST_CASE("runtime failures exit 2") {
  const auto dir = scratch("runtime");
  const auto bad = dir / "bad.jsonl";
  std::ofstream(bad) << "{not json\n";
  CHECK(run({"eval", "--dataset", bad.string(), "--strategy", "cot", "--model", "m", "--mock", "--out",
             (dir / "runs").string()})
            .code == exit_runtime);
  CHECK(run({"eval", "--dataset", (kData / "ifeval_tiny.jsonl").string(), "--strategy", "classifier_selective",
             "--model", "m", "--mock", "--out", (dir / "runs").string()})
            .code != exit_ok);
}

TEST_CASE("attn compare on the shipped tiny traces") {
  const auto r = run({"attn", "compare", "--base", (kData / "traces" / "base").string(), "--cot",
                      (kData / "traces" / "cot").string()});
  REQUIRE_MESSAGE(r.code == exit_ok, r.err);
  const auto t = parse_csv(r.out);
  CHECK(t.header == std::vector<std::string>{"trace", "layer", "beta_base", "beta_cot", "delta_beta"});
  REQUIRE(t.rows.size() == 2 * (3 + 1));
  for (const auto& row : t.rows) CHECK(std::stod(row[4]) > 0);
  CHECK(t.rows[3][1] == "mean");
  CHECK(t.rows.back()[1] == "mean");

  const auto single = run({"attn", "compare", "--base", (kData / "traces" / "base" / "ife-001").string(), "--cot",
                           (kData / "traces" / "cot" / "ife-001").string()});
  CHECK(single.code == exit_ok);
}

TEST_CASE("attn compute emits a long table") {
  const auto r = run({"attn", "compute", "--trace", (kData / "traces" / "cot" / "ife-004").string()});
  REQUIRE_MESSAGE(r.code == exit_ok, r.err);
  const auto t = parse_csv(r.out);
  CHECK(t.header == std::vector<std::string>{"metric", "layer", "step", "value"});
  CHECK_FALSE(t.rows.empty());
}

TEST_CASE("attn spans writes an annotated corpus") {
  const auto dir = scratch("spans");
  const auto out = dir / "annotated.jsonl";
  const auto r = run({"attn", "spans", "--dataset", (kData / "ifeval_tiny.jsonl").string(), "--overrides",
                      (kData / "ifeval_tiny_spans.jsonl").string(), "--out", out.string()});
  REQUIRE_MESSAGE(r.code == exit_ok, r.err);
  const auto lines = slurp(out);
  CHECK(lines.find("\"span\"") != std::string::npos);
}

TEST_CASE("report, groups and router over mock runs") {
  const auto dir = scratch("pipeline");
  const auto runs = dir / "runs";
  const auto data = kData / "ifeval_tiny.jsonl";
  const auto direct = eval_mock(runs, "direct", data);
  const auto cot = eval_mock(runs, "cot", data);

  const auto rep = run({"report", runs.string(), "--format", "csv"});
  REQUIRE_MESSAGE(rep.code == exit_ok, rep.err);
  CHECK(rep.out.find("direct_delta") != std::string::npos);

  const auto md = dir / "table.md";
  CHECK(run({"report", runs.string(), "--format", "markdown", "--out", md.string()}).code == exit_ok);
  CHECK(slurp(md).starts_with("| model |"));
  CHECK(run({"report", runs.string(), "--format", "xml"}).code != exit_ok);

  const auto groups = run({"attn", "groups", "--base", direct.string(), "--cot", cot.string()});
  REQUIRE_MESSAGE(groups.code == exit_ok, groups.err);
  CHECK(parse_csv(groups.out).rows.size() == 6);
  CHECK(groups.err.find("WIN=") != std::string::npos);

  const auto labels = dir / "labels.jsonl";
  const auto lab = run({"router", "label", "--base", direct.string(), "--cot", cot.string(), "--dataset", data.string(),
                        "--out", labels.string(), "--seed", "3"});
  REQUIRE_MESSAGE(lab.code == exit_ok, lab.err);
  std::istringstream lines(slurp(labels));
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("label") == (j.at("cot_ratio").get<double>() > j.at("base_ratio").get<double>() ? 1 : 0));
    ++n;
  }
  CHECK(n == 6);
}

TEST_CASE("router train and apply") {
  const auto dir = scratch("router");
  const auto labels = dir / "labels.jsonl";
  {
    std::ofstream f(labels);
    for (int i = 0; i < 40; ++i) {
      const bool hard = i % 2 == 0;
      f << nlohmann::json{{"record_id", "r" + std::to_string(i)},
                          {"instruction", hard ? "Solve the multistep puzzle number " + std::to_string(i)
                                               : "Write a lowercase haiku number " + std::to_string(i)},
                          {"label", hard ? 1 : 0},
                          {"split", i < 30 ? "train" : "eval"}}
                .dump()
        << '\n';
    }
  }
  const auto model = dir / "router.json";
  const auto tr = run({"router", "train", "--labels", labels.string(), "--out", model.string(), "--seed", "1"});
  REQUIRE_MESSAGE(tr.code == exit_ok, tr.err);
  CHECK(tr.out.find("eval accuracy 1.000") != std::string::npos);

  const auto ap = run({"router", "apply", "--router", model.string(), "--dataset", (kData / "ifeval_tiny.jsonl").string()});
  REQUIRE_MESSAGE(ap.code == exit_ok, ap.err);
  CHECK(parse_csv(ap.out).rows.size() == 6);

  const auto runs = dir / "runs";
  const auto ev = run({"eval", "--dataset", (kData / "ifeval_tiny.jsonl").string(), "--strategy", "classifier_selective",
                       "--model", "m", "--mock", "--router", model.string(), "--out", runs.string()});
  CHECK_MESSAGE(ev.code == exit_ok, ev.err);
}

TEST_CASE("every strategy runs under the mock on both corpora") {
  const auto runs = scratch("all") / "runs";
  for (const auto& s : {"direct", "cot", "few_shot", "self_reflection", "self_selective"}) {
    eval_mock(runs, s, kData / "ifeval_tiny.jsonl");
    eval_mock(runs, s, kData / "complexbench_tiny.jsonl");
  }
  const auto rep = run({"report", runs.string()});
  CHECK_MESSAGE(rep.code == exit_ok, rep.err);
}

TEST_CASE("mock provider is deterministic") {
  auto p = make_mock_provider();
  ChatRequest req;
  req.model = "m";
  req.messages.push_back({Role::user, "Write a haiku."});
  CHECK(p->send(req).text == p->send(req).text);
}
