#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "ifkit/error.hpp"
#include "ifkit/reporting.hpp"
#include "oracles.hpp"

using namespace ifkit;
namespace fs = std::filesystem;

namespace {

ScoreTable two_columns(double original, double cot) {
  ScoreTable t;
  t.columns = {"direct", "cot"};
  t.rows.push_back({"model", {original, cot}});
  return t;
}

StrategyOutcome outcome(std::string id, double ratio) {
  StrategyOutcome o;
  o.record_id = std::move(id);
  o.result.record_id = o.record_id;
  o.result.ratio = ratio;
  return o;
}

}  // namespace

TEST_CASE("aggregate examples") {
  CHECK(aggregate(std::vector<double>{1.0, 0.5, 0.0}).mean_percent == doctest::Approx(50.0));
  CHECK(aggregate(std::vector<double>{0.752}).mean_percent == doctest::Approx(75.2));
  CHECK_THROWS_AS(aggregate(std::vector<double>{}), ReportError);
  RunRecord empty;
  CHECK_THROWS_AS(aggregate(empty), ReportError);
}

TEST_CASE("aggregate matches summation and ignores order") {
  std::mt19937_64 rng(73);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> r(100);
    long double s = 0;
    for (auto& x : r) s += (x = u(rng));
    const auto a = aggregate(r);
    CHECK(a.count == 100);
    CHECK(a.mean_percent == doctest::Approx(static_cast<double>(100 * s / 100)).epsilon(1e-12));
    std::shuffle(r.begin(), r.end(), rng);
    CHECK(aggregate(r).mean_percent == doctest::Approx(a.mean_percent).epsilon(1e-12));
  }
}

TEST_CASE("aggregate of a run uses the question ratio when present") {
  RunRecord run;
  run.outcomes = {outcome("a", 1.0), outcome("b", 0.0)};
  run.outcomes[1].question_ratio = 0.5;
  CHECK(aggregate(run).mean_percent == doctest::Approx(75.0));
}

TEST_CASE("cited gaps against cot") {
  const auto drop = delta_vs_cot(two_columns(75.2, 59.0));
  REQUIRE(drop.columns == std::vector<std::string>{"direct", "direct_delta", "cot"});
  CHECK(to_table(drop).rows[0] == std::vector<std::string>{"model", "75.2", "16.2", "59.0"});
  const auto gain = delta_vs_cot(two_columns(53.0, 56.4));
  CHECK(to_table(gain).rows[0] == std::vector<std::string>{"model", "53.0", "-3.4", "56.4"});
  const auto same = delta_vs_cot(two_columns(61.3, 61.3));
  CHECK(*same.rows[0].values[1] == 0.0);
  CHECK(to_table(same).rows[0][2] == "0.0");
}

TEST_CASE("delta reconstructs the method value within a factor of two of cot") {
  std::mt19937_64 rng(79);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 10000; ++i) {
    const double cot = 1 + 99 * u(rng);
    const double method = cot * (0.5 + 1.5 * u(rng));
    const auto d = delta_vs_cot(two_columns(method, cot));
    CHECK(cot + *d.rows[0].values[1] == method);
  }
}

TEST_CASE("delta table shape and errors") {
  ScoreTable t;
  t.columns = {"cot", "few_shot", "self_reflection"};
  t.rows.push_back({"m1", {50.0, 55.0, std::nullopt}});
  t.rows.push_back({"m2", {std::nullopt, 40.0, 41.0}});
  const auto d = delta_vs_cot(t);
  CHECK(d.columns == std::vector<std::string>{"cot", "few_shot", "few_shot_delta", "self_reflection", "self_reflection_delta"});
  CHECK(*d.rows[0].values[2] == 5.0);
  CHECK_FALSE(d.rows[0].values[4].has_value());
  CHECK_FALSE(d.rows[1].values[2].has_value());
  CHECK(to_table(d).rows[1] == std::vector<std::string>{"m2", "", "40.0", "", "41.0", ""});
  ScoreTable no_cot;
  no_cot.columns = {"direct"};
  CHECK_THROWS_AS(delta_vs_cot(no_cot), ReportError);
}

TEST_CASE("pearson examples") {
  CHECK(pearson({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0));
  CHECK(pearson({1, 2, 3}, {3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(pearson({1, 2, 3}, {1, 2, 4}) == doctest::Approx(oracle::pearson({1, 2, 3}, {1, 2, 4})).epsilon(1e-12));
  CHECK(pearson({1, 2, 3}, {1, 2, 4}) == doctest::Approx(3.0 / std::sqrt(2.0 * (14.0 / 3.0))).epsilon(1e-12));
  CHECK_THROWS_AS(pearson({1, 1, 1}, {1, 2, 3}), ReportError);
  CHECK_THROWS_AS(pearson({1}, {1}), ReportError);
  CHECK_THROWS_AS(pearson({1, 2}, {1, 2, 3}), ReportError);
}

TEST_CASE("pearson is invariant under positive affine maps and symmetric") {
  std::mt19937_64 rng(83);
  std::normal_distribution<double> g(0, 1);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> x(3 + rng() % 30), y(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
      x[k] = g(rng);
      y[k] = 0.3 * x[k] + g(rng);
    }
    const double r = pearson(x, y);
    CHECK(r >= -1.0);
    CHECK(r <= 1.0);
    CHECK(pearson(y, x) == doctest::Approx(r).epsilon(1e-12));
    auto ax = x;
    for (auto& v : ax) v = 3.5 * v - 7;
    CHECK(pearson(ax, y) == doctest::Approx(r).epsilon(1e-9));
    for (auto& v : ax) v = -v;
    CHECK(pearson(ax, y) == doctest::Approx(-r).epsilon(1e-9));
  }
}

TEST_CASE("format_fixed") {
  CHECK(format_fixed(16.2, 1) == "16.2");
  CHECK(format_fixed(-0.04, 1) == "0.0");
  CHECK(format_fixed(-3.4, 1) == "-3.4");
  CHECK(format_fixed(0.25, 2) == "0.25");
}

TEST_CASE("empty table renders header only") {
  ScoreTable s;
  s.columns = {"direct", "cot"};
  const auto t = to_table(s);
  CHECK(render(t, Format::csv) == "model,direct,cot\n");
  CHECK(render(t, Format::jsonl).empty());
  CHECK(render(t, Format::markdown) == "| model | direct | cot |\n| --- | --- | --- |\n");
}

TEST_CASE("one row gives a two-line csv") {
  const auto t = to_table(two_columns(75.2, 59.0));
  CHECK(render(t, Format::csv) == "model,direct,cot\nmodel,75.2,59.0\n");
  CHECK(render(t, Format::jsonl) == "{\"model\":\"model\",\"direct\":\"75.2\",\"cot\":\"59.0\"}\n");
}

TEST_CASE("csv round-trip including awkward cells") {
  std::mt19937_64 rng(89);
  const std::vector<std::string> cells = {"a", "", "x,y", "say \"hi\"", "line\nbreak", "\xE6\x9D\xB1", " pad ", "|", "\r\n"};
  for (int i = 0; i < 300; ++i) {
    Table t;
    const auto width = 1 + rng() % 5;
    for (std::size_t c = 0; c < width; ++c) t.header.push_back("h" + std::to_string(c));
    for (auto n = rng() % 5; n > 0; --n) {
      std::vector<std::string> row;
      for (std::size_t c = 0; c < width; ++c) row.push_back(cells[rng() % cells.size()]);
      t.rows.push_back(row);
    }
    CHECK(parse_csv(render(t, Format::csv)) == t);
  }
  const auto path = fs::temp_directory_path() / "ifkit_report_rt.csv";
  const auto t = to_table(delta_vs_cot(two_columns(53.0, 56.4)));
  emit(t, Format::csv, path);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(parse_csv(ss.str()) == t);
  CHECK_THROWS_AS(parse_csv("a,b\n1\n"), ReportError);
  CHECK(parse_csv("a,b\r\n1,2\r\n").rows[0] == std::vector<std::string>{"1", "2"});
}

TEST_CASE("markdown escapes pipes and newlines") {
  Table t{{"h"}, {{"a|b\nc"}}};
  CHECK(render(t, Format::markdown).find("a\\|b<br>c") != std::string::npos);
  CHECK(parse_format("md") == Format::markdown);
  CHECK(parse_format("csv") == Format::csv);
  CHECK_FALSE(parse_format("xml").has_value());
}

TEST_CASE("run store lifecycle") {
  const auto root = fs::temp_directory_path() / "ifkit_runs_test";
  fs::remove_all(root);
  RunStore store(root);
  RunRecord h;
  h.model_id = "m/x";
  h.strategy = Strategy::cot;
  h.dataset = "data.jsonl";
  h.timestamp = utc_timestamp();
  h.config.seed = 9;
  h.config.mock = true;
  const auto dir = store.begin(h);
  CHECK_FALSE(h.run_id.empty());
  CHECK(fs::exists(dir / "run.json"));
  CHECK_FALSE(load_run(dir).complete);
  store.append(dir, outcome("a", 1.0));
  store.append(dir, outcome("b", 0.5));
  store.finish(dir, h);
  const auto run = load_run(dir);
  CHECK(run.complete);
  CHECK(run.outcomes.size() == 2);
  CHECK(run.strategy == Strategy::cot);
  CHECK(run.model_id == "m/x");
  CHECK(run.config.seed == 9);
  CHECK(run.config.mock);
  CHECK(aggregate(run).mean_percent == doctest::Approx(75.0));

  RunRecord dup = h;
  CHECK_THROWS_AS(store.begin(dup), ReportError);
  RunRecord second = h;
  second.run_id.clear();
  store.begin(second);
  CHECK(second.run_id != h.run_id);
  CHECK(load_runs(root).size() == 2);
  CHECK(load_runs(dir).size() == 1);
  CHECK(h.timestamp.back() == 'Z');
}
