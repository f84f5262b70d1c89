#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "generators.hpp"
#include "ifkit/error.hpp"
#include "ifkit/verifier.hpp"

using namespace ifkit;

namespace {

AtomicConstraint make(ConstraintKind kind, ParamMap params = {}) {
  AtomicConstraint c;
  c.id = "c";
  c.kind = kind;
  c.params = std::move(params);
  return c;
}

struct FixtureCase {
  InstructionRecord record;
  std::string text;
  std::vector<bool> expected;
};

FixtureCase fixture(int example, const std::string& variant) {
  std::ifstream in(std::filesystem::path(IFKIT_DATA_DIR) / "fixtures" / "case_studies.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j.at("example") != example || j.at("variant") != variant) continue;
    FixtureCase f;
    f.record = record_from_json(j.at("record"));
    f.text = j.at("answer").get<std::string>();
    if (j.at("scored_text") == "thinking_and_answer") f.text = j.at("thinking").get<std::string>() + "\n" + f.text;
    f.expected = j.at("expected").get<std::vector<bool>>();
    return f;
  }
  throw std::runtime_error("fixture not found");
}

std::vector<bool> passes(const InstructionResult& r) {
  std::vector<bool> out;
  for (const auto& v : r.verdicts) out.push_back(v.pass);
  return out;
}

}  // namespace

TEST_CASE("loose variants of a fenced block contain the body") {
  const auto v = loose_variants("```\nhello\n```");
  CHECK(v.front() == "```\nhello\n```");
  CHECK(std::find(v.begin(), v.end(), "hello") != v.end());
}

TEST_CASE("loose variants of plain text") {
  const auto v = loose_variants("plain");
  REQUIRE(v.size() >= 1);
  CHECK(v[0] == "plain");
}

TEST_CASE("loose variants drop first and last lines") {
  const std::string s = "a\nb\nc";
  // Independent slicing oracle.
  const auto first_nl = s.find('\n');
  const auto last_nl = s.rfind('\n');
  const std::string without_first = s.substr(first_nl + 1);
  const std::string without_last = s.substr(0, last_nl);
  const auto v = loose_variants(s);
  CHECK(without_first == "b\nc");
  CHECK(without_last == "a\nb");
  CHECK(std::find(v.begin(), v.end(), without_first) != v.end());
  CHECK(std::find(v.begin(), v.end(), without_last) != v.end());
  CHECK(std::find(v.begin(), v.end(), "b") != v.end());
}

TEST_CASE("loose variants never contain duplicates or empty derived entries") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    const auto text = gen::random_text(gen::random_constraint(ConstraintKind::no_comma, rng), rng);
    const auto v = loose_variants(text);
    REQUIRE(!v.empty());
    CHECK(v[0] == text);
    for (std::size_t a = 1; a < v.size(); ++a) {
      CHECK_FALSE(v[a].empty());
      for (std::size_t b = 0; b < a; ++b) CHECK(v[a] != v[b]);
    }
  }
}

TEST_CASE("end phrase with trailing period fails") {
  const auto c = make(ConstraintKind::end_phrase, {{"phrase", std::string("Call me at 631-481-4867")}});
  CHECK_FALSE(verify_atomic(c, "Thanks for reading. Call me at 631-481-4867.", "").pass);
  CHECK(verify_atomic(c, "Thanks for reading. Call me at 631-481-4867", "").pass);
  CHECK(verify_atomic(c, "Thanks for reading. Call me at 631-481-4867  \n", "").pass);
}

TEST_CASE("letter frequency on the haiku") {
  const auto c = make(ConstraintKind::letter_frequency, {{"letter", std::string("n")}, {"min_count", std::int64_t{4}}});
  CHECK(verify_atomic(c, "Panfilo bianco\nNaviga onde infinite\nVento nel mattino", "").pass);
  CHECK(rules::letter_count("Panfilo bianco\nNaviga onde infinite\nVento nel mattino", 'n') == 9);
}

TEST_CASE("no comma and word count minimum") {
  const auto nc = make(ConstraintKind::no_comma);
  CHECK(verify_atomic(nc, "no commas here at all", "").pass);
  const auto wc = make(ConstraintKind::word_count_min, {{"min_words", std::int64_t{400}}});
  const auto v = verify_atomic(wc, "one two three four five six seven eight nine ten", "");
  CHECK_FALSE(v.pass);
  CHECK_FALSE(v.variant_used.has_value());
  CHECK(v.detail.find("10") != std::string::npos);
}

TEST_CASE("no_comma passes iff no loose variant contains a comma") {
  std::mt19937_64 rng(17);
  const auto nc = make(ConstraintKind::no_comma);
  for (int i = 0; i < 1000; ++i) {
    const auto text = gen::random_text(nc, rng);
    bool any_clean = false;
    for (const auto& v : loose_variants(text)) any_clean = any_clean || v.find(',') == std::string::npos;
    CHECK(verify_atomic(nc, text, "").pass == any_clean);
  }
}

TEST_CASE("fullwidth comma counted only with cjk") {
  const std::string t = "東京，大阪";
  CHECK(verify_atomic(make(ConstraintKind::no_comma), t, "").pass);
  CHECK_FALSE(verify_atomic(make(ConstraintKind::no_comma, {{"cjk", true}}), t, "").pass);
}

TEST_CASE("word count minimum is monotone in appended words") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 300; ++i) {
    const auto c = gen::random_constraint(ConstraintKind::word_count_min, rng);
    std::string text = gen::random_words(rng, 15);
    bool was = verify_atomic(c, text, "").pass;
    for (int k = 0; k < 5; ++k) {
      text += " extra";
      const bool now = verify_atomic(c, text, "").pass;
      CHECK((!was || now));
      was = now;
    }
  }
}

TEST_CASE("rule primitives") {
  CHECK(rules::word_count("  a b\tc\n") == 3);
  CHECK(rules::sentence_count("One. Two! Three? four") == 4);
  CHECK(rules::sentence_count("v1.2 is out.") == 1);
  CHECK(rules::keyword_count("Planet planets planet, PLANET", "planet", false) == 3);
  CHECK(rules::keyword_count("Planet planets planet, PLANET", "planet", true) == 1);
  CHECK(rules::capital_word_count("NASA and ESA use HTML5 and Ok") == 3);
}

TEST_CASE("other kinds") {
  CHECK(verify_atomic(make(ConstraintKind::lowercase_only), "all lower here", "").pass);
  CHECK_FALSE(verify_atomic(make(ConstraintKind::lowercase_only), "Not lower", "").pass);
  CHECK(verify_atomic(make(ConstraintKind::output_json_only), "```json\n{\"a\": 1}\n```", "").pass);
  CHECK_FALSE(verify_atomic(make(ConstraintKind::output_json_only), "{\"a\": 1} trailing", "").pass);
  CHECK(verify_atomic(make(ConstraintKind::quote_wrap), "\"wrapped\"", "").pass);
  CHECK(verify_atomic(make(ConstraintKind::enclosing_format, {{"open", std::string("<<")}, {"close", std::string(">>")}}),
                      "Title: <<Tide>>", "")
            .pass);
  CHECK(verify_atomic(make(ConstraintKind::repeat_prompt, {{"prompt_to_repeat", std::string("Say hi.")}}), "Say hi. Hi!", "")
            .pass);
  CHECK(verify_atomic(make(ConstraintKind::response_language, {{"language_code", std::string("ja")}}), "こんにちは世界", "")
            .pass);
  CHECK_FALSE(
      verify_atomic(make(ConstraintKind::response_language, {{"language_code", std::string("fr")}}),
                    "The quick brown fox jumps over the lazy dog and the cat", "")
          .pass);
}

TEST_CASE("custom kind without plugin raises") {
  AtomicConstraint c = make(ConstraintKind::custom);
  c.custom_name = "tone";
  try {
    verify_atomic(c, "anything", "");
    FAIL("expected VerifyError");
  } catch (const VerifyError& e) {
    CHECK(std::string(e.what()).find("custom:tone") != std::string::npos);
  }
  Verifier v;
  v.register_plugin("tone", [](const AtomicConstraint&, std::string_view t, std::string_view) {
    return RuleCheck{t.find("please") != std::string_view::npos, "politeness"};
  });
  CHECK(v.verify_atomic(c, "yes please", "").pass);
  CHECK_FALSE(v.verify_atomic(c, "no", "").pass);
}

TEST_CASE("verify_atomic is deterministic") {
  std::mt19937_64 rng(23);
  for (auto kind : builtin_kinds()) {
    if (kind == ConstraintKind::custom) continue;
    for (int i = 0; i < 50; ++i) {
      const auto c = gen::random_constraint(kind, rng);
      const auto text = gen::random_text(c, rng);
      CHECK(verify_atomic(c, text, "") == verify_atomic(c, text, ""));
    }
  }
}

TEST_CASE("verify_instruction on printed examples") {
  const auto ex1 = fixture(1, "without_reasoning");
  const auto r1 = verify_instruction(ex1.record, ex1.text);
  CHECK(passes(r1) == std::vector<bool>{false, true});
  CHECK(r1.ratio == doctest::Approx(0.5));

  const auto ex3 = fixture(3, "with_reasoning");
  const auto r3 = verify_instruction(ex3.record, ex3.text);
  CHECK(passes(r3) == std::vector<bool>{true, false});
  CHECK(r3.ratio == doctest::Approx(0.5));

  const auto ex2 = fixture(2, "with_reasoning");
  CHECK(passes(verify_instruction(ex2.record, ex2.text)) == ex2.expected);
}

TEST_CASE("pass ratio") {
  CHECK(pass_ratio({}) == 1.0);
  std::vector<Verdict> v{{"a", true, "", 0}, {"b", true, "", 0}};
  CHECK(pass_ratio(v) == 1.0);
  v.push_back({"c", false, "", std::nullopt});
  v.push_back({"d", true, "", 0});
  CHECK(pass_ratio(v) == 0.75);
}

TEST_CASE("parallel verify_batch equals serial reference") {
  std::mt19937_64 rng(29);
  std::vector<InstructionRecord> records;
  std::vector<std::string> responses;
  for (int i = 0; i < 400; ++i) {
    InstructionRecord r;
    r.id = "r" + std::to_string(i);
    r.prompt = "p";
    const auto n = 1 + gen::pick(rng, 3);
    for (std::size_t k = 0; k < n; ++k) {
      auto kind = builtin_kinds()[gen::pick(rng, builtin_kinds().size())];
      if (kind == ConstraintKind::custom) kind = ConstraintKind::no_comma;
      auto c = gen::random_constraint(kind, rng);
      c.id = "c" + std::to_string(k);
      r.constraints.push_back(c);
    }
    responses.push_back(gen::random_text(r.constraints[0], rng));
    records.push_back(std::move(r));
  }
  const Verifier v;
  const auto par = verify_batch(v, records, responses);
  const auto ser = serial::verify_batch(v, records, responses);
  REQUIRE(par.size() == ser.size());
  for (std::size_t i = 0; i < par.size(); ++i) {
    CHECK(par[i].record_id == ser[i].record_id);
    CHECK(par[i].verdicts == ser[i].verdicts);
    CHECK(par[i].ratio == ser[i].ratio);
  }
  std::vector<std::string> short_responses(responses.begin(), responses.end() - 1);
  CHECK_THROWS_AS(verify_batch(v, records, short_responses), VerifyError);
}
