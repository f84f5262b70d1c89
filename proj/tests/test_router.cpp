#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "ifkit/error.hpp"
#include "ifkit/strategies.hpp"

using namespace ifkit;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kTopics = {"rivers", "budgets", "volcanoes", "chess", "bread",
                                          "satellites", "gardens", "violins", "glaciers", "markets"};

std::vector<LabeledSample> separable(std::size_t n) {
  std::vector<LabeledSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool hard = i % 2 == 0;
    const auto& topic = kTopics[(i / 2) % kTopics.size()];
    out.push_back({"s" + std::to_string(i),
                   hard ? "Solve this multistep arithmetic puzzle about " + topic
                        : "Write a lowercase haiku about " + topic,
                   hard ? 1 : 0});
  }
  return out;
}

std::vector<LabeledSample> noise(std::size_t n, std::mt19937_64& rng) {
  std::vector<LabeledSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string text;
    for (int w = 0; w < 6; ++w) text += "w" + std::to_string(rng() % 5000) + " ";
    out.push_back({"n" + std::to_string(i), text, static_cast<int>(i % 2)});
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

}  // namespace

TEST_CASE("label_samples rule") {
  const auto labels = label_samples({{"a", 0.5}, {"b", 0.5}, {"c", 1.0}}, {{"a", 1.0}, {"b", 0.5}, {"c", 0.5}});
  CHECK(labels.at("a") == 1);
  CHECK(labels.at("b") == 0);
  CHECK(labels.at("c") == 0);
}

TEST_CASE("label_samples is antisymmetric when ratios differ") {
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> u(0, 1);
  std::map<std::string, double> base, cot;
  for (int i = 0; i < 200; ++i) {
    base["r" + std::to_string(i)] = std::round(u(rng) * 4) / 4;
    cot["r" + std::to_string(i)] = std::round(u(rng) * 4) / 4;
  }
  const auto fwd = label_samples(base, cot);
  const auto rev = label_samples(cot, base);
  for (const auto& [id, b] : base) {
    if (b == cot[id]) {
      CHECK(fwd.at(id) == 0);
      CHECK(rev.at(id) == 0);
    } else {
      CHECK(fwd.at(id) + rev.at(id) == 1);
    }
  }
}

TEST_CASE("label_samples lists the symmetric difference") {
  try {
    label_samples({{"a", 1}, {"b", 1}}, {{"b", 1}, {"c", 1}});
    FAIL("expected RouterError");
  } catch (const RouterError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("a") != std::string::npos);
    CHECK(msg.find("c") != std::string::npos);
  }
}

TEST_CASE("route at the decision boundary") {
  RouterModel zero;
  zero.weights.assign(zero.feature_spec.dimensions, 0.0);
  CHECK(zero.probability("anything") == 0.5);
  CHECK(route(zero, "anything"));
  RouterModel neg = zero;
  neg.bias = -10;
  CHECK_FALSE(route(neg, "anything"));
  RouterModel bad;
  CHECK_THROWS_AS(route(bad, "x"), RouterError);
}

TEST_CASE("hashed features are L2 normalised and deterministic") {
  const FeatureSpec spec;
  const auto f = hashed_features("The quick brown fox, the QUICK fox.", spec);
  double norm = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    norm += f[i].second * f[i].second;
    CHECK(f[i].first < spec.dimensions);
    if (i) CHECK(f[i - 1].first < f[i].first);
  }
  CHECK(norm == doctest::Approx(1.0));
  CHECK(f == hashed_features("the quick brown fox the quick fox", spec));
  CHECK(hashed_features("", spec).empty());
  FeatureSpec other = spec;
  other.seed = 99;
  CHECK(f != hashed_features("The quick brown fox, the QUICK fox.", other));
}

TEST_CASE("separable toy set is learned exactly") {
  const auto samples = separable(20);
  const auto m = train_router(samples, {});
  for (const auto& s : samples) CHECK(route(m, s.instruction) == (s.label == 1));
  CHECK(router_accuracy(m, samples) == 1.0);
  CHECK(m.val_accuracy >= 0.0);
  CHECK(m.val_accuracy <= 1.0);
  CHECK(m.weights.size() == m.feature_spec.dimensions);
}

TEST_CASE("random labels give chance validation accuracy") {
  double sum = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed + 1000);
    TrainOptions opt;
    opt.seed = seed;
    sum += train_router(noise(200, rng), opt).val_accuracy;
  }
  const double mean = sum / 20;
  CHECK(mean > 0.35);
  CHECK(mean < 0.65);
}

TEST_CASE("training preconditions") {
  CHECK_THROWS_AS(train_router(separable(19)), RouterError);
  auto same = separable(30);
  for (auto& s : same) s.label = 1;
  CHECK_THROWS_AS(train_router(same), RouterError);
  auto weird = separable(30);
  weird[3].label = 2;
  CHECK_THROWS_AS(train_router(weird), RouterError);
}

TEST_CASE("training is seeded") {
  TrainOptions opt;
  opt.seed = 5;
  const auto a = train_router(separable(40), opt);
  const auto b = train_router(separable(40), opt);
  CHECK(a.weights == b.weights);
  CHECK(a.bias == b.bias);
}

TEST_CASE("split_samples") {
  const auto all = separable(41);
  const auto [train, eval] = split_samples(all, 42);
  CHECK(train.size() == 21);
  CHECK(eval.size() == 20);
  std::set<std::string> ids;
  for (const auto& s : train) ids.insert(s.record_id);
  for (const auto& s : eval) ids.insert(s.record_id);
  CHECK(ids.size() == 41);
  CHECK(split_samples(all, 42).first.front().record_id == train.front().record_id);
  CHECK(split_samples(all, 3, 0.8).first.size() == 33);
  CHECK_THROWS_AS(split_samples(all, 1, 1.0), RouterError);
  CHECK_THROWS_AS(split_samples(all, 1, 0.0), RouterError);
}

TEST_CASE("router file round-trip") {
  const auto m = train_router(separable(20));
  const auto path = fs::temp_directory_path() / "ifkit_router_test.json";
  save_router(m, path);
  const auto back = load_router(path);
  CHECK(back.weights == m.weights);
  CHECK(back.bias == m.bias);
  CHECK(back.threshold == m.threshold);
  CHECK(back.val_accuracy == m.val_accuracy);
  CHECK(back.feature_spec.dimensions == m.feature_spec.dimensions);
  CHECK(back.feature_spec.seed == m.feature_spec.seed);

  std::ofstream(path) << R"({"format": "something-else", "version": 1})";
  CHECK_THROWS_AS(load_router(path), RouterError);
  std::ofstream(path) << "{";
  CHECK_THROWS_AS(load_router(path), RouterError);
  CHECK_THROWS_AS(load_router(path.string() + ".missing"), RouterError);
}

TEST_CASE("oracle routing dominates both fixed policies") {
  std::mt19937_64 rng(53);
  std::uniform_int_distribution<int> q(0, 4);
  for (int trial = 0; trial < 200; ++trial) {
    std::map<std::string, double> base, cot;
    for (int i = 0; i < 12; ++i) {
      base["r" + std::to_string(i)] = q(rng) / 4.0;
      cot["r" + std::to_string(i)] = q(rng) / 4.0;
    }
    const auto labels = label_samples(base, cot);
    std::map<std::string, int> all_cot, none;
    for (const auto& [id, l] : labels) {
      all_cot[id] = 1;
      none[id] = 0;
    }
    const double oracle = selective_mean(base, cot, labels);
    CHECK(oracle >= selective_mean(base, cot, all_cot));
    CHECK(oracle >= selective_mean(base, cot, none));
  }
}

TEST_CASE("http route predictor validates its url") {
  CHECK_THROWS_AS(HttpRoutePredictor("localhost:9"), RouterError);
  const HttpRoutePredictor p("http://127.0.0.1:9/route");
  CHECK_THROWS_AS(p.use_reasoning("x"), RouterError);
}
