#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>

#include <httplib.h>

#include "ifkit/error.hpp"
#include "ifkit/strategies.hpp"
#include "ifkit/text.hpp"

namespace ifkit {

using nlohmann::json;

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ (seed * 0x9e3779b97f4a7c15ULL);
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> tokens(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (text::is_ascii_alnum(c) || static_cast<unsigned char>(c) >= 0x80) {
      cur += text::to_lower(c);
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

using Sparse = std::vector<std::pair<std::size_t, double>>;

double dot(const std::vector<double>& w, const Sparse& x) {
  double s = 0.0;
  for (const auto& [i, v] : x) s += w[i] * v;
  return s;
}

}  // namespace

Sparse hashed_features(std::string_view input, const FeatureSpec& spec) {
  if (spec.dimensions == 0) throw RouterError("feature dimensions must be positive");
  std::unordered_map<std::size_t, double> counts;
  const auto toks = tokens(input);
  for (std::size_t i = 0; i < toks.size(); ++i) {
    counts[fnv1a("u:" + toks[i], spec.seed) % spec.dimensions] += 1.0;
    if (i + 1 < toks.size()) counts[fnv1a("b:" + toks[i] + ' ' + toks[i + 1], spec.seed) % spec.dimensions] += 1.0;
  }
  Sparse out(counts.begin(), counts.end());
  std::sort(out.begin(), out.end());
  double norm = 0.0;
  for (const auto& [i, v] : out) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > 0)
    for (auto& [i, v] : out) v /= norm;
  return out;
}

double RouterModel::probability(std::string_view instruction) const {
  if (weights.size() != feature_spec.dimensions) throw RouterError("router weights do not match feature dimensions");
  return sigmoid(dot(weights, hashed_features(instruction, feature_spec)) + bias);
}

bool route(const RouterModel& router, std::string_view instruction) {
  return router.probability(instruction) >= router.threshold;
}

RouterModel train_router(const std::vector<LabeledSample>& samples, const TrainOptions& options) {
  if (samples.size() < 20)
    throw RouterError("router training needs at least 20 samples, got " + std::to_string(samples.size()));
  std::set<int> classes;
  for (const auto& s : samples) {
    if (s.label != 0 && s.label != 1) throw RouterError("label for '" + s.record_id + "' is not 0 or 1");
    classes.insert(s.label);
  }
  if (classes.size() < 2) throw RouterError("router training data contains a single class");

  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(options.validation_fraction * static_cast<double>(samples.size()))));
  const std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  const std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

  RouterModel m;
  m.feature_spec = options.features;
  m.weights.assign(m.feature_spec.dimensions, 0.0);
  std::normal_distribution<double> init(0.0, 0.01);
  for (auto& w : m.weights) w = init(rng);

  std::vector<Sparse> x(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) x[i] = hashed_features(samples[i].instruction, m.feature_spec);

  const double n = static_cast<double>(train.size());
  std::vector<double> grad(m.weights.size());
  double prev_loss = std::numeric_limits<double>::infinity();
  for (int epoch = 0; epoch < options.max_epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    double loss = 0.0;
    for (auto i : train) {
      const double p = sigmoid(dot(m.weights, x[i]) + m.bias);
      const double y = samples[i].label;
      loss -= y * std::log(std::max(p, 1e-15)) + (1 - y) * std::log(std::max(1 - p, 1e-15));
      for (const auto& [j, v] : x[i]) grad[j] += (p - y) * v;
      grad_b += p - y;
    }
    loss /= n;
    if (std::abs(prev_loss - loss) < options.tolerance) break;
    prev_loss = loss;
    for (std::size_t j = 0; j < grad.size(); ++j) m.weights[j] -= options.learning_rate * grad[j] / n;
    m.bias -= options.learning_rate * grad_b / n;
  }

  std::size_t correct = 0;
  for (auto i : val) {
    const bool predicted = sigmoid(dot(m.weights, x[i]) + m.bias) >= m.threshold;
    correct += predicted == (samples[i].label == 1);
  }
  m.val_accuracy = static_cast<double>(correct) / static_cast<double>(val.size());
  return m;
}

double router_accuracy(const RouterModel& router, const std::vector<LabeledSample>& samples) {
  if (samples.empty()) throw RouterError("accuracy over an empty sample set");
  std::size_t correct = 0;
  for (const auto& s : samples) correct += route(router, s.instruction) == (s.label == 1);
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> split_samples(std::vector<LabeledSample> samples,
                                                                                std::uint64_t seed,
                                                                                double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw RouterError("split fraction must lie in (0, 1)");
  std::mt19937_64 rng(seed);
  std::shuffle(samples.begin(), samples.end(), rng);
  const auto n_train = static_cast<std::ptrdiff_t>(std::lround(train_fraction * static_cast<double>(samples.size())));
  const auto mid = samples.begin() + n_train;
  return {std::vector<LabeledSample>(samples.begin(), mid), std::vector<LabeledSample>(mid, samples.end())};
}

std::map<std::string, int> label_samples(const std::map<std::string, double>& base,
                                         const std::map<std::string, double>& cot) {
  std::vector<std::string> only_base, only_cot;
  for (const auto& [id, v] : base)
    if (!cot.contains(id)) only_base.push_back(id);
  for (const auto& [id, v] : cot)
    if (!base.contains(id)) only_cot.push_back(id);
  if (!only_base.empty() || !only_cot.empty()) {
    std::string msg = "base and cot runs cover different records;";
    auto list = [&](const char* what, const std::vector<std::string>& ids) {
      if (ids.empty()) return;
      msg += std::string(" only in ") + what + ":";
      for (const auto& id : ids) msg += " " + id;
    };
    list("base", only_base);
    list("cot", only_cot);
    throw RouterError(msg);
  }
  std::map<std::string, int> out;
  for (const auto& [id, b] : base) out[id] = cot.at(id) > b ? 1 : 0;
  return out;
}

void save_router(const RouterModel& r, const std::filesystem::path& path) {
  const json j = {{"format", "ifkit-router"},
                  {"version", 1},
                  {"feature_spec", {{"dimensions", r.feature_spec.dimensions}, {"seed", r.feature_spec.seed}}},
                  {"weights", r.weights},
                  {"bias", r.bias},
                  {"threshold", r.threshold},
                  {"val_accuracy", r.val_accuracy}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RouterError("cannot write router file " + path.string());
  out << j.dump() << '\n';
}

RouterModel load_router(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RouterError("cannot read router file " + path.string());
  try {
    const auto j = json::parse(in);
    if (j.value("format", "") != "ifkit-router") throw RouterError(path.string() + " is not a router file");
    if (j.at("version").get<int>() != 1) throw RouterError("unsupported router file version");
    RouterModel r;
    r.feature_spec.dimensions = j.at("feature_spec").at("dimensions").get<std::size_t>();
    r.feature_spec.seed = j.at("feature_spec").at("seed").get<std::uint64_t>();
    r.weights = j.at("weights").get<std::vector<double>>();
    r.bias = j.at("bias").get<double>();
    r.threshold = j.at("threshold").get<double>();
    r.val_accuracy = j.at("val_accuracy").get<double>();
    if (r.weights.size() != r.feature_spec.dimensions) throw RouterError("router weights do not match dimensions");
    return r;
  } catch (const json::exception& e) {
    throw RouterError("malformed router file " + path.string() + ": " + e.what());
  }
}

HttpRoutePredictor::HttpRoutePredictor(std::string url, double threshold) : threshold_(threshold) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw RouterError("router URL must include a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  origin_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

bool HttpRoutePredictor::use_reasoning(std::string_view instruction) const {
  httplib::Client client(origin_);
  const json body = {{"instruction", instruction}};
  auto res = client.Post(path_, body.dump(), "application/json");
  if (!res) throw RouterError("router request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw RouterError("router returned HTTP " + std::to_string(res->status));
  try {
    const auto j = json::parse(res->body);
    if (j.contains("use_cot")) return j.at("use_cot").get<bool>();
    return j.at("probability").get<double>() >= threshold_;
  } catch (const json::exception& e) {
    throw RouterError(std::string("malformed router reply: ") + e.what());
  }
}

}  // namespace ifkit
