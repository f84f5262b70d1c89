#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ifkit/corpus.hpp"
#include "ifkit/gateway.hpp"
#include "ifkit/verifier.hpp"

namespace ifkit {

enum class Strategy { direct, cot, few_shot, self_reflection, self_selective, classifier_selective };

std::string_view strategy_name(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);
const std::vector<Strategy>& all_strategies();

struct StrategyOutcome {
  std::string record_id;
  Strategy strategy = Strategy::direct;
  std::string raw_text;  // completion the answer was taken from
  std::string think;
  std::string answer;
  std::optional<bool> gate_decision;
  std::optional<bool> reflection_satisfies;
  InstructionResult result;
  /// Whitespace tokens in the THINK segment.
  std::int64_t think_tokens = 0;
  std::int64_t completion_tokens = 0;
  bool usage_reported = false;
  /// Answer-generating completions (CoT pass, reflection pass, direct pass).
  int calls_made = 0;
  /// Routing completions (the self-selective YES/NO gate).
  int gate_calls = 0;
  bool clean_segmentation = true;
  /// Question-level score, for corpora that carry scoring questions.
  std::optional<double> question_ratio;
  bool selection_flag = false;
  std::vector<std::string> warnings;

  /// question_ratio when present, else the constraint ratio.
  double scored_ratio() const { return question_ratio.value_or(result.ratio); }
};

nlohmann::json to_json(const StrategyOutcome& outcome);
StrategyOutcome outcome_from_json(const nlohmann::json& j);

struct FewShotExample {
  std::string instruction;
  std::string think;
  std::string answer;
};

using FewShotSet = std::vector<FewShotExample>;

/// Shipped shot sets: 4 for IFEval, 3 for ComplexBench.
const FewShotSet& default_shots(CorpusSource source);
FewShotSet load_shots(const std::filesystem::path& path);
FewShotSet parse_shots(std::string_view jsonl);
/// INSTRUCTION/THINK/ANSWER blocks separated by blank lines.
std::string format_shots(const FewShotSet& shots);

// Router -------------------------------------------------------------------

struct FeatureSpec {
  std::size_t dimensions = 4096;
  std::uint64_t seed = 0x5eed;
};

/// Hashed unigram + bigram counts over lowercased alphanumeric tokens,
/// L2-normalised. Sparse (index, value) pairs sorted by index.
std::vector<std::pair<std::size_t, double>> hashed_features(std::string_view text, const FeatureSpec& spec);

struct RouterModel {
  FeatureSpec feature_spec;
  std::vector<double> weights;
  double bias = 0.0;
  double threshold = 0.5;
  double val_accuracy = 0.0;

  double probability(std::string_view instruction) const;
};

/// True iff sigmoid(w . x + b) >= threshold.
bool route(const RouterModel& router, std::string_view instruction);

struct LabeledSample {
  std::string record_id;
  std::string instruction;
  int label = 0;
};

struct TrainOptions {
  FeatureSpec features;
  std::uint64_t seed = 0;
  double learning_rate = 1.0;
  int max_epochs = 500;
  double tolerance = 1e-6;
  double validation_fraction = 0.1;
};

/// Full-batch gradient descent on the logistic loss. Requires at least 20
/// samples with both classes; 10% are held out for val_accuracy.
RouterModel train_router(const std::vector<LabeledSample>& samples, const TrainOptions& options = {});

double router_accuracy(const RouterModel& router, const std::vector<LabeledSample>& samples);

/// Seeded shuffle, then the first round(n * train_fraction) samples train.
std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> split_samples(std::vector<LabeledSample> samples,
                                                                                std::uint64_t seed,
                                                                                double train_fraction = 0.5);

/// 1 iff cot ratio strictly exceeds base ratio. Throws RouterError listing the
/// symmetric difference when the id sets differ.
std::map<std::string, int> label_samples(const std::map<std::string, double>& base,
                                         const std::map<std::string, double>& cot);

void save_router(const RouterModel& router, const std::filesystem::path& path);
RouterModel load_router(const std::filesystem::path& path);

/// Anything that can answer "should this instruction use CoT".
class RoutePredictor {
 public:
  virtual ~RoutePredictor() = default;
  virtual bool use_reasoning(std::string_view instruction) const = 0;
};

class LinearRoutePredictor final : public RoutePredictor {
 public:
  explicit LinearRoutePredictor(RouterModel model) : model_(std::move(model)) {}
  bool use_reasoning(std::string_view instruction) const override { return route(model_, instruction); }
  const RouterModel& model() const { return model_; }

 private:
  RouterModel model_;
};

/// External predictor: POST {url} with {"instruction": ...}; the reply carries
/// either {"use_cot": bool} or {"probability": p} compared against threshold.
class HttpRoutePredictor final : public RoutePredictor {
 public:
  explicit HttpRoutePredictor(std::string url, double threshold = 0.5);
  bool use_reasoning(std::string_view instruction) const override;

 private:
  std::string origin_;
  std::string path_;
  double threshold_;
};

// Strategy execution -------------------------------------------------------

struct StrategyContext {
  Gateway* gateway = nullptr;
  std::string model;
  int max_tokens = 4096;
  double temperature = 0.0;
  const Verifier* verifier = nullptr;         // default_verifier() when null
  const RoutePredictor* router = nullptr;     // classifier_selective only
  const FewShotSet* shots = nullptr;          // few_shot; defaults by corpus source
  std::string judge_model;                    // judge questions; empty means `model`
};

struct ReflectionParse {
  std::string reflection;
  std::optional<bool> satisfies;
  std::string final_answer;
};

/// Throws ReflectionParseError when no line-initial "FINAL ANSWER:" exists.
ReflectionParse parse_reflection(std::string_view completion);

struct GateDecision {
  bool use_reasoning = true;
  /// Reply was neither YES nor NO; defaulted to reasoning.
  bool warning = false;
};

GateDecision parse_gate(std::string_view completion);

/// Runs one strategy on one record and scores the answer (verifier + cascade).
StrategyOutcome run_strategy(Strategy strategy, const InstructionRecord& record, const StrategyContext& context);

/// Mean effective ratio when each record uses CoT iff use_cot[id].
double selective_mean(const std::map<std::string, double>& base, const std::map<std::string, double>& cot,
                      const std::map<std::string, int>& use_cot);

}  // namespace ifkit
