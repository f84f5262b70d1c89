#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ifkit/corpus.hpp"

namespace ifkit {

/// Head-averaged attention from generated tokens to prompt tokens.
/// Weights are stored at export precision (f32) and read back as double.
struct AttentionTrace {
  std::string model_id;
  std::size_t T0 = 0;  // prompt tokens
  std::size_t T = 0;   // generated tokens
  std::size_t L = 0;   // layers
  std::size_t think_start = 0;
  std::size_t answer_start = 0;
  std::vector<CharSpan> token_offsets;  // one per prompt token
  std::vector<float> data;              // [T][L][T0] row-major
  /// Constraint spans in prompt characters, when the exporter knew them.
  std::vector<std::pair<std::string, CharSpan>> constraint_spans;
  /// Exporter could not find the ANSWER marker.
  bool marker_missing = false;

  std::size_t index(std::size_t t, std::size_t l, std::size_t j) const { return (t * L + l) * T0 + j; }
  double at(std::size_t t, std::size_t l, std::size_t j) const { return data[index(t, l, j)]; }

  /// Throws AttentionError on the first violated invariant.
  void validate() const;
};

AttentionTrace load_trace(const std::filesystem::path& dir);
void save_trace(const AttentionTrace& trace, const std::filesystem::path& dir);

struct ConstraintTokenSet {
  std::vector<std::size_t> indices;  // sorted union
  std::map<std::string, std::vector<std::size_t>> per_constraint;
};

/// A token belongs to a span when their character ranges share at least one
/// character. Throws AttentionError when every span is empty or the union is.
ConstraintTokenSet map_spans_to_tokens(const std::vector<std::pair<std::string, CharSpan>>& spans,
                                       const std::vector<CharSpan>& token_offsets);

/// Spans of the record's constraints that carry one, keyed by constraint id.
std::vector<std::pair<std::string, CharSpan>> record_spans(const InstructionRecord& record);

/// alpha[l][t]
using LayerStepMatrix = std::vector<std::vector<double>>;

/// alpha[l][t] = mean over j in C of data[t][l][j]. OpenMP over (l, t).
LayerStepMatrix constraint_attention(const AttentionTrace& trace, const ConstraintTokenSet& tokens);

namespace serial {
LayerStepMatrix constraint_attention(const AttentionTrace& trace, const ConstraintTokenSet& tokens);
}  // namespace serial

/// Mean over layers, one value per step.
std::vector<double> layer_mean(const LayerStepMatrix& alpha);

/// Mean over steps [answer_start, T), one value per layer.
std::vector<double> answer_phase_mean(const LayerStepMatrix& alpha, std::size_t answer_start);

struct AttentionDrop {
  std::vector<double> per_layer;  // base - cot
  double mean = 0.0;
};

AttentionDrop attention_drop(const std::vector<double>& base, const std::vector<double>& cot);

struct TraceMetrics {
  LayerStepMatrix alpha;
  std::vector<double> alpha_bar;
  std::vector<double> beta_bar;
};

/// Spans come from `spans` when non-empty, otherwise from the trace itself.
TraceMetrics trace_metrics(const AttentionTrace& trace,
                           const std::vector<std::pair<std::string, CharSpan>>& spans = {});

enum class Outcome { win, lose, tie };

std::string_view outcome_name(Outcome o);

struct OutcomeGroups {
  std::vector<std::string> win;
  std::vector<std::string> lose;
  std::vector<std::string> tie;
  std::map<std::string, Outcome> by_id;
};

/// WIN iff cot > base, LOSE iff cot < base, else TIE. Throws AttentionError
/// when the id sets differ.
OutcomeGroups group_outcomes(const std::map<std::string, double>& base, const std::map<std::string, double>& cot);

}  // namespace ifkit
