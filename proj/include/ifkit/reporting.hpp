#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ifkit/strategies.hpp"

namespace ifkit {

struct RunConfig {
  std::string templates_hash;
  double temperature = 0.0;
  int max_tokens = 4096;
  std::uint64_t seed = 0;
  std::string judge_model;
  bool mock = false;
};

struct RunRecord {
  std::string run_id;
  std::string timestamp;  // UTC, ISO 8601
  std::string model_id;
  Strategy strategy = Strategy::direct;
  std::string dataset;
  RunConfig config;
  bool complete = false;
  std::vector<StrategyOutcome> outcomes;
};

nlohmann::json run_header_json(const RunRecord& run);

/// One directory per run: run.json (header) and outcomes.jsonl (one outcome
/// per line, appended as they finish).
class RunStore {
 public:
  explicit RunStore(std::filesystem::path root);

  /// Creates <root>/<run_id>/ and writes the header with complete = false.
  /// An empty run_id is generated; an existing one is an error.
  std::filesystem::path begin(RunRecord& header);
  void append(const std::filesystem::path& run_dir, const StrategyOutcome& outcome);
  /// Rewrites the header with complete = true.
  void finish(const std::filesystem::path& run_dir, const RunRecord& header);

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
  std::mutex mutex_;
};

RunRecord load_run(const std::filesystem::path& run_dir);
/// Every run directory directly under `root`, sorted by name.
std::vector<RunRecord> load_runs(const std::filesystem::path& root);

std::string utc_timestamp();

struct Aggregate {
  double mean_percent = 0.0;  // full precision
  std::size_t count = 0;
};

Aggregate aggregate(const RunRecord& run);
Aggregate aggregate(const std::vector<double>& ratios);

/// Numeric table: one labelled row per model, one column per method.
struct ScoreTable {
  std::string label_header = "model";
  std::vector<std::string> columns;
  struct Row {
    std::string label;
    std::vector<std::optional<double>> values;
  };
  std::vector<Row> rows;

  std::optional<std::size_t> column(std::string_view name) const;
};

/// Adds "<method>_delta" = method - cot after every non-cot column. Throws
/// ReportError when there is no "cot" column.
ScoreTable delta_vs_cot(const ScoreTable& table);

/// Sample Pearson coefficient. Throws ReportError on length mismatch, fewer
/// than two points or a constant series.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

/// Plain string table used for output.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  bool operator==(const Table&) const = default;
};

/// Formats to one decimal; missing cells are empty.
Table to_table(const ScoreTable& scores, int decimals = 1);
std::string format_fixed(double value, int decimals);

enum class Format { csv, markdown, jsonl };
std::optional<Format> parse_format(std::string_view name);

std::string render(const Table& table, Format format);
void emit(const Table& table, Format format, const std::filesystem::path& path);
Table parse_csv(std::string_view csv);

}  // namespace ifkit
