#include "ifkit/reporting.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ifkit/error.hpp"
#include "ifkit/gateway.hpp"

namespace ifkit {

using nlohmann::json;

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

json run_header_json(const RunRecord& run) {
  return {{"run_id", run.run_id},
          {"timestamp", run.timestamp},
          {"model_id", run.model_id},
          {"strategy", strategy_name(run.strategy)},
          {"dataset", run.dataset},
          {"complete", run.complete},
          {"config",
           {{"templates_hash", run.config.templates_hash},
            {"temperature", run.config.temperature},
            {"max_tokens", run.config.max_tokens},
            {"seed", run.config.seed},
            {"judge_model", run.config.judge_model},
            {"mock", run.config.mock}}}};
}

namespace {

std::string sanitize(std::string_view s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.') ? c : '_';
  return out;
}

void write_header(const std::filesystem::path& run_dir, const RunRecord& header) {
  const auto tmp = run_dir / "run.json.tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ReportError("cannot write " + tmp.string());
    out << run_header_json(header).dump(2) << '\n';
  }
  std::filesystem::rename(tmp, run_dir / "run.json");
}

}  // namespace

RunStore::RunStore(std::filesystem::path root) : root_(std::move(root)) {}

std::filesystem::path RunStore::begin(RunRecord& header) {
  std::lock_guard lock(mutex_);
  std::filesystem::create_directories(root_);
  if (header.timestamp.empty()) header.timestamp = utc_timestamp();
  if (header.run_id.empty()) {
    std::string stamp;
    for (char c : header.timestamp)
      if (std::isdigit(static_cast<unsigned char>(c))) stamp += c;
    const std::string base = sanitize(header.model_id) + "-" + std::string(strategy_name(header.strategy)) + "-" + stamp;
    header.run_id = base;
    for (int n = 2; std::filesystem::exists(root_ / header.run_id); ++n) header.run_id = base + "-" + std::to_string(n);
  }
  const auto dir = root_ / header.run_id;
  if (!std::filesystem::create_directory(dir)) throw ReportError("run id already exists: " + header.run_id);
  header.complete = false;
  write_header(dir, header);
  std::ofstream(dir / "outcomes.jsonl", std::ios::binary);
  return dir;
}

void RunStore::append(const std::filesystem::path& run_dir, const StrategyOutcome& outcome) {
  std::lock_guard lock(mutex_);
  std::ofstream out(run_dir / "outcomes.jsonl", std::ios::binary | std::ios::app);
  if (!out) throw ReportError("cannot append to " + (run_dir / "outcomes.jsonl").string());
  out << to_json(outcome).dump() << '\n';
}

void RunStore::finish(const std::filesystem::path& run_dir, const RunRecord& header) {
  std::lock_guard lock(mutex_);
  RunRecord done = header;
  done.complete = true;
  write_header(run_dir, done);
}

RunRecord load_run(const std::filesystem::path& run_dir) {
  RunRecord r;
  std::ifstream hin(run_dir / "run.json", std::ios::binary);
  if (!hin) throw ReportError("cannot read " + (run_dir / "run.json").string());
  try {
    const auto h = json::parse(hin);
    r.run_id = h.at("run_id").get<std::string>();
    r.timestamp = h.at("timestamp").get<std::string>();
    r.model_id = h.at("model_id").get<std::string>();
    const auto s = parse_strategy(h.at("strategy").get<std::string>());
    if (!s) throw ReportError("unknown strategy in " + (run_dir / "run.json").string());
    r.strategy = *s;
    r.dataset = h.at("dataset").get<std::string>();
    r.complete = h.at("complete").get<bool>();
    const auto& c = h.at("config");
    r.config.templates_hash = c.at("templates_hash").get<std::string>();
    r.config.temperature = c.at("temperature").get<double>();
    r.config.max_tokens = c.at("max_tokens").get<int>();
    r.config.seed = c.value("seed", std::uint64_t{0});
    r.config.judge_model = c.value("judge_model", "");
    r.config.mock = c.value("mock", false);
  } catch (const json::exception& e) {
    throw ReportError("malformed " + (run_dir / "run.json").string() + ": " + e.what());
  }

  std::ifstream oin(run_dir / "outcomes.jsonl", std::ios::binary);
  if (!oin) throw ReportError("cannot read " + (run_dir / "outcomes.jsonl").string());
  std::string line;
  std::size_t n = 0;
  while (std::getline(oin, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      r.outcomes.push_back(outcome_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ReportError((run_dir / "outcomes.jsonl").string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return r;
}

std::vector<RunRecord> load_runs(const std::filesystem::path& root) {
  if (std::filesystem::exists(root / "run.json")) return {load_run(root)};
  std::vector<std::filesystem::path> dirs;
  for (const auto& e : std::filesystem::directory_iterator(root))
    if (e.is_directory() && std::filesystem::exists(e.path() / "run.json")) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<RunRecord> out;
  for (const auto& d : dirs) out.push_back(load_run(d));
  return out;
}

Aggregate aggregate(const std::vector<double>& ratios) {
  if (ratios.empty()) throw ReportError("cannot aggregate an empty run");
  double sum = 0.0;
  for (double r : ratios) sum += r;
  return {100.0 * sum / static_cast<double>(ratios.size()), ratios.size()};
}

Aggregate aggregate(const RunRecord& run) {
  if (run.outcomes.empty()) throw ReportError("run '" + run.run_id + "' has no outcomes");
  std::vector<double> ratios;
  ratios.reserve(run.outcomes.size());
  for (const auto& o : run.outcomes) ratios.push_back(o.scored_ratio());
  return aggregate(ratios);
}

std::optional<std::size_t> ScoreTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  return std::nullopt;
}

ScoreTable delta_vs_cot(const ScoreTable& table) {
  const auto cot = table.column("cot");
  if (!cot) throw ReportError("table has no 'cot' column to compare against");
  ScoreTable out;
  out.label_header = table.label_header;
  std::vector<std::pair<std::size_t, bool>> plan;  // (source column, is delta)
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    out.columns.push_back(table.columns[c]);
    plan.emplace_back(c, false);
    if (c != *cot) {
      out.columns.push_back(table.columns[c] + "_delta");
      plan.emplace_back(c, true);
    }
  }
  for (const auto& row : table.rows) {
    if (row.values.size() != table.columns.size())
      throw ReportError("row '" + row.label + "' has " + std::to_string(row.values.size()) + " values for " +
                        std::to_string(table.columns.size()) + " columns");
    ScoreTable::Row r{row.label, {}};
    const auto& base = row.values[*cot];
    for (const auto& [c, is_delta] : plan) {
      if (!is_delta) {
        r.values.push_back(row.values[c]);
      } else if (row.values[c] && base) {
        r.values.emplace_back(*row.values[c] - *base);
      } else {
        r.values.emplace_back(std::nullopt);
      }
    }
    out.rows.push_back(std::move(r));
  }
  return out;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw ReportError("pearson: series lengths differ");
  if (xs.size() < 2) throw ReportError("pearson needs at least two points");
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw ReportError("pearson is undefined for a constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::string format_fixed(double value, int decimals) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(decimals) << value;
  auto s = os.str();
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

Table to_table(const ScoreTable& scores, int decimals) {
  Table t;
  t.header.push_back(scores.label_header);
  t.header.insert(t.header.end(), scores.columns.begin(), scores.columns.end());
  for (const auto& row : scores.rows) {
    std::vector<std::string> cells{row.label};
    for (const auto& v : row.values) cells.push_back(v ? format_fixed(*v, decimals) : "");
    t.rows.push_back(std::move(cells));
  }
  return t;
}

std::optional<Format> parse_format(std::string_view name) {
  if (name == "csv") return Format::csv;
  if (name == "markdown" || name == "md") return Format::markdown;
  if (name == "jsonl") return Format::jsonl;
  return std::nullopt;
}

namespace {

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string md_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') {
      out += "\\|";
    } else if (c == '\n') {
      out += "<br>";
    } else if (c != '\r') {
      out += c;
    }
  }
  return out;
}

void csv_line(std::string& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += csv_cell(cells[i]);
  }
  out += '\n';
}

void md_line(std::string& out, const std::vector<std::string>& cells) {
  out += '|';
  for (const auto& c : cells) out += ' ' + md_cell(c) + " |";
  out += '\n';
}

}  // namespace

std::string render(const Table& table, Format format) {
  std::string out;
  switch (format) {
    case Format::csv:
      csv_line(out, table.header);
      for (const auto& r : table.rows) csv_line(out, r);
      break;
    case Format::markdown:
      md_line(out, table.header);
      out += '|';
      for (std::size_t i = 0; i < table.header.size(); ++i) out += " --- |";
      out += '\n';
      for (const auto& r : table.rows) md_line(out, r);
      break;
    case Format::jsonl:
      for (const auto& r : table.rows) {
        nlohmann::ordered_json j = nlohmann::ordered_json::object();
        for (std::size_t i = 0; i < table.header.size(); ++i) j[table.header[i]] = i < r.size() ? r[i] : "";
        out += j.dump() + '\n';
      }
      break;
  }
  return out;
}

void emit(const Table& table, Format format, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ReportError("cannot write " + path.string());
  out << render(table, format);
  if (!out) throw ReportError("write failed for " + path.string());
}

Table parse_csv(std::string_view csv) {
  std::vector<std::vector<std::string>> lines;
  std::vector<std::string> cur;
  std::string cell;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < csv.size(); ++i) {
    const char c = csv[i];
    any = true;
    if (quoted) {
      if (c == '"') {
        if (i + 1 < csv.size() && csv[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cur.push_back(std::move(cell));
      cell.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < csv.size() && csv[i + 1] == '\n') ++i;
      cur.push_back(std::move(cell));
      cell.clear();
      lines.push_back(std::move(cur));
      cur.clear();
      any = false;
    } else {
      cell += c;
    }
  }
  if (quoted) throw ReportError("unterminated quoted CSV field");
  if (any) {
    cur.push_back(std::move(cell));
    lines.push_back(std::move(cur));
  }
  Table t;
  if (lines.empty()) return t;
  t.header = std::move(lines.front());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].size() != t.header.size())
      throw ReportError("CSV row " + std::to_string(i) + " has " + std::to_string(lines[i].size()) + " fields, header has " +
                        std::to_string(t.header.size()));
    t.rows.push_back(std::move(lines[i]));
  }
  return t;
}

}  // namespace ifkit
