#include "ifkit/attention.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "ifkit/error.hpp"

namespace ifkit {

using nlohmann::json;

namespace {

constexpr double kRowSumSlack = 1e-4;

std::uint32_t byteswap32(std::uint32_t v) {
  return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
}

std::string at_step(std::size_t t, std::size_t l) {
  return "step " + std::to_string(t) + ", layer " + std::to_string(l);
}

}  // namespace

void AttentionTrace::validate() const {
  if (T0 == 0) throw AttentionError("trace has no prompt tokens");
  if (L == 0) throw AttentionError("trace has no layers");
  if (!(think_start <= answer_start && answer_start <= T))
    throw AttentionError("markers must satisfy 0 <= think_start <= answer_start <= T (got " +
                         std::to_string(think_start) + ", " + std::to_string(answer_start) + ", T=" +
                         std::to_string(T) + ")");
  if (token_offsets.size() != T0)
    throw AttentionError("token_offsets has " + std::to_string(token_offsets.size()) + " entries, T0 is " +
                         std::to_string(T0));
  for (std::size_t j = 0; j < T0; ++j) {
    if (token_offsets[j].start > token_offsets[j].end)
      throw AttentionError("token " + std::to_string(j) + " has start > end");
    if (j > 0 && token_offsets[j].start < token_offsets[j - 1].end)
      throw AttentionError("token offsets overlap or are out of order at token " + std::to_string(j));
  }
  if (data.size() != T * L * T0)
    throw AttentionError("attention data has " + std::to_string(data.size()) + " values, expected T*L*T0 = " +
                         std::to_string(T * L * T0));
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t l = 0; l < L; ++l) {
      double sum = 0.0;
      for (std::size_t j = 0; j < T0; ++j) {
        const double w = at(t, l, j);
        if (!(w >= 0.0 && w <= 1.0))
          throw AttentionError("weight outside [0,1] at " + at_step(t, l) + ", token " + std::to_string(j));
        sum += w;
      }
      if (sum > 1.0 + kRowSumSlack) throw AttentionError("prompt attention sums above 1 at " + at_step(t, l));
    }
  }
}

AttentionTrace load_trace(const std::filesystem::path& dir) {
  AttentionTrace tr;
  const auto meta_path = dir / "meta.json";
  std::ifstream meta_in(meta_path, std::ios::binary);
  if (!meta_in) throw AttentionError("cannot read " + meta_path.string());
  try {
    const auto m = json::parse(meta_in);
    if (m.value("dtype", "f32") != "f32") throw AttentionError(meta_path.string() + ": dtype must be f32");
    if (m.value("layout", "[T][L][T0] row-major") != "[T][L][T0] row-major")
      throw AttentionError(meta_path.string() + ": unsupported layout");
    tr.model_id = m.at("model_id").get<std::string>();
    tr.T0 = m.at("T0").get<std::size_t>();
    tr.T = m.at("T").get<std::size_t>();
    tr.L = m.at("L").get<std::size_t>();
    tr.think_start = m.at("think_start").get<std::size_t>();
    tr.answer_start = m.at("answer_start").get<std::size_t>();
    for (const auto& off : m.at("token_offsets")) tr.token_offsets.push_back({off.at(0), off.at(1)});
    if (m.contains("constraint_spans")) {
      for (const auto& s : m.at("constraint_spans"))
        tr.constraint_spans.push_back(
            {s.at("constraint_id").get<std::string>(), {s.at("start").get<std::size_t>(), s.at("end").get<std::size_t>()}});
    }
    tr.marker_missing = m.value("marker_missing", false);
  } catch (const json::exception& e) {
    throw AttentionError("malformed " + meta_path.string() + ": " + e.what());
  }

  const auto data_path = dir / "attn.f32";
  std::ifstream data_in(data_path, std::ios::binary | std::ios::ate);
  if (!data_in) throw AttentionError("cannot read " + data_path.string());
  const auto bytes = static_cast<std::size_t>(data_in.tellg());
  const std::size_t expected = tr.T * tr.L * tr.T0;
  if (bytes != expected * 4)
    throw AttentionError(data_path.string() + " holds " + std::to_string(bytes) + " bytes, expected " +
                         std::to_string(expected * 4));
  data_in.seekg(0);
  std::vector<std::uint32_t> raw(expected);
  data_in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
  tr.data.resize(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    const std::uint32_t v = std::endian::native == std::endian::little ? raw[i] : byteswap32(raw[i]);
    std::memcpy(&tr.data[i], &v, 4);
  }
  tr.validate();
  return tr;
}

void save_trace(const AttentionTrace& tr, const std::filesystem::path& dir) {
  tr.validate();
  std::filesystem::create_directories(dir);
  json offsets = json::array();
  for (const auto& o : tr.token_offsets) offsets.push_back({o.start, o.end});
  json m = {{"model_id", tr.model_id},
            {"T0", tr.T0},
            {"T", tr.T},
            {"L", tr.L},
            {"think_start", tr.think_start},
            {"answer_start", tr.answer_start},
            {"token_offsets", offsets},
            {"dtype", "f32"},
            {"layout", "[T][L][T0] row-major"}};
  if (!tr.constraint_spans.empty()) {
    json spans = json::array();
    for (const auto& [id, s] : tr.constraint_spans)
      spans.push_back({{"constraint_id", id}, {"start", s.start}, {"end", s.end}});
    m["constraint_spans"] = spans;
  }
  if (tr.marker_missing) m["marker_missing"] = true;

  std::ofstream meta_out(dir / "meta.json", std::ios::binary);
  if (!meta_out) throw AttentionError("cannot write " + (dir / "meta.json").string());
  meta_out << m.dump(2) << '\n';

  std::vector<std::uint32_t> raw(tr.data.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    std::uint32_t v;
    std::memcpy(&v, &tr.data[i], 4);
    raw[i] = std::endian::native == std::endian::little ? v : byteswap32(v);
  }
  std::ofstream data_out(dir / "attn.f32", std::ios::binary);
  if (!data_out) throw AttentionError("cannot write " + (dir / "attn.f32").string());
  data_out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
}

ConstraintTokenSet map_spans_to_tokens(const std::vector<std::pair<std::string, CharSpan>>& spans,
                                       const std::vector<CharSpan>& token_offsets) {
  const bool all_empty =
      std::all_of(spans.begin(), spans.end(), [](const auto& s) { return s.second.end <= s.second.start; });
  if (all_empty) throw AttentionError("no non-empty constraint span; constraint attention is undefined");
  const std::size_t prompt_end = token_offsets.empty() ? 0 : token_offsets.back().end;

  ConstraintTokenSet out;
  std::set<std::size_t> all;
  for (const auto& [id, span] : spans) {
    if (span.start > span.end) throw AttentionError("span for '" + id + "' has start > end");
    if (span.end > prompt_end) throw AttentionError("span for '" + id + "' extends past the prompt");
    auto& mine = out.per_constraint[id];
    for (std::size_t j = 0; j < token_offsets.size(); ++j) {
      const auto lo = std::max(span.start, token_offsets[j].start);
      const auto hi = std::min(span.end, token_offsets[j].end);
      if (lo < hi) {
        mine.push_back(j);
        all.insert(j);
      }
    }
  }
  if (all.empty()) throw AttentionError("constraint spans cover no prompt token");
  out.indices.assign(all.begin(), all.end());
  return out;
}

std::vector<std::pair<std::string, CharSpan>> record_spans(const InstructionRecord& record) {
  std::vector<std::pair<std::string, CharSpan>> out;
  for (const auto& c : record.constraints)
    if (c.span) out.emplace_back(c.id, *c.span);
  return out;
}

namespace {

void check_tokens(const AttentionTrace& trace, const ConstraintTokenSet& tokens) {
  if (tokens.indices.empty()) throw AttentionError("constraint token set is empty");
  for (auto j : tokens.indices)
    if (j >= trace.T0)
      throw AttentionError("constraint token " + std::to_string(j) + " out of range (T0=" + std::to_string(trace.T0) +
                           ")");
}

}  // namespace

LayerStepMatrix constraint_attention(const AttentionTrace& trace, const ConstraintTokenSet& tokens) {
  check_tokens(trace, tokens);
  LayerStepMatrix alpha(trace.L, std::vector<double>(trace.T, 0.0));
  const auto& idx = tokens.indices;
  const double n = static_cast<double>(idx.size());
  const auto L = static_cast<long long>(trace.L);
  const auto T = static_cast<long long>(trace.T);
#pragma omp parallel for collapse(2) schedule(static)
  for (long long l = 0; l < L; ++l) {
    for (long long t = 0; t < T; ++t) {
      const float* row = trace.data.data() + trace.index(static_cast<std::size_t>(t), static_cast<std::size_t>(l), 0);
      double sum = 0.0;
      for (auto j : idx) sum += static_cast<double>(row[j]);
      alpha[static_cast<std::size_t>(l)][static_cast<std::size_t>(t)] = sum / n;
    }
  }
  return alpha;
}

LayerStepMatrix serial::constraint_attention(const AttentionTrace& trace, const ConstraintTokenSet& tokens) {
  check_tokens(trace, tokens);
  LayerStepMatrix alpha(trace.L, std::vector<double>(trace.T, 0.0));
  for (std::size_t l = 0; l < trace.L; ++l) {
    for (std::size_t t = 0; t < trace.T; ++t) {
      double sum = 0.0;
      for (auto j : tokens.indices) sum += trace.at(t, l, j);
      alpha[l][t] = sum / static_cast<double>(tokens.indices.size());
    }
  }
  return alpha;
}

std::vector<double> layer_mean(const LayerStepMatrix& alpha) {
  if (alpha.empty()) throw AttentionError("layer_mean of an empty matrix");
  const auto T = alpha.front().size();
  std::vector<double> out(T, 0.0);
  for (const auto& row : alpha) {
    if (row.size() != T) throw AttentionError("ragged attention matrix");
    for (std::size_t t = 0; t < T; ++t) out[t] += row[t];
  }
  for (auto& v : out) v /= static_cast<double>(alpha.size());
  return out;
}

std::vector<double> answer_phase_mean(const LayerStepMatrix& alpha, std::size_t answer_start) {
  std::vector<double> out;
  out.reserve(alpha.size());
  for (const auto& row : alpha) {
    if (answer_start >= row.size())
      throw AttentionError("empty answer phase: answer_start " + std::to_string(answer_start) + " >= T " +
                           std::to_string(row.size()));
    const double sum = std::accumulate(row.begin() + static_cast<std::ptrdiff_t>(answer_start), row.end(), 0.0);
    out.push_back(sum / static_cast<double>(row.size() - answer_start));
  }
  return out;
}

AttentionDrop attention_drop(const std::vector<double>& base, const std::vector<double>& cot) {
  if (base.size() != cot.size())
    throw AttentionError("layer count mismatch: base has " + std::to_string(base.size()) + ", cot has " +
                         std::to_string(cot.size()));
  if (base.empty()) throw AttentionError("attention_drop over zero layers");
  AttentionDrop d;
  for (std::size_t l = 0; l < base.size(); ++l) d.per_layer.push_back(base[l] - cot[l]);
  d.mean = std::accumulate(d.per_layer.begin(), d.per_layer.end(), 0.0) / static_cast<double>(base.size());
  return d;
}

TraceMetrics trace_metrics(const AttentionTrace& trace, const std::vector<std::pair<std::string, CharSpan>>& spans) {
  const auto& use = spans.empty() ? trace.constraint_spans : spans;
  if (use.empty()) throw AttentionError("no constraint spans for trace of " + trace.model_id);
  const auto tokens = map_spans_to_tokens(use, trace.token_offsets);
  TraceMetrics m;
  m.alpha = constraint_attention(trace, tokens);
  m.alpha_bar = layer_mean(m.alpha);
  m.beta_bar = answer_phase_mean(m.alpha, trace.answer_start);
  return m;
}

std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::win: return "WIN";
    case Outcome::lose: return "LOSE";
    case Outcome::tie: return "TIE";
  }
  return "TIE";
}

OutcomeGroups group_outcomes(const std::map<std::string, double>& base, const std::map<std::string, double>& cot) {
  std::string missing;
  for (const auto& [id, v] : base)
    if (!cot.contains(id)) missing += " " + id + " (no cot)";
  for (const auto& [id, v] : cot)
    if (!base.contains(id)) missing += " " + id + " (no base)";
  if (!missing.empty()) throw AttentionError("base and cot results differ in record ids:" + missing);

  OutcomeGroups g;
  for (const auto& [id, b] : base) {
    const double c = cot.at(id);
    const Outcome o = c > b ? Outcome::win : (c < b ? Outcome::lose : Outcome::tie);
    g.by_id[id] = o;
    (o == Outcome::win ? g.win : o == Outcome::lose ? g.lose : g.tie).push_back(id);
  }
  return g;
}

}  // namespace ifkit
