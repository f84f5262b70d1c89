#include <algorithm>
#include <array>

#include "assets.hpp"
#include "ifkit/error.hpp"
#include "ifkit/gateway.hpp"

namespace ifkit {

namespace {

constexpr std::array<TemplateId, 6> kAllTemplates{TemplateId::cot,           TemplateId::few_shot,
                                                  TemplateId::self_reflection, TemplateId::selective_gate,
                                                  TemplateId::span_extraction, TemplateId::judge};

bool is_ident(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_'; }

// Returns the length of a "{ident}" placeholder starting at pos, or 0.
std::size_t placeholder_at(std::string_view body, std::size_t pos) {
  if (body[pos] != '{') return 0;
  std::size_t i = pos + 1;
  while (i < body.size() && is_ident(body[i])) ++i;
  if (i == pos + 1 || i >= body.size() || body[i] != '}') return 0;
  return i - pos + 1;
}

}  // namespace

std::string_view template_name(TemplateId id) {
  switch (id) {
    case TemplateId::cot: return "cot";
    case TemplateId::few_shot: return "few_shot";
    case TemplateId::self_reflection: return "self_reflection";
    case TemplateId::selective_gate: return "selective_gate";
    case TemplateId::span_extraction: return "span_extraction";
    case TemplateId::judge: return "judge";
  }
  return "cot";
}

std::optional<TemplateId> parse_template_id(std::string_view name) {
  for (auto id : kAllTemplates)
    if (template_name(id) == name) return id;
  return std::nullopt;
}

std::string_view template_text(TemplateId id) {
  switch (id) {
    case TemplateId::cot: return assets::template_cot;
    case TemplateId::few_shot: return assets::template_few_shot;
    case TemplateId::self_reflection: return assets::template_self_reflection;
    case TemplateId::selective_gate: return assets::template_selective_gate;
    case TemplateId::span_extraction: return assets::template_span_extraction;
    case TemplateId::judge: return assets::template_judge;
  }
  return {};
}

std::string templates_hash() {
  std::string all;
  for (auto id : kAllTemplates) {
    all.append(template_name(id));
    all.push_back('\0');
    all.append(template_text(id));
    all.push_back('\0');
  }
  return sha256_hex(all);
}

std::vector<std::string> template_placeholders(std::string_view body) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (const auto len = placeholder_at(body, i)) {
      std::string name(body.substr(i + 1, len - 2));
      if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(std::move(name));
      i += len - 1;
    }
  }
  return names;
}

std::string render_template(std::string_view body, const Bindings& bindings) {
  std::string out;
  out.reserve(body.size());
  std::size_t i = 0;
  while (i < body.size()) {
    if (const auto len = placeholder_at(body, i)) {
      const auto name = body.substr(i + 1, len - 2);
      const auto it = bindings.find(name);
      if (it == bindings.end()) throw TemplateError("unbound placeholder {" + std::string(name) + "}");
      out.append(it->second);
      i += len;
    } else {
      out.push_back(body[i++]);
    }
  }
  return out;
}

std::string render_prompt(TemplateId id, const Bindings& bindings) {
  try {
    return render_template(template_text(id), bindings);
  } catch (const TemplateError& e) {
    throw TemplateError(std::string(template_name(id)) + " template: " + e.what());
  }
}

}  // namespace ifkit
