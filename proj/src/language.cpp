#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <sstream>

#include "ifkit/text.hpp"
#include "ifkit/verifier.hpp"

namespace ifkit {

namespace {

enum class Script {
  latin, greek, cyrillic, armenian, hebrew, arabic, devanagari, bengali, gurmukhi, gujarati,
  tamil, telugu, kannada, malayalam, thai, georgian, hangul, hiragana, katakana, han, other,
};

struct Range {
  char32_t lo, hi;
  Script script;
};

constexpr std::array<Range, 32> kRanges{{
    {0x41, 0x5A, Script::latin},        {0x61, 0x7A, Script::latin},        {0xC0, 0xD6, Script::latin},
    {0xD8, 0xF6, Script::latin},        {0xF8, 0x24F, Script::latin},       {0x1E00, 0x1EFF, Script::latin},
    {0x370, 0x3FF, Script::greek},      {0x1F00, 0x1FFF, Script::greek},    {0x400, 0x52F, Script::cyrillic},
    {0x531, 0x58F, Script::armenian},   {0x591, 0x5FF, Script::hebrew},     {0x600, 0x6FF, Script::arabic},
    {0x750, 0x77F, Script::arabic},     {0xFB50, 0xFDFF, Script::arabic},   {0xFE70, 0xFEFF, Script::arabic},
    {0x900, 0x963, Script::devanagari}, {0x970, 0x97F, Script::devanagari}, {0x980, 0x9FF, Script::bengali},
    {0xA00, 0xA7F, Script::gurmukhi},   {0xA80, 0xAFF, Script::gujarati},   {0xB80, 0xBFF, Script::tamil},
    {0xC00, 0xC7F, Script::telugu},     {0xC80, 0xCFF, Script::kannada},    {0xD00, 0xD7F, Script::malayalam},
    {0xE00, 0xE7F, Script::thai},       {0x10A0, 0x10FF, Script::georgian}, {0x1100, 0x11FF, Script::hangul},
    {0x3130, 0x318F, Script::hangul},   {0xAC00, 0xD7AF, Script::hangul},   {0x3040, 0x309F, Script::hiragana},
    {0x30A0, 0x30FF, Script::katakana}, {0x4E00, 0x9FFF, Script::han},
}};

Script script_of(char32_t cp) {
  for (const auto& r : kRanges)
    if (cp >= r.lo && cp <= r.hi) return r.script;
  if ((cp >= 0x3400 && cp <= 0x4DBF) || (cp >= 0xF900 && cp <= 0xFAFF)) return Script::han;
  return Script::other;
}

const std::map<std::string, std::set<Script>, std::less<>>& script_languages() {
  static const std::map<std::string, std::set<Script>, std::less<>> m = {
      {"ru", {Script::cyrillic}},   {"uk", {Script::cyrillic}},  {"bg", {Script::cyrillic}},
      {"mk", {Script::cyrillic}},   {"kk", {Script::cyrillic}},  {"el", {Script::greek}},
      {"hy", {Script::armenian}},   {"he", {Script::hebrew}},    {"ar", {Script::arabic}},
      {"fa", {Script::arabic}},     {"ur", {Script::arabic}},    {"hi", {Script::devanagari}},
      {"mr", {Script::devanagari}}, {"ne", {Script::devanagari}}, {"sa", {Script::devanagari}},
      {"bn", {Script::bengali}},    {"pa", {Script::gurmukhi}},  {"gu", {Script::gujarati}},
      {"ta", {Script::tamil}},      {"te", {Script::telugu}},    {"kn", {Script::kannada}},
      {"ml", {Script::malayalam}},  {"th", {Script::thai}},      {"ka", {Script::georgian}},
      {"ko", {Script::hangul}},     {"zh", {Script::han}},
      {"ja", {Script::hiragana, Script::katakana, Script::han}},
  };
  return m;
}

// Words ambiguous between the listed languages are left out of every list.
const std::map<std::string, std::set<std::string, std::less<>>, std::less<>>& stopwords() {
  static const std::map<std::string, std::set<std::string, std::less<>>, std::less<>> m = {
      {"en", {"the", "and", "of", "to", "is", "are", "was", "were", "with", "that", "this", "for", "you", "your",
              "it", "on", "be", "have", "has", "not", "but", "they", "we", "she", "his", "her", "from", "at", "by",
              "will", "would", "can", "i", "my", "what", "which", "about", "there", "their", "an", "if", "one"}},
      {"it", {"di", "che", "è", "nel", "nella", "della", "dei", "delle", "degli", "per", "sono", "questo", "questa",
              "anche", "più", "sul", "sulla", "sull", "dell", "alla", "nello", "molto", "perché", "quando", "ha",
              "ho", "gli", "dal", "dalla", "negli"}},
      {"es", {"el", "los", "las", "y", "por", "para", "con", "del", "al", "pero", "más", "este", "esta", "está",
              "muy", "también", "yo", "hay", "fue", "sus", "su"}},
      {"fr", {"le", "les", "des", "du", "et", "est", "une", "dans", "pour", "pas", "qui", "sur", "au", "aux",
              "avec", "ce", "cette", "il", "elle", "nous", "vous", "ils", "je", "sont", "ou", "où", "très", "été"}},
      {"pt", {"o", "os", "do", "da", "dos", "em", "um", "não", "na", "nas", "ao", "muito", "também", "são", "você",
              "eu", "ele", "ela", "é", "uma", "com", "foi"}},
      {"de", {"der", "die", "und", "ist", "nicht", "ein", "eine", "zu", "mit", "sich", "auf", "für", "den", "dem",
              "von", "ich", "sie", "wir", "auch", "noch", "nur", "wie", "aber", "oder", "sind", "war", "werden",
              "im", "bei"}},
      {"nl", {"het", "een", "van", "ik", "dat", "niet", "zijn", "op", "te", "met", "voor", "er", "maar", "om",
              "ook", "als", "bij", "nog", "wat", "dit", "wij", "naar", "heeft", "hebben", "deze", "worden"}},
  };
  return m;
}

char32_t fold_latin(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 32;
  return cp;
}

std::string share_detail(std::size_t in_script, std::size_t letters) {
  std::ostringstream os;
  os << in_script << " of " << letters << " letters in the target script";
  return os.str();
}

}  // namespace

std::vector<std::string> ScriptStopwordDetector::supported_languages() {
  std::vector<std::string> out;
  for (const auto& [code, scripts] : script_languages()) out.push_back(code);
  for (const auto& [code, words] : stopwords()) out.push_back(code);
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<RuleCheck> ScriptStopwordDetector::check(std::string_view input, std::string_view language_code) const {
  const auto code = text::to_lower(language_code);
  const auto cps = text::decode_utf8(input);

  std::size_t letters = 0;
  std::map<Script, std::size_t> per_script;
  for (auto cp : cps) {
    const auto s = script_of(cp);
    if (s == Script::other) continue;
    ++letters;
    ++per_script[s];
  }

  if (auto it = script_languages().find(code); it != script_languages().end()) {
    std::size_t in_script = 0;
    for (auto s : it->second) in_script += per_script[s];
    if (letters == 0) return RuleCheck{false, "no letters found"};
    const bool ok = static_cast<double>(in_script) >= 0.9 * static_cast<double>(letters);
    return RuleCheck{ok, share_detail(in_script, letters)};
  }

  const auto sw = stopwords().find(code);
  if (sw == stopwords().end()) return std::nullopt;

  if (letters == 0) return RuleCheck{false, "no letters found"};
  const auto latin = per_script[Script::latin];
  if (static_cast<double>(latin) < 0.9 * static_cast<double>(letters))
    return RuleCheck{false, "only " + share_detail(latin, letters) + " (Latin)"};

  std::map<std::string, std::size_t, std::less<>> hits;
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    for (const auto& [lang, words] : stopwords())
      if (words.contains(word)) ++hits[lang];
    word.clear();
  };
  for (auto cp : cps) {
    if (script_of(cp) == Script::latin) {
      text::append_utf8(word, fold_latin(cp));
    } else {
      flush();
    }
  }
  flush();

  const auto target_hits = hits[code];
  std::ostringstream detail;
  detail << "stopword hits:";
  for (const auto& [lang, n] : hits) detail << ' ' << lang << '=' << n;
  if (target_hits == 0) return RuleCheck{false, detail.str() + "; none for " + code};
  for (const auto& [lang, n] : hits) {
    if (lang != code && n >= target_hits) return RuleCheck{false, detail.str() + "; " + lang + " not outvoted"};
  }
  return RuleCheck{true, detail.str()};
}

}  // namespace ifkit
