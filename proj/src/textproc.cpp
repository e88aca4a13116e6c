#include "memescore/textproc.hpp"

#include <array>
#include <fstream>

#include "memescore/error.hpp"

namespace memescore {

using nlohmann::json;

void ScriptFilterConfig::validate() const {
  if (allowed_scripts.empty()) throw DataError("script filter needs at least one allowed script");
}

namespace {

bool token_has_allowed_script(std::string_view token, const ScriptFilterConfig& config) {
  for (char32_t cp : decode_utf8(token)) {
    if (config.allowed_scripts.contains(script_of(cp))) return true;
  }
  return false;
}

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t count = 0;
  for (std::size_t pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + 1)) {
    ++count;
  }
  return count;
}

}  // namespace

std::string filter_script_text(std::string_view text, const ScriptFilterConfig& config) {
  std::string out;
  for (std::string_view token : split_whitespace(text)) {
    if (!token_has_allowed_script(token, config)) continue;
    if (!out.empty()) out.push_back(' ');
    out.append(token);
  }
  return out;
}

std::optional<ScriptClass> dominant_script(std::string_view text, const ScriptFilterConfig& config) {
  std::array<std::size_t, 4> counts{};
  for (char32_t cp : decode_utf8(text)) {
    const ScriptClass s = script_of(cp);
    if (config.allowed_scripts.contains(s)) ++counts[static_cast<std::size_t>(s)];
  }
  std::optional<ScriptClass> best;
  std::size_t best_count = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] > best_count) {
      best_count = counts[i];
      best = static_cast<ScriptClass>(i);
    }
  }
  return best;
}

void PromptTemplate::validate() const {
  constexpr std::string_view kPrimer = "0.";
  if (post_text.size() < kPrimer.size() || post_text.compare(post_text.size() - kPrimer.size(), kPrimer.size(), kPrimer) != 0) {
    throw DataError("prompt template post_text must end with \"0.\"");
  }
  const std::size_t slots = count_occurrences(pre_text, kImageSlot) +
                            count_occurrences(prob_instruction, kImageSlot) +
                            count_occurrences(post_text, kImageSlot);
  if (slots != 1) {
    throw DataError("prompt template must contain the image slot " + std::string(kImageSlot) +
                    " exactly once, found " + std::to_string(slots));
  }
}

std::string build_prompt(const PromptTemplate& tmpl, std::string_view filtered_text,
                         std::optional<std::string_view> translation) {
  std::string prompt;
  prompt.reserve(tmpl.pre_text.size() + filtered_text.size() + tmpl.prob_instruction.size() +
                 tmpl.post_text.size() + (translation ? translation->size() + 1 : 0));
  prompt += tmpl.pre_text;
  prompt += filtered_text;
  if (translation) {
    prompt += ' ';
    prompt += *translation;
  }
  prompt += tmpl.prob_instruction;
  prompt += tmpl.post_text;
  return prompt;
}

PromptTemplate template_from_json(const json& record) {
  PromptTemplate t;
  t.pre_text = record.at("pre_text").get<std::string>();
  t.prob_instruction = record.at("prob_instruction").get<std::string>();
  t.post_text = record.at("post_text").get<std::string>();
  t.validate();
  return t;
}

json template_to_json(const PromptTemplate& tmpl) {
  return json{{"pre_text", tmpl.pre_text},
              {"prob_instruction", tmpl.prob_instruction},
              {"post_text", tmpl.post_text}};
}

PromptTemplate load_template(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open template file " + path.string());
  try {
    return template_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string stub_translate(std::string_view text, const Lexicon& lexicon) {
  std::string out;
  for (std::string_view token : split_whitespace(text)) {
    if (!out.empty()) out.push_back(' ');
    if (auto it = lexicon.find(token); it != lexicon.end()) {
      out += it->second;
    } else {
      out.append(token);
    }
  }
  return out;
}

Lexicon parse_lexicon(std::istream& in) {
  Lexicon lexicon;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (split_whitespace(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("lexicon line " + std::to_string(line_no) + ": expected source<TAB>target");
    }
    std::string source = line.substr(0, tab);
    if (source.empty() || split_whitespace(source).size() != 1 || split_whitespace(source)[0] != source) {
      throw DataError("lexicon line " + std::to_string(line_no) + ": source must be one whitespace-free token");
    }
    if (!lexicon.emplace(std::move(source), line.substr(tab + 1)).second) {
      throw DataError("lexicon line " + std::to_string(line_no) + ": duplicate source token");
    }
  }
  return lexicon;
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open lexicon file " + path.string());
  try {
    return parse_lexicon(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace memescore
