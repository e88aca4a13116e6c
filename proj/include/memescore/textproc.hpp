#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include <json.hpp>

#include "memescore/unicode_script.hpp"

namespace memescore {

// Which OCR tokens survive filtering. A whitespace-delimited token is kept
// when at least one of its codepoints belongs to an allowed script.
struct ScriptFilterConfig {
  std::set<ScriptClass> allowed_scripts{ScriptClass::kHan, ScriptClass::kTamil};

  void validate() const;
};

std::string filter_script_text(std::string_view text, const ScriptFilterConfig& config = {});

// Most frequent allowed script among the codepoints of `text` (ties go to the
// earlier enumerator), or nullopt when none occur.
std::optional<ScriptClass> dominant_script(std::string_view text, const ScriptFilterConfig& config = {});

inline constexpr std::string_view kImageSlot = "[img-1]";

// Chat-format scaffold around the OCR text. Rendering is plain concatenation:
// pre_text + text [+ " " + translation] + prob_instruction + post_text.
struct PromptTemplate {
  std::string pre_text = "<|im_start|>user\n[img-1]";
  std::string prob_instruction =
      "Rate from 0 to 9 how likely this meme is harmful. Answer with the probability only.";
  std::string post_text = "<|im_end|>\n<|im_start|>assistant\n0.";

  // Throws DataError unless post_text ends in "0." and the image slot occurs
  // exactly once across the three parts.
  void validate() const;

  bool operator==(const PromptTemplate&) const = default;
};

std::string build_prompt(const PromptTemplate& tmpl, std::string_view filtered_text,
                         std::optional<std::string_view> translation = std::nullopt);

PromptTemplate template_from_json(const nlohmann::json& record);
nlohmann::json template_to_json(const PromptTemplate& tmpl);
PromptTemplate load_template(const std::filesystem::path& path);

using Lexicon = std::map<std::string, std::string, std::less<>>;

// Token-wise dictionary replacement; unmapped tokens pass through. Output
// tokens are joined by single spaces.
std::string stub_translate(std::string_view text, const Lexicon& lexicon);

// Reads "source<TAB>target" lines. Blank lines are skipped.
Lexicon load_lexicon(const std::filesystem::path& path);
Lexicon parse_lexicon(std::istream& in);

class Translator {
 public:
  virtual ~Translator() = default;
  virtual std::string translate(std::string_view text, ScriptClass source_script) const = 0;
};

class LexiconTranslator final : public Translator {
 public:
  explicit LexiconTranslator(Lexicon lexicon) : lexicon_(std::move(lexicon)) {}

  std::string translate(std::string_view text, ScriptClass) const override {
    return stub_translate(text, lexicon_);
  }

  const Lexicon& lexicon() const noexcept { return lexicon_; }

 private:
  Lexicon lexicon_;
};

}  // namespace memescore
