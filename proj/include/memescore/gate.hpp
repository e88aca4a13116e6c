#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "memescore/token_distribution.hpp"

namespace memescore {

// Token strings of a model vocabulary plus the indices of the ten
// single-character digit tokens.
class Vocabulary {
 public:
  using DigitIds = std::array<std::size_t, kNumDigits>;

  // Throws DataError when a digit id is out of range, repeated, or points at a
  // token that is not exactly the character '0' + d.
  Vocabulary(std::vector<std::string> tokens, const DigitIds& digit_ids);

  // Locates the digit tokens by exact string match.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const DigitIds& digit_ids() const noexcept { return digit_ids_; }

 private:
  std::vector<std::string> tokens_;
  DigitIds digit_ids_;
};

// Produces next-token logits for a fully rendered prompt. Implementations
// must be safe for concurrent calls after construction.
class LogitSource {
 public:
  virtual ~LogitSource() = default;
  virtual const Vocabulary& vocabulary() const noexcept = 0;
  virtual std::vector<double> logits_for(std::string_view prompt) const = 0;
};

// Masked, renormalized softmax over the ten digit tokens. Logits of every
// other token are ignored. Throws DataError on a length mismatch or a
// non-finite digit logit.
TokenDistribution constrained_digit_distribution(std::span<const double> logits,
                                                 const Vocabulary& vocab);

// Small vocabulary used by the toy model: a few chat/control tokens with the
// digits placed at non-contiguous ids.
const Vocabulary& toy_vocabulary();

struct ToyRule {
  std::string ngram;  // exactly three codepoints
  std::size_t digit = 0;
  double weight = 0.0;
};

// Character-trigram linear model over the digit tokens: the logit for digit d
// is bias[d] plus the weights of every rule whose trigram occurs in the
// prompt, counted once per occurrence. Non-digit tokens get kNonDigitLogit.
class ToyLogitSource final : public LogitSource {
 public:
  static constexpr double kNonDigitLogit = -1.0e4;

  ToyLogitSource() : ToyLogitSource(DigitVector{}, {}, 0) {}
  ToyLogitSource(const DigitVector& bias, std::span<const ToyRule> rules, std::uint64_t seed);

  // "zero" (no rules, zero bias) or "demo" (a handful of Han/Tamil/Latin
  // harm cues). Throws DataError for other names.
  static ToyLogitSource builtin(std::string_view name);

  const Vocabulary& vocabulary() const noexcept override { return toy_vocabulary(); }
  std::vector<double> logits_for(std::string_view prompt) const override;

  const DigitVector& bias() const noexcept { return bias_; }
  const std::vector<ToyRule>& rules() const noexcept { return rules_; }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  struct SeededHash {
    std::uint64_t seed = 0;
    std::size_t operator()(std::string_view key) const noexcept;
  };

  DigitVector bias_;
  std::vector<ToyRule> rules_;
  std::uint64_t seed_;
  std::unordered_map<std::string, DigitVector, SeededHash> table_;
};

std::vector<double> toy_logits(const ToyLogitSource& source, std::string_view prompt);

ToyLogitSource toy_model_from_json(const nlohmann::json& record);
nlohmann::json toy_model_to_json(const ToyLogitSource& source);
ToyLogitSource load_toy_model(const std::filesystem::path& path);

}  // namespace memescore
