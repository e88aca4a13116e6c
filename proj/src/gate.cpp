#include "memescore/gate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "memescore/error.hpp"
#include "memescore/unicode_script.hpp"

namespace memescore {

using nlohmann::json;

Vocabulary::Vocabulary(std::vector<std::string> tokens, const DigitIds& digit_ids)
    : tokens_(std::move(tokens)), digit_ids_(digit_ids) {
  for (std::size_t d = 0; d < kNumDigits; ++d) {
    const std::size_t id = digit_ids_[d];
    if (id >= tokens_.size()) throw DataError("digit id out of vocabulary bounds");
    if (tokens_[id] != std::string(1, static_cast<char>('0' + d))) {
      throw DataError("vocabulary token " + std::to_string(id) + " does not render digit " +
                      std::to_string(d));
    }
    for (std::size_t e = 0; e < d; ++e) {
      if (digit_ids_[e] == id) throw DataError("digit ids must be distinct");
    }
  }
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  DigitIds ids{};
  for (std::size_t d = 0; d < kNumDigits; ++d) {
    const std::string digit(1, static_cast<char>('0' + d));
    auto it = std::find(tokens.begin(), tokens.end(), digit);
    if (it == tokens.end()) throw DataError("vocabulary has no token for digit " + digit);
    ids[d] = static_cast<std::size_t>(it - tokens.begin());
  }
  return Vocabulary(std::move(tokens), ids);
}

TokenDistribution constrained_digit_distribution(std::span<const double> logits,
                                                 const Vocabulary& vocab) {
  if (logits.size() != vocab.size()) {
    throw DataError("logit vector has " + std::to_string(logits.size()) + " entries, vocabulary has " +
                    std::to_string(vocab.size()));
  }
  DigitVector selected;
  for (std::size_t d = 0; d < kNumDigits; ++d) {
    selected[d] = logits[vocab.digit_ids()[d]];
    if (!std::isfinite(selected[d])) {
      throw DataError("non-finite logit for digit " + std::to_string(d));
    }
  }
  const double max_logit = *std::max_element(selected.begin(), selected.end());
  double total = 0.0;
  for (double& v : selected) {
    v = std::exp(v - max_logit);
    total += v;
  }
  for (double& v : selected) v /= total;
  return TokenDistribution(selected);
}

const Vocabulary& toy_vocabulary() {
  static const Vocabulary vocab = Vocabulary::from_tokens({
      "<unk>", "<|im_start|>", "<|im_end|>", "\n", ".", " ",
      "0", "1", "2", "3", "4", "yes", "no", "5", "6", "7", "8", "9", "%",
  });
  return vocab;
}

std::size_t ToyLogitSource::SeededHash::operator()(std::string_view key) const noexcept {
  // FNV-1a with the model seed folded into the offset basis.
  std::uint64_t h = 0xcbf29ce484222325ULL ^ (seed * 0x9E3779B97F4A7C15ULL);
  for (unsigned char c : key) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return static_cast<std::size_t>(h);
}

ToyLogitSource::ToyLogitSource(const DigitVector& bias, std::span<const ToyRule> rules,
                               std::uint64_t seed)
    : bias_(bias), rules_(rules.begin(), rules.end()), seed_(seed), table_(0, SeededHash{seed}) {
  for (double b : bias_) {
    if (!std::isfinite(b)) throw DataError("toy model bias must be finite");
  }
  for (const ToyRule& rule : rules_) {
    if (decode_utf8(rule.ngram).size() != 3) {
      throw DataError("toy rule n-gram \"" + rule.ngram + "\" must be exactly three characters");
    }
    if (rule.digit >= kNumDigits) throw DataError("toy rule digit must be in 0..9");
    if (!std::isfinite(rule.weight)) throw DataError("toy rule weight must be finite");
    table_[rule.ngram][rule.digit] += rule.weight;
  }
}

ToyLogitSource ToyLogitSource::builtin(std::string_view name) {
  if (name == "zero") return ToyLogitSource();
  if (name == "demo") {
    const ToyRule rules[] = {
        {"kil", 9, 3.0},          {"ill", 9, 1.0},        {"die", 8, 2.5},
        {"杀死你", 9, 4.0},
        {"滚出去", 8, 3.0},
        {"垃圾人", 7, 2.5},
        {"கொல", 9, 3.5},
        {"வணக", 1, 2.0},
        {"你好吗", 1, 2.0},
        {"快乐的", 0, 2.0},
    };
    DigitVector bias{};
    bias[2] = 0.5;
    return ToyLogitSource(bias, rules, 0);
  }
  throw DataError("unknown builtin logit source \"" + std::string(name) + "\" (expected zero or demo)");
}

std::vector<double> ToyLogitSource::logits_for(std::string_view prompt) const {
  DigitVector digits = bias_;
  if (!table_.empty()) {
    const std::vector<char32_t> cps = decode_utf8(prompt);
    std::string key;
    for (std::size_t i = 0; i + 3 <= cps.size(); ++i) {
      key.clear();
      for (std::size_t k = 0; k < 3; ++k) append_utf8(key, cps[i + k]);
      if (auto it = table_.find(key); it != table_.end()) {
        for (std::size_t d = 0; d < kNumDigits; ++d) digits[d] += it->second[d];
      }
    }
  }
  const Vocabulary& vocab = vocabulary();
  std::vector<double> logits(vocab.size(), kNonDigitLogit);
  for (std::size_t d = 0; d < kNumDigits; ++d) logits[vocab.digit_ids()[d]] = digits[d];
  return logits;
}

std::vector<double> toy_logits(const ToyLogitSource& source, std::string_view prompt) {
  return source.logits_for(prompt);
}

ToyLogitSource toy_model_from_json(const json& record) {
  DigitVector bias{};
  if (auto it = record.find("bias"); it != record.end()) {
    if (!it->is_array() || it->size() != kNumDigits) throw DataError("toy model \"bias\" must have 10 entries");
    for (std::size_t d = 0; d < kNumDigits; ++d) bias[d] = (*it)[d].get<double>();
  }
  std::vector<ToyRule> rules;
  if (auto it = record.find("rules"); it != record.end()) {
    for (const json& r : *it) {
      const long long digit = r.at("digit").get<long long>();
      if (digit < 0 || digit >= static_cast<long long>(kNumDigits)) {
        throw DataError("toy rule digit must be in 0..9");
      }
      rules.push_back({r.at("ngram").get<std::string>(), static_cast<std::size_t>(digit),
                       r.at("weight").get<double>()});
    }
  }
  const auto seed = record.value("seed", std::uint64_t{0});
  return ToyLogitSource(bias, rules, seed);
}

json toy_model_to_json(const ToyLogitSource& source) {
  json rules = json::array();
  for (const ToyRule& r : source.rules()) {
    rules.push_back({{"ngram", r.ngram}, {"digit", r.digit}, {"weight", r.weight}});
  }
  return json{{"bias", source.bias()}, {"rules", rules}, {"seed", source.seed()}};
}

ToyLogitSource load_toy_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open toy model file " + path.string());
  try {
    return toy_model_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace memescore
