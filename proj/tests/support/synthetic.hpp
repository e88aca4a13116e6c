#pragma once

// Synthetic meme corpus for end-to-end tests: OCR-like texts mixing Latin
// filler (dropped by the script filter) with Han/Tamil cue words, plus a toy
// model whose trigram rules push harmful cues to high digits and benign cues
// to low digits.

#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "memescore/datamodel.hpp"
#include "memescore/gate.hpp"
#include "memescore/unicode_script.hpp"

namespace memescore::synthetic {

inline const std::vector<std::string>& harmful_cues() {
  static const std::vector<std::string> cues = {"杀死你", "滚出去吧", "垃圾东西", "打死他们", "கொல்லு", "அடிப்பேன்"};
  return cues;
}

inline const std::vector<std::string>& benign_cues() {
  static const std::vector<std::string> cues = {"你好吗", "快乐的日子", "谢谢你们", "வணக்கம்", "நன்றி"};
  return cues;
}

inline const std::vector<std::string>& fillers() {
  static const std::vector<std::string> words = {"lol", "when", "the", "meme", "ya", "papaya", "今天", "我们",
                                                 "新加坡", "天气", "ok", "lah"};
  return words;
}

inline std::string first_trigram(const std::string& word) {
  const auto cps = decode_utf8(word);
  std::string out;
  for (std::size_t k = 0; k < 3; ++k) append_utf8(out, cps.at(k));
  return out;
}

inline ToyLogitSource cue_model(std::uint64_t seed = 7) {
  std::vector<ToyRule> rules;
  for (const auto& cue : harmful_cues()) {
    rules.push_back({first_trigram(cue), 9, 2.5});
    rules.push_back({first_trigram(cue), 8, 1.5});
  }
  for (const auto& cue : benign_cues()) {
    rules.push_back({first_trigram(cue), 0, 2.0});
    rules.push_back({first_trigram(cue), 1, 1.0});
  }
  DigitVector bias{};
  bias[3] = 1.0;
  bias[4] = 0.5;
  return ToyLogitSource(bias, rules, seed);
}

struct SyntheticSet {
  std::vector<Sample> samples;
  ToyLogitSource model;
};

inline SyntheticSet make_dataset(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](const std::vector<std::string>& words) { return words[rng() % words.size()]; };
  auto chance = [&](double p) { return static_cast<double>(rng() >> 11) * 0x1.0p-53 < p; };

  SyntheticSet set{{}, cue_model(seed)};
  for (std::size_t i = 0; i < n; ++i) {
    const int label = chance(0.5) ? 1 : 0;
    std::vector<std::string> tokens;
    if (label == 1) {
      tokens.push_back(pick(harmful_cues()));
      if (chance(0.4)) tokens.push_back(pick(harmful_cues()));
      if (chance(0.3)) tokens.push_back(pick(benign_cues()));
    } else {
      if (chance(0.7)) tokens.push_back(pick(benign_cues()));
      if (chance(0.3)) tokens.push_back(pick(benign_cues()));
      if (chance(0.06)) tokens.push_back(pick(harmful_cues()));
    }
    const std::size_t filler = 1 + rng() % 3;
    for (std::size_t k = 0; k < filler; ++k) tokens.push_back(pick(fillers()));
    // Shuffle with explicit swaps so the order does not depend on the
    // standard library's shuffle implementation.
    for (std::size_t k = tokens.size(); k > 1; --k) std::swap(tokens[k - 1], tokens[rng() % k]);

    std::string text;
    for (const auto& t : tokens) text += (text.empty() ? "" : " ") + t;
    char id[32];
    std::snprintf(id, sizeof id, "s%04zu", i);
    Sample s{id, text, std::string("img/") + id + ".png", label};
    set.samples.push_back(std::move(s));
  }
  return set;
}

}  // namespace memescore::synthetic
