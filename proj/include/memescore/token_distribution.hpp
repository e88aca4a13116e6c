#pragma once

#include <array>
#include <cstddef>

namespace memescore {

inline constexpr std::size_t kNumDigits = 10;

using DigitVector = std::array<double, kNumDigits>;

// Normalized probabilities over the ten digit tokens; probs()[d] is the
// probability of the model emitting digit d after the "0." primer.
class TokenDistribution {
 public:
  // Throws DataError unless every entry is finite, >= 0, and the entries sum
  // to 1 within 1e-9.
  explicit TokenDistribution(const DigitVector& probs);

  static TokenDistribution uniform();

  const DigitVector& probs() const noexcept { return probs_; }
  double operator[](std::size_t digit) const { return probs_.at(digit); }

  friend bool operator==(const TokenDistribution&, const TokenDistribution&) = default;

 private:
  DigitVector probs_;
};

}  // namespace memescore
