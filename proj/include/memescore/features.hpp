#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "memescore/token_distribution.hpp"

namespace memescore {

// A harmfulness probability in [0, 1].
struct HarmScore {
  double value = 0.0;

  friend bool operator==(const HarmScore&, const HarmScore&) = default;
};

// Expected digit divided by nine: sum_i(p_i * i) / (9 * sum_i(p_i)).
// Accepts any nonnegative vector with positive sum; the result does not
// depend on the vector's scale. Throws DataError on negative, non-finite or
// all-zero input.
HarmScore aggregate_score(const DigitVector& probs);
HarmScore aggregate_score(const TokenDistribution& dist);

// p / sum(p). Input already normalized to within 1e-12 is returned as-is,
// which makes the function idempotent bit-for-bit.
DigitVector extract_features(const DigitVector& probs);
DigitVector extract_features(const TokenDistribution& dist);

// 10 -> hidden_width -> 1 perceptron, ReLU hidden layer, sigmoid output.
struct FcnHead {
  std::size_t hidden_width = 0;
  std::vector<double> w1;  // hidden_width x 10, row-major
  std::vector<double> b1;  // hidden_width
  std::vector<double> w2;  // hidden_width
  double b2 = 0.0;
  std::uint64_t seed = 0;

  // Zero-initialized head of the given width.
  static FcnHead zeros(std::size_t hidden_width);
  void validate() const;

  friend bool operator==(const FcnHead&, const FcnHead&) = default;
};

struct TrainConfig {
  std::size_t hidden_width = 16;
  double learning_rate = 0.05;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;

  void validate() const;
};

// Output strictly inside (0, 1) for finite input.
HarmScore predict_head(const FcnHead& head, const DigitVector& features);

// Gradient of the mean binary cross-entropy, laid out like FcnHead.
struct HeadGradient {
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;
};

struct HeadLoss {
  double loss = 0.0;
  HeadGradient gradient;
};

// Mean binary cross-entropy of the head over a labeled batch and its exact
// gradient (subgradient 0 at ReLU kinks).
HeadLoss head_loss_and_gradient(const FcnHead& head, std::span<const DigitVector> features,
                                std::span<const int> labels);
double head_loss(const FcnHead& head, std::span<const DigitVector> features,
                 std::span<const int> labels);

// Seeded uniform(+-1/sqrt(fan_in)) initialization of weights and biases.
FcnHead init_head(std::size_t hidden_width, std::uint64_t seed);

struct TrainedHead {
  FcnHead head;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// Full-batch gradient descent on mean BCE. Requires at least two samples and
// both classes; throws DataError otherwise or when the loss turns NaN.
TrainedHead train_head_traced(std::span<const DigitVector> features, std::span<const int> labels,
                              const TrainConfig& config);
FcnHead train_head(std::span<const DigitVector> features, std::span<const int> labels,
                   const TrainConfig& config);

nlohmann::json head_to_json(const FcnHead& head);
FcnHead head_from_json(const nlohmann::json& record);
FcnHead load_head(const std::filesystem::path& path);
void save_head(const FcnHead& head, const std::filesystem::path& path);

}  // namespace memescore
