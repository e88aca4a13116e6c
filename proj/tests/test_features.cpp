#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "memescore/error.hpp"
#include "memescore/features.hpp"
#include "memescore/metrics.hpp"
#include "support/oracles.hpp"

namespace memescore {
namespace {

DigitVector one_hot(std::size_t d) {
  DigitVector p{};
  p[d] = 1.0;
  return p;
}

DigitVector random_nonnegative(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DigitVector p;
  for (double& v : p) v = u(rng) < 0.2 ? 0.0 : u(rng);
  p[rng() % 10] += 1e-3;
  return p;
}

// Distribution peaked around a random center; its aggregate is near center/9.
DigitVector peaked(std::mt19937_64& rng, double center) {
  std::uniform_real_distribution<double> noise(0.5, 1.5);
  DigitVector p;
  double total = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    const double d = static_cast<double>(i) - center;
    p[i] = std::exp(-d * d / 4.0) * noise(rng);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

// Separable set: aggregate <= 0.4 -> label 0, >= 0.6 -> label 1.
void separable_set(std::mt19937_64& rng, std::size_t n, std::vector<DigitVector>& x, std::vector<int>& y) {
  std::uniform_real_distribution<double> center(-1.0, 10.0);
  while (x.size() < n) {
    const DigitVector p = peaked(rng, center(rng));
    const double s = oracle::direct_aggregate(p);
    if (s > 0.4 && s < 0.6) continue;
    x.push_back(p);
    y.push_back(s >= 0.6 ? 1 : 0);
  }
}

TEST(AggregateScore, Endpoints) {
  EXPECT_EQ(aggregate_score(one_hot(9)).value, 1.0);
  EXPECT_EQ(aggregate_score(one_hot(0)).value, 0.0);
}

TEST(AggregateScore, UniformIsExactlyHalf) {
  DigitVector p;
  p.fill(0.1);
  EXPECT_EQ(aggregate_score(p).value, 0.5);
  EXPECT_EQ(aggregate_score(TokenDistribution::uniform()).value, 0.5);
}

TEST(AggregateScore, OneHotAtFive) {
  EXPECT_NEAR(aggregate_score(one_hot(5)).value, oracle::direct_aggregate(one_hot(5)), 1e-15);
  EXPECT_NEAR(aggregate_score(one_hot(5)).value, 5.0 / 9.0, 1e-15);
}

TEST(AggregateScore, Errors) {
  EXPECT_THROW(aggregate_score(DigitVector{}), DataError);
  DigitVector p = one_hot(3);
  p[4] = -0.1;
  EXPECT_THROW(aggregate_score(p), DataError);
  p[4] = NAN;
  EXPECT_THROW(aggregate_score(p), DataError);
}

TEST(AggregateScore, FuzzedProperties) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> log_c(-6.0, 6.0);
  for (int trial = 0; trial < 5000; ++trial) {
    const DigitVector p = random_nonnegative(rng);
    const double s = aggregate_score(p).value;
    EXPECT_NEAR(s, oracle::direct_aggregate(p), 1e-12);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);

    DigitVector scaled = p;
    const double c = std::pow(10.0, log_c(rng));
    for (double& v : scaled) v *= c;
    EXPECT_NEAR(aggregate_score(scaled).value, s, 1e-12);

    EXPECT_NEAR(aggregate_score(extract_features(p)).value, s, 1e-12);

    // Moving mass from digit i up to digit j > i never lowers the score.
    const std::size_t i = rng() % 9;
    const std::size_t j = i + 1 + rng() % (9 - i);
    DigitVector moved = p;
    const double amount = moved[i] * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    moved[i] -= amount;
    moved[j] += amount;
    EXPECT_GE(aggregate_score(moved).value, s - 1e-15);
  }
}

TEST(ExtractFeatures, Examples) {
  std::mt19937_64 rng(1);
  const DigitVector normalized = peaked(rng, 4.0);
  EXPECT_EQ(extract_features(normalized), normalized);
  EXPECT_EQ(extract_features(extract_features(normalized)), extract_features(normalized));

  DigitVector two{};
  two[0] = 2.0;
  EXPECT_EQ(extract_features(two), one_hot(0));

  DigitVector pair{};
  pair[0] = pair[1] = 1.0;
  const DigitVector expected{0.5, 0.5, 0, 0, 0, 0, 0, 0, 0, 0};
  EXPECT_EQ(extract_features(pair), expected);
  EXPECT_THROW(extract_features(DigitVector{}), DataError);
}

TEST(ExtractFeatures, SumToOne) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const DigitVector f = extract_features(random_nonnegative(rng));
    double sum = 0.0;
    for (double v : f) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(PredictHead, ZeroHeadGivesHalf) {
  const FcnHead head = FcnHead::zeros(16);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(predict_head(head, random_nonnegative(rng)).value, 0.5);
}

TEST(PredictHead, OutputStrictlyInsideUnitInterval) {
  FcnHead head = FcnHead::zeros(2);
  head.w1.assign(head.w1.size(), 50.0);
  head.w2 = {100.0, 100.0};
  DigitVector x;
  x.fill(10.0);
  double out = predict_head(head, x).value;
  EXPECT_GT(out, 0.0);
  EXPECT_LT(out, 1.0);
  head.w2 = {-100.0, -100.0};
  out = predict_head(head, x).value;
  EXPECT_GT(out, 0.0);
  EXPECT_LT(out, 1.0);
}

TEST(HeadGradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int config = 0; config < 20; ++config) {
    const std::size_t hidden = 1 + rng() % 6;
    const std::size_t n = 3 + rng() % 8;
    FcnHead head = FcnHead::zeros(hidden);
    for (double& v : head.w1) v = normal(rng);
    for (double& v : head.b1) v = normal(rng);
    for (double& v : head.w2) v = normal(rng);
    head.b2 = normal(rng);
    std::vector<DigitVector> x;
    std::vector<int> y;
    for (std::size_t s = 0; s < n; ++s) {
      x.push_back(peaked(rng, std::uniform_real_distribution<double>(0.0, 9.0)(rng)));
      y.push_back(static_cast<int>(rng() % 2));
    }
    const HeadLoss analytic = head_loss_and_gradient(head, x, y);
    EXPECT_NEAR(analytic.loss, head_loss(head, x, y), 1e-14);
    const auto numeric =
        oracle::finite_difference_gradient(head, [&](const FcnHead& h) { return head_loss(h, x, y); });
    EXPECT_LT(oracle::relative_error(oracle::flatten(analytic.gradient), numeric), 1e-5) << "config " << config;
  }
}

TEST(TrainHead, SeparableSetReachesHighHeldOutAuroc) {
  std::mt19937_64 rng(2024);
  std::vector<DigitVector> train_x, test_x;
  std::vector<int> train_y, test_y;
  separable_set(rng, 200, train_x, train_y);
  separable_set(rng, 200, test_x, test_y);
  const TrainedHead trained = train_head_traced(train_x, train_y, TrainConfig{});
  EXPECT_LE(trained.final_loss, trained.initial_loss);
  std::vector<double> scores;
  for (const auto& x : test_x) scores.push_back(predict_head(trained.head, x).value);
  EXPECT_GE(auroc(scores, test_y), 0.95);
}

TEST(TrainHead, DeterministicForSameSeed) {
  std::mt19937_64 rng(8);
  std::vector<DigitVector> x;
  std::vector<int> y;
  separable_set(rng, 60, x, y);
  TrainConfig config;
  config.seed = 77;
  EXPECT_EQ(train_head(x, y, config), train_head(x, y, config));
  config.seed = 78;
  EXPECT_NE(train_head(x, y, config), train_head(x, y, TrainConfig{16, 0.05, 200, 77}));
}

TEST(TrainHead, Errors) {
  std::vector<DigitVector> x(4, one_hot(2));
  EXPECT_THROW(train_head(x, std::vector<int>{1, 1, 1, 1}, TrainConfig{}), DataError);
  EXPECT_THROW(train_head(x, std::vector<int>{0, 0, 0, 0}, TrainConfig{}), DataError);
  EXPECT_THROW(train_head(x, std::vector<int>{0, 1, 0}, TrainConfig{}), DataError);
  EXPECT_THROW(train_head(std::vector<DigitVector>{one_hot(1)}, std::vector<int>{1}, TrainConfig{}), DataError);
  TrainConfig bad;
  bad.epochs = 0;
  EXPECT_THROW(train_head(x, std::vector<int>{0, 1, 0, 1}, bad), DataError);
  x[0][0] = NAN;
  EXPECT_THROW(train_head(x, std::vector<int>{0, 1, 0, 1}, TrainConfig{}), DataError);
}

TEST(TrainHead, DivergenceReportsEpoch) {
  std::mt19937_64 rng(8);
  std::vector<DigitVector> x;
  std::vector<int> y;
  separable_set(rng, 40, x, y);
  for (auto& v : x)
    for (double& e : v) e *= 1e150;
  TrainConfig config;
  config.learning_rate = 1e200;
  try {
    train_head(x, y, config);
    FAIL() << "expected NaN loss";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos) << e.what();
  }
}

TEST(TrainHead, LossDoesNotIncreaseOnRandomData) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<DigitVector> x;
    std::vector<int> y;
    for (int i = 0; i < 40; ++i) {
      x.push_back(extract_features(random_nonnegative(rng)));
      y.push_back(i % 2 == 0 ? 1 : static_cast<int>(rng() % 2));
    }
    TrainConfig config;
    config.seed = seed;
    const TrainedHead trained = train_head_traced(x, y, config);
    EXPECT_LE(trained.final_loss, trained.initial_loss) << "seed " << seed;
  }
}

TEST(HeadJson, RoundTripIsExact) {
  const FcnHead head = init_head(5, 99);
  EXPECT_EQ(head_from_json(nlohmann::json::parse(head_to_json(head).dump())), head);
  auto broken = head_to_json(head);
  broken["b1"] = {1.0};
  EXPECT_THROW(head_from_json(broken), DataError);
}

TEST(InitHead, WithinFanInBounds) {
  const FcnHead head = init_head(16, 5);
  for (double w : head.w1) EXPECT_LE(std::abs(w), 1.0 / std::sqrt(10.0));
  for (double w : head.w2) EXPECT_LE(std::abs(w), 0.25);
  EXPECT_EQ(init_head(16, 5), head);
}

}  // namespace
}  // namespace memescore
