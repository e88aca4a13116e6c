#include "memescore/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "memescore/error.hpp"

namespace memescore {

using nlohmann::json;

namespace {

void check_nonnegative(const DigitVector& probs) {
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) throw DataError("digit probabilities must be finite and >= 0");
  }
}

double sigmoid(double z) noexcept {
  double s;
  if (z >= 0.0) {
    s = 1.0 / (1.0 + std::exp(-z));
  } else {
    const double e = std::exp(z);
    s = e / (1.0 + e);
  }
  // Keep the open interval even where exp saturates.
  return std::clamp(s, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

// log(1 + exp(z)) without overflow.
double softplus(double z) noexcept { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

void check_batch(std::span<const DigitVector> features, std::span<const int> labels) {
  if (features.size() != labels.size()) throw DataError("features and labels differ in length");
  for (int y : labels) {
    if (y != 0 && y != 1) throw DataError("labels must be 0 or 1");
  }
}

// 53 random bits mapped to [0, 1); independent of the standard library's
// distribution implementations.
double unit_interval(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

HarmScore aggregate_score(const DigitVector& probs) {
  check_nonnegative(probs);
  // Extended-precision accumulation keeps symmetric inputs (uniform, one-hot)
  // exact after the final rounding.
  long double weighted = 0.0L;
  long double total = 0.0L;
  for (std::size_t i = 0; i < kNumDigits; ++i) {
    weighted += static_cast<long double>(probs[i]) * static_cast<long double>(i);
    total += probs[i];
  }
  if (total <= 0.0L) throw DataError("aggregate score undefined for an all-zero distribution");
  return HarmScore{static_cast<double>(weighted / (9.0L * total))};
}

HarmScore aggregate_score(const TokenDistribution& dist) { return aggregate_score(dist.probs()); }

DigitVector extract_features(const DigitVector& probs) {
  check_nonnegative(probs);
  double total = 0.0;
  for (double p : probs) total += p;
  if (total <= 0.0) throw DataError("features undefined for an all-zero distribution");
  if (std::abs(total - 1.0) <= 1e-12) return probs;
  DigitVector out;
  for (std::size_t i = 0; i < kNumDigits; ++i) out[i] = probs[i] / total;
  return out;
}

DigitVector extract_features(const TokenDistribution& dist) { return dist.probs(); }

FcnHead FcnHead::zeros(std::size_t hidden_width) {
  FcnHead head;
  head.hidden_width = hidden_width;
  head.w1.assign(hidden_width * kNumDigits, 0.0);
  head.b1.assign(hidden_width, 0.0);
  head.w2.assign(hidden_width, 0.0);
  return head;
}

void FcnHead::validate() const {
  if (hidden_width == 0) throw DataError("head hidden_width must be positive");
  if (w1.size() != hidden_width * kNumDigits || b1.size() != hidden_width || w2.size() != hidden_width) {
    throw DataError("head parameter shapes do not match hidden_width");
  }
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(w1.begin(), w1.end(), finite) || !std::all_of(b1.begin(), b1.end(), finite) ||
      !std::all_of(w2.begin(), w2.end(), finite) || !std::isfinite(b2)) {
    throw DataError("head parameters must be finite");
  }
}

void TrainConfig::validate() const {
  if (hidden_width == 0) throw DataError("hidden_width must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw DataError("learning_rate must be positive");
  if (epochs == 0) throw DataError("epochs must be positive");
}

namespace {

// Pre-activations of both layers for one input.
double forward(const FcnHead& head, const DigitVector& x, std::vector<double>& hidden_pre) {
  hidden_pre.resize(head.hidden_width);
  double z2 = head.b2;
  for (std::size_t h = 0; h < head.hidden_width; ++h) {
    double z = head.b1[h];
    const double* row = head.w1.data() + h * kNumDigits;
    for (std::size_t i = 0; i < kNumDigits; ++i) z += row[i] * x[i];
    hidden_pre[h] = z;
    z2 += head.w2[h] * std::max(z, 0.0);
  }
  return z2;
}

}  // namespace

HarmScore predict_head(const FcnHead& head, const DigitVector& features) {
  std::vector<double> hidden;
  return HarmScore{sigmoid(forward(head, features, hidden))};
}

HeadLoss head_loss_and_gradient(const FcnHead& head, std::span<const DigitVector> features,
                                std::span<const int> labels) {
  check_batch(features, labels);
  if (features.empty()) throw DataError("empty batch");
  HeadLoss out;
  HeadGradient& g = out.gradient;
  g.w1.assign(head.w1.size(), 0.0);
  g.b1.assign(head.b1.size(), 0.0);
  g.w2.assign(head.w2.size(), 0.0);

  const double inv_n = 1.0 / static_cast<double>(features.size());
  std::vector<double> hidden;
  double loss = 0.0;
  for (std::size_t s = 0; s < features.size(); ++s) {
    const DigitVector& x = features[s];
    const double y = labels[s];
    const double z2 = forward(head, x, hidden);
    loss += softplus(z2) - y * z2;
    // d(softplus(z) - y z)/dz = sigmoid(z) - y; unclamped here so the
    // gradient stays exact.
    const double dz2 = (z2 >= 0.0 ? 1.0 / (1.0 + std::exp(-z2)) : std::exp(z2) / (1.0 + std::exp(z2))) - y;
    const double scaled = dz2 * inv_n;
    g.b2 += scaled;
    for (std::size_t h = 0; h < head.hidden_width; ++h) {
      if (hidden[h] <= 0.0) continue;
      g.w2[h] += scaled * hidden[h];
      const double dz1 = scaled * head.w2[h];
      g.b1[h] += dz1;
      double* grow = g.w1.data() + h * kNumDigits;
      for (std::size_t i = 0; i < kNumDigits; ++i) grow[i] += dz1 * x[i];
    }
  }
  out.loss = loss * inv_n;
  return out;
}

double head_loss(const FcnHead& head, std::span<const DigitVector> features, std::span<const int> labels) {
  check_batch(features, labels);
  if (features.empty()) throw DataError("empty batch");
  std::vector<double> hidden;
  double loss = 0.0;
  for (std::size_t s = 0; s < features.size(); ++s) {
    const double z2 = forward(head, features[s], hidden);
    loss += softplus(z2) - labels[s] * z2;
  }
  return loss / static_cast<double>(features.size());
}

FcnHead init_head(std::size_t hidden_width, std::uint64_t seed) {
  FcnHead head = FcnHead::zeros(hidden_width);
  head.seed = seed;
  std::mt19937_64 rng(seed);
  auto draw = [&](double bound) { return bound * (2.0 * unit_interval(rng) - 1.0); };
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(kNumDigits));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden_width));
  for (double& w : head.w1) w = draw(bound1);
  for (double& b : head.b1) b = draw(bound1);
  for (double& w : head.w2) w = draw(bound2);
  head.b2 = draw(bound2);
  return head;
}

TrainedHead train_head_traced(std::span<const DigitVector> features, std::span<const int> labels,
                              const TrainConfig& config) {
  config.validate();
  check_batch(features, labels);
  if (features.size() < 2) throw DataError("training needs at least two samples");
  const auto positives = std::count(labels.begin(), labels.end(), 1);
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(labels.size())) {
    throw DataError("training labels must contain both classes");
  }
  for (const DigitVector& x : features) {
    for (double v : x) {
      if (!std::isfinite(v)) throw DataError("training features must be finite");
    }
  }

  TrainedHead out{init_head(config.hidden_width, config.seed), 0.0, 0.0};
  FcnHead& head = out.head;
  const double lr = config.learning_rate;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const HeadLoss step = head_loss_and_gradient(head, features, labels);
    if (std::isnan(step.loss)) throw DataError("loss became NaN at epoch " + std::to_string(epoch));
    if (epoch == 0) out.initial_loss = step.loss;
    for (std::size_t k = 0; k < head.w1.size(); ++k) head.w1[k] -= lr * step.gradient.w1[k];
    for (std::size_t k = 0; k < head.b1.size(); ++k) head.b1[k] -= lr * step.gradient.b1[k];
    for (std::size_t k = 0; k < head.w2.size(); ++k) head.w2[k] -= lr * step.gradient.w2[k];
    head.b2 -= lr * step.gradient.b2;
  }
  out.final_loss = head_loss(head, features, labels);
  if (std::isnan(out.final_loss)) throw DataError("loss became NaN at epoch " + std::to_string(config.epochs));
  return out;
}

FcnHead train_head(std::span<const DigitVector> features, std::span<const int> labels,
                   const TrainConfig& config) {
  return train_head_traced(features, labels, config).head;
}

json head_to_json(const FcnHead& head) {
  json w1 = json::array();
  for (std::size_t h = 0; h < head.hidden_width; ++h) {
    w1.push_back(std::vector<double>(head.w1.begin() + h * kNumDigits, head.w1.begin() + (h + 1) * kNumDigits));
  }
  return json{{"hidden_width", head.hidden_width}, {"w1", w1}, {"b1", head.b1},
              {"w2", head.w2}, {"b2", head.b2}, {"seed", head.seed}};
}

FcnHead head_from_json(const json& record) {
  FcnHead head;
  head.hidden_width = record.at("hidden_width").get<std::size_t>();
  for (const json& row : record.at("w1")) {
    if (!row.is_array() || row.size() != kNumDigits) throw DataError("head w1 rows must have 10 entries");
    for (const json& v : row) head.w1.push_back(v.get<double>());
  }
  head.b1 = record.at("b1").get<std::vector<double>>();
  head.w2 = record.at("w2").get<std::vector<double>>();
  head.b2 = record.at("b2").get<double>();
  head.seed = record.value("seed", std::uint64_t{0});
  head.validate();
  return head;
}

FcnHead load_head(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open head file " + path.string());
  try {
    return head_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_head(const FcnHead& head, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  out << head_to_json(head).dump() << '\n';
  if (!out) throw DataError("cannot write head file " + path.string());
}

}  // namespace memescore
