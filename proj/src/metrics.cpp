#include "memescore/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "memescore/error.hpp"

namespace memescore {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DataError("scores and labels differ in length");
  for (int y : labels) {
    if (y != 0 && y != 1) throw DataError("labels must be 0 or 1");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw DataError("scores must not be NaN");
  }
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const std::size_t n = scores.size();
  const auto n_pos = static_cast<std::uint64_t>(std::count(labels.begin(), labels.end(), 1));
  const std::uint64_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("AUROC undefined: both classes must be present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the rank sum of positives; a tie group spanning sorted positions
  // [i, j) gets average 1-based rank (i + 1 + j) / 2.
  std::uint64_t rank_sum_x2 = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    std::uint64_t positives = 0;
    for (std::size_t k = i; k < j; ++k) positives += static_cast<std::uint64_t>(labels[order[k]]);
    rank_sum_x2 += positives * (i + j + 1);
    i = j;
  }
  const std::uint64_t u_x2 = rank_sum_x2 - n_pos * (n_pos + 1);
  return static_cast<double>(u_x2) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double accuracy(std::span<const double> scores, std::span<const int> labels, double threshold) {
  check_inputs(scores, labels);
  if (scores.empty()) throw DataError("accuracy undefined on an empty set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int predicted = scores[i] >= threshold ? 1 : 0;
    correct += predicted == labels[i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

EvalReport evaluate_scores(std::span<const double> scores, std::span<const int> labels, double threshold) {
  EvalReport report;
  report.threshold = threshold;
  report.n = scores.size();
  report.n_positive = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  report.n_negative = report.n - report.n_positive;
  report.accuracy = accuracy(scores, labels, threshold);
  if (report.n_positive > 0 && report.n_negative > 0) report.auroc = auroc(scores, labels);
  return report;
}

}  // namespace memescore
