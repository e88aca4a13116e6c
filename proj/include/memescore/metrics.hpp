#pragma once

#include <span>

#include "memescore/datamodel.hpp"

namespace memescore {

// Area under the ROC curve from the Mann-Whitney rank sum with average ranks
// for ties: the probability that a random positive outscores a random
// negative, tied pairs counting one half. Throws DataError unless both classes
// are present, lengths match, labels are 0/1 and no score is NaN.
double auroc(std::span<const double> scores, std::span<const int> labels);

// Fraction of samples with (score >= threshold) == label.
double accuracy(std::span<const double> scores, std::span<const int> labels, double threshold);

// AUROC (when both classes occur) and accuracy over the given labeled scores.
EvalReport evaluate_scores(std::span<const double> scores, std::span<const int> labels, double threshold);

}  // namespace memescore
