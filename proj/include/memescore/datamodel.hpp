#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "memescore/token_distribution.hpp"

namespace memescore {

// One meme record. `extra` carries keys this toolkit does not understand so
// that read-through tools can write them back out untouched.
struct Sample {
  std::string id;
  std::string text;
  std::optional<std::string> image_ref;
  std::optional<int> label;  // 0 = benign, 1 = harmful
  nlohmann::json extra = nlohmann::json::object();

  bool operator==(const Sample&) const = default;
};

struct ScoredSample {
  Sample sample;
  TokenDistribution distribution = TokenDistribution::uniform();
  double aggregate = 0.5;  // aggregate_score(distribution)
  DigitVector features{};
  std::optional<double> head_score;

  // The score used for ranking and thresholding: the head output when a head
  // was applied, otherwise the aggregate.
  double score() const noexcept { return head_score.value_or(aggregate); }

  bool operator==(const ScoredSample&) const = default;
};

struct EvalReport {
  std::optional<double> auroc;  // absent when either class is missing
  double accuracy = 0.0;
  std::size_t n = 0;
  double threshold = 0.5;
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;

  bool operator==(const EvalReport&) const = default;
};

// Reads line-delimited JSON sample records. Blank lines are skipped; line
// numbers in errors are 1-based physical lines.
std::vector<Sample> ingest_samples(std::istream& in);
std::vector<Sample> ingest_samples_file(const std::filesystem::path& path);

nlohmann::json sample_to_json(const Sample& sample);
Sample sample_from_json(const nlohmann::json& record);
void write_samples(std::span<const Sample> samples, std::ostream& out);

// Input record plus "score", "aggregate_score", optional "head_score",
// "features" and "distribution".
nlohmann::json scored_to_json(const ScoredSample& scored);
ScoredSample scored_from_json(const nlohmann::json& record);
void write_scored(std::span<const ScoredSample> scored, std::ostream& out);
std::vector<ScoredSample> read_scored(std::istream& in);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& record);
// Emits one JSON record followed by a newline. Throws DataError when the
// report's count invariants do not hold or the sink fails.
void write_report(const EvalReport& report, std::ostream& out);
EvalReport parse_report(std::string_view line);

}  // namespace memescore
