#include "memescore/datamodel.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "jsonl.hpp"
#include "memescore/error.hpp"

namespace memescore {

using nlohmann::json;

namespace {

constexpr double kProbSumTolerance = 1e-9;

const char* const kKnownSampleKeys[] = {"id", "text", "image", "label"};
const char* const kScoreKeys[] = {"score", "aggregate_score", "head_score", "features",
                                  "distribution"};

DigitVector digits_from_json(const json& value, const char* key) {
  if (!value.is_array() || value.size() != kNumDigits) {
    throw DataError(std::string("\"") + key + "\" must be an array of 10 numbers");
  }
  DigitVector out{};
  for (std::size_t d = 0; d < kNumDigits; ++d) out[d] = value[d].get<double>();
  return out;
}

void ensure_sink(std::ostream& out) {
  if (!out) throw DataError("write failure on output stream");
}

}  // namespace

TokenDistribution::TokenDistribution(const DigitVector& probs) : probs_(probs) {
  double sum = 0.0;
  for (double p : probs_) {
    if (!std::isfinite(p) || p < 0.0) throw DataError("token distribution entries must be finite and >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbSumTolerance) {
    throw DataError("token distribution must sum to 1, got " + std::to_string(sum));
  }
}

TokenDistribution TokenDistribution::uniform() {
  DigitVector p;
  p.fill(1.0 / static_cast<double>(kNumDigits));
  return TokenDistribution(p);
}

Sample sample_from_json(const json& record) {
  if (!record.is_object()) throw DataError("record is not an object");
  Sample s;
  auto id = record.find("id");
  if (id == record.end() || !id->is_string()) throw DataError("missing string field \"id\"");
  s.id = id->get<std::string>();
  if (s.id.empty()) throw DataError("\"id\" must be non-empty");

  auto text = record.find("text");
  if (text == record.end() || !text->is_string()) {
    throw DataError("sample \"" + s.id + "\": missing string field \"text\"");
  }
  s.text = text->get<std::string>();

  if (auto image = record.find("image"); image != record.end() && !image->is_null()) {
    if (!image->is_string()) throw DataError("sample \"" + s.id + "\": \"image\" must be a string");
    s.image_ref = image->get<std::string>();
  }
  if (auto label = record.find("label"); label != record.end() && !label->is_null()) {
    if (!label->is_number_integer() || (label->get<long long>() != 0 && label->get<long long>() != 1)) {
      throw DataError("sample \"" + s.id + "\": \"label\" must be 0 or 1");
    }
    s.label = label->get<int>();
  }
  for (const auto& [key, value] : record.items()) {
    bool known = false;
    for (const char* k : kKnownSampleKeys) known = known || key == k;
    if (!known) s.extra[key] = value;
  }
  return s;
}

json sample_to_json(const Sample& sample) {
  json out = sample.extra.is_object() ? sample.extra : json::object();
  out["id"] = sample.id;
  out["text"] = sample.text;
  if (sample.image_ref) out["image"] = *sample.image_ref;
  if (sample.label) out["label"] = *sample.label;
  return out;
}

std::vector<Sample> ingest_samples(std::istream& in) {
  std::vector<Sample> samples;
  std::unordered_set<std::string> seen;
  detail::for_each_json_line(in, [&](const json& record, std::size_t) {
    Sample s = sample_from_json(record);
    if (!seen.insert(s.id).second) throw DataError("duplicate sample id \"" + s.id + "\"");
    samples.push_back(std::move(s));
  });
  return samples;
}

std::vector<Sample> ingest_samples_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open sample file " + path.string());
  try {
    return ingest_samples(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_samples(std::span<const Sample> samples, std::ostream& out) {
  for (const Sample& s : samples) out << sample_to_json(s).dump() << '\n';
  ensure_sink(out);
}

json scored_to_json(const ScoredSample& scored) {
  json out = sample_to_json(scored.sample);
  out["score"] = scored.score();
  out["aggregate_score"] = scored.aggregate;
  if (scored.head_score) out["head_score"] = *scored.head_score;
  out["features"] = scored.features;
  out["distribution"] = scored.distribution.probs();
  return out;
}

ScoredSample scored_from_json(const json& record) {
  json sample_part = record;
  for (const char* key : kScoreKeys) sample_part.erase(key);
  ScoredSample s;
  s.sample = sample_from_json(sample_part);
  s.distribution = TokenDistribution(digits_from_json(record.at("distribution"), "distribution"));
  s.features = digits_from_json(record.at("features"), "features");
  s.aggregate = record.at("aggregate_score").get<double>();
  if (auto head = record.find("head_score"); head != record.end()) s.head_score = head->get<double>();
  return s;
}

void write_scored(std::span<const ScoredSample> scored, std::ostream& out) {
  for (const ScoredSample& s : scored) out << scored_to_json(s).dump() << '\n';
  ensure_sink(out);
}

std::vector<ScoredSample> read_scored(std::istream& in) {
  std::vector<ScoredSample> out;
  detail::for_each_json_line(in, [&](const json& record, std::size_t) {
    out.push_back(scored_from_json(record));
  });
  return out;
}

json report_to_json(const EvalReport& report) {
  json out = json::object();
  const bool defined = report.auroc && report.n_positive > 0 && report.n_negative > 0;
  out["auroc"] = defined ? json(*report.auroc) : json(nullptr);
  out["accuracy"] = report.accuracy;
  out["n"] = report.n;
  out["threshold"] = report.threshold;
  out["n_positive"] = report.n_positive;
  out["n_negative"] = report.n_negative;
  return out;
}

EvalReport report_from_json(const json& record) {
  EvalReport r;
  if (const json& a = record.at("auroc"); !a.is_null()) r.auroc = a.get<double>();
  r.accuracy = record.at("accuracy").get<double>();
  r.n = record.at("n").get<std::size_t>();
  r.threshold = record.at("threshold").get<double>();
  r.n_positive = record.at("n_positive").get<std::size_t>();
  r.n_negative = record.at("n_negative").get<std::size_t>();
  return r;
}

void write_report(const EvalReport& report, std::ostream& out) {
  if (report.n != report.n_positive + report.n_negative) {
    throw DataError("report invariant violated: n != n_positive + n_negative");
  }
  // nlohmann serializes doubles with max_digits10 (17 significant digits).
  out << report_to_json(report).dump() << '\n';
  ensure_sink(out);
}

EvalReport parse_report(std::string_view line) {
  try {
    return report_from_json(json::parse(line));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report record: ") + e.what());
  }
}

}  // namespace memescore
