#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "memescore/datamodel.hpp"
#include "memescore/features.hpp"
#include "memescore/gate.hpp"
#include "memescore/textproc.hpp"

namespace memescore {

// File-level description of a scoring pipeline. Relative paths in a config
// file are resolved against the file's directory.
struct PipelineConfig {
  std::optional<std::filesystem::path> template_path;  // default template when unset
  ScriptFilterConfig script_filter;
  std::optional<std::filesystem::path> lexicon_path;
  // "builtin:<name>" (see ToyLogitSource::builtin) or a toy-model file.
  std::string logit_source = "builtin:zero";
  std::optional<std::filesystem::path> head_path;
  double threshold = 0.5;
  std::size_t parallelism = 1;

  void validate() const;

  // Keys: template, scripts, lexicon, model, head, threshold, parallelism.
  static PipelineConfig from_json(const nlohmann::json& record, const std::filesystem::path& base_dir = {});
  static PipelineConfig load(const std::filesystem::path& path);
};

// A resolved pipeline: every referenced file loaded and validated. Scoring is
// const and thread-safe.
class Pipeline {
 public:
  Pipeline(PromptTemplate tmpl, ScriptFilterConfig script_filter, std::shared_ptr<const Translator> translator,
           std::shared_ptr<const LogitSource> logits, std::optional<FcnHead> head, double threshold = 0.5,
           std::size_t parallelism = 1);

  static Pipeline resolve(const PipelineConfig& config);

  // filter -> translate -> prompt -> logits -> digit gate -> aggregate and
  // features -> optional head. Stage failures surface as StageError.
  ScoredSample score(const Sample& sample) const;

  // Scores every sample on up to parallelism() workers; output order matches
  // input order. When `elapsed_ms` is non-null it receives per-sample wall
  // time. A failure names the first failing sample.
  std::vector<ScoredSample> score_all(std::span<const Sample> samples,
                                      std::vector<double>* elapsed_ms = nullptr) const;

  // Metrics over the labeled subset of already scored samples.
  EvalReport evaluate(std::span<const ScoredSample> scored) const;

  std::string render_prompt(const Sample& sample) const;

  const PromptTemplate& prompt_template() const noexcept { return template_; }
  double threshold() const noexcept { return threshold_; }
  std::size_t parallelism() const noexcept { return parallelism_; }
  bool has_head() const noexcept { return head_.has_value(); }

 private:
  PromptTemplate template_;
  ScriptFilterConfig script_filter_;
  std::shared_ptr<const Translator> translator_;
  std::shared_ptr<const LogitSource> logits_;
  std::optional<FcnHead> head_;
  double threshold_;
  std::size_t parallelism_;
};

ScoredSample score_pipeline(const Sample& sample, const PipelineConfig& config);

// Ingests, scores, evaluates and writes the report record to `report_sink`.
// Throws DataError when the dataset lacks a labeled sample of either class.
EvalReport run_eval(const std::filesystem::path& samples_path, const PipelineConfig& config,
                    std::ostream& report_sink);

// Same, for an already resolved pipeline and in-memory samples; optionally
// hands back the scored records.
EvalReport run_eval(std::span<const Sample> samples, const Pipeline& pipeline, std::ostream& report_sink,
                    std::vector<ScoredSample>* scored_out = nullptr);

}  // namespace memescore
