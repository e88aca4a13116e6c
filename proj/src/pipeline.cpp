#include "memescore/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "memescore/error.hpp"
#include "memescore/metrics.hpp"
#include "memescore/parallel.hpp"

namespace memescore {

using nlohmann::json;

namespace {

constexpr std::string_view kBuiltinPrefix = "builtin:";

template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  return p.is_relative() && !base.empty() ? base / p : p;
}

}  // namespace

void PipelineConfig::validate() const {
  script_filter.validate();
  if (!(threshold > 0.0 && threshold < 1.0)) throw DataError("threshold must lie in (0, 1)");
  if (parallelism == 0) throw DataError("parallelism must be positive");
  if (logit_source.empty()) throw DataError("logit source must be set");
}

PipelineConfig PipelineConfig::from_json(const json& record, const std::filesystem::path& base_dir) {
  if (!record.is_object()) throw DataError("pipeline config must be an object");
  PipelineConfig c;
  try {
    if (auto it = record.find("template"); it != record.end() && !it->is_null()) {
      c.template_path = resolve_path(base_dir, it->get<std::string>());
    }
    if (auto it = record.find("scripts"); it != record.end()) {
      c.script_filter.allowed_scripts.clear();
      for (const json& name : *it) c.script_filter.allowed_scripts.insert(parse_script_name(name.get<std::string>()));
    }
    if (auto it = record.find("lexicon"); it != record.end() && !it->is_null()) {
      c.lexicon_path = resolve_path(base_dir, it->get<std::string>());
    }
    if (auto it = record.find("model"); it != record.end()) {
      const auto model = it->get<std::string>();
      c.logit_source = model.starts_with(kBuiltinPrefix) ? model : resolve_path(base_dir, model).string();
    }
    if (auto it = record.find("head"); it != record.end() && !it->is_null()) {
      c.head_path = resolve_path(base_dir, it->get<std::string>());
    }
    c.threshold = record.value("threshold", c.threshold);
    c.parallelism = record.value("parallelism", c.parallelism);
  } catch (const json::exception& e) {
    throw DataError(std::string("pipeline config: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open config file " + path.string());
  json record;
  try {
    record = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return from_json(record, path.parent_path());
}

Pipeline::Pipeline(PromptTemplate tmpl, ScriptFilterConfig script_filter,
                   std::shared_ptr<const Translator> translator, std::shared_ptr<const LogitSource> logits,
                   std::optional<FcnHead> head, double threshold, std::size_t parallelism)
    : template_(std::move(tmpl)),
      script_filter_(std::move(script_filter)),
      translator_(std::move(translator)),
      logits_(std::move(logits)),
      head_(std::move(head)),
      threshold_(threshold),
      parallelism_(parallelism) {
  template_.validate();
  script_filter_.validate();
  if (!logits_) throw DataError("pipeline needs a logit source");
  if (head_) head_->validate();
  if (!(threshold_ > 0.0 && threshold_ < 1.0)) throw DataError("threshold must lie in (0, 1)");
  if (parallelism_ == 0) throw DataError("parallelism must be positive");
}

Pipeline Pipeline::resolve(const PipelineConfig& config) {
  config.validate();
  PromptTemplate tmpl = config.template_path ? load_template(*config.template_path) : PromptTemplate{};
  std::shared_ptr<const Translator> translator;
  if (config.lexicon_path) translator = std::make_shared<LexiconTranslator>(load_lexicon(*config.lexicon_path));
  std::shared_ptr<const LogitSource> logits;
  if (config.logit_source.starts_with(kBuiltinPrefix)) {
    logits = std::make_shared<ToyLogitSource>(
        ToyLogitSource::builtin(std::string_view(config.logit_source).substr(kBuiltinPrefix.size())));
  } else {
    logits = std::make_shared<ToyLogitSource>(load_toy_model(config.logit_source));
  }
  std::optional<FcnHead> head;
  if (config.head_path) head = load_head(*config.head_path);
  return Pipeline(std::move(tmpl), config.script_filter, std::move(translator), std::move(logits),
                  std::move(head), config.threshold, config.parallelism);
}

std::string Pipeline::render_prompt(const Sample& sample) const {
  const std::string filtered = run_stage("filter", [&] { return filter_script_text(sample.text, script_filter_); });
  std::optional<std::string> translation;
  if (translator_ && !filtered.empty()) {
    translation = run_stage("translate", [&] {
      const ScriptClass source = dominant_script(filtered, script_filter_).value_or(ScriptClass::kOther);
      return translator_->translate(filtered, source);
    });
    if (translation->empty()) translation.reset();
  }
  return run_stage("prompt", [&] {
    return build_prompt(template_, filtered,
                        translation ? std::optional<std::string_view>(*translation) : std::nullopt);
  });
}

ScoredSample Pipeline::score(const Sample& sample) const {
  const std::string prompt = render_prompt(sample);
  const std::vector<double> logits = run_stage("logits", [&] { return logits_->logits_for(prompt); });
  ScoredSample out;
  out.sample = sample;
  out.distribution = run_stage("gate", [&] { return constrained_digit_distribution(logits, logits_->vocabulary()); });
  run_stage("features", [&] {
    out.aggregate = aggregate_score(out.distribution).value;
    out.features = extract_features(out.distribution);
    return 0;
  });
  if (head_) out.head_score = run_stage("head", [&] { return predict_head(*head_, out.features).value; });
  return out;
}

std::vector<ScoredSample> Pipeline::score_all(std::span<const Sample> samples,
                                              std::vector<double>* elapsed_ms) const {
  std::vector<ScoredSample> out(samples.size());
  if (elapsed_ms) elapsed_ms->assign(samples.size(), 0.0);
  parallel_for(samples.size(), parallelism_, [&](std::size_t i) {
    const auto start = std::chrono::steady_clock::now();
    try {
      out[i] = score(samples[i]);
    } catch (const std::exception& e) {
      throw DataError("sample \"" + samples[i].id + "\": " + e.what());
    }
    if (elapsed_ms) {
      (*elapsed_ms)[i] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
  });
  return out;
}

EvalReport Pipeline::evaluate(std::span<const ScoredSample> scored) const {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const ScoredSample& s : scored) {
    if (!s.sample.label) continue;
    scores.push_back(s.score());
    labels.push_back(*s.sample.label);
  }
  const auto positives = std::count(labels.begin(), labels.end(), 1);
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(labels.size())) {
    throw DataError("AUROC undefined: dataset needs at least one labeled sample of each class (" +
                    std::to_string(positives) + " positive, " + std::to_string(labels.size() - positives) +
                    " negative)");
  }
  return evaluate_scores(scores, labels, threshold_);
}

ScoredSample score_pipeline(const Sample& sample, const PipelineConfig& config) {
  return Pipeline::resolve(config).score(sample);
}

EvalReport run_eval(std::span<const Sample> samples, const Pipeline& pipeline, std::ostream& report_sink,
                    std::vector<ScoredSample>* scored_out) {
  std::vector<ScoredSample> scored = pipeline.score_all(samples);
  EvalReport report = pipeline.evaluate(scored);
  write_report(report, report_sink);
  if (scored_out) *scored_out = std::move(scored);
  return report;
}

EvalReport run_eval(const std::filesystem::path& samples_path, const PipelineConfig& config,
                    std::ostream& report_sink) {
  const Pipeline pipeline = Pipeline::resolve(config);
  const std::vector<Sample> samples = ingest_samples_file(samples_path);
  return run_eval(samples, pipeline, report_sink);
}

}  // namespace memescore
