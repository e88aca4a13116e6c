#include "memescore/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "jsonl.hpp"
#include "memescore/datamodel.hpp"
#include "memescore/error.hpp"
#include "memescore/features.hpp"
#include "memescore/pipeline.hpp"
#include "memescore/quant.hpp"
#include "memescore/textproc.hpp"

namespace memescore::cli {

using nlohmann::json;

namespace {

// Pipeline flags; unset ones fall back to the config file, then to defaults.
struct PipelineFlags {
  std::string config;
  std::string template_path;
  std::vector<std::string> scripts;
  std::string lexicon;
  std::string model;
  std::string head;
  std::optional<double> threshold;
  std::optional<std::size_t> parallelism;

  void attach(CLI::App& app) {
    app.add_option("--config", config, "JSON pipeline config supplying defaults");
    app.add_option("--template", template_path, "prompt template JSON");
    app.add_option("--scripts", scripts, "allowed script classes (han, tamil, latin)")->delimiter(',');
    app.add_option("--lexicon", lexicon, "translation lexicon (source<TAB>target lines)");
    app.add_option("--model", model, "toy model JSON or builtin:zero / builtin:demo");
    app.add_option("--head", head, "FCN head JSON");
    app.add_option("--threshold", threshold, "decision threshold in (0,1)");
    app.add_option("--parallelism", parallelism, "scoring worker count");
  }

  PipelineConfig resolve() const {
    PipelineConfig c = config.empty() ? PipelineConfig{} : PipelineConfig::load(config);
    if (!template_path.empty()) c.template_path = template_path;
    if (!scripts.empty()) {
      c.script_filter.allowed_scripts.clear();
      for (const auto& s : scripts) c.script_filter.allowed_scripts.insert(parse_script_name(s));
    }
    if (!lexicon.empty()) c.lexicon_path = lexicon;
    if (!model.empty()) c.logit_source = model;
    if (!head.empty()) c.head_path = head;
    if (threshold) c.threshold = *threshold;
    if (parallelism) c.parallelism = *parallelism;
    c.validate();
    return c;
  }
};

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw DataError("cannot create " + path);
    }
  }
  std::ostream& stream(std::ostream& fallback) { return file_.is_open() ? file_ : fallback; }

 private:
  std::ofstream file_;
};

std::vector<Sample> read_samples(const std::string& path, std::istream& in) {
  if (path.empty() || path == "-") return ingest_samples(in);
  return ingest_samples_file(path);
}

Matrix matrix_from_json(const json& record) {
  Matrix m;
  const json& data = record.at("data");
  if (!data.empty() && data.front().is_array()) {
    m.rows = data.size();
    m.cols = data.front().size();
    for (const json& row : data) {
      if (row.size() != m.cols) throw DataError("matrix rows differ in length");
      for (const json& v : row) m.data.push_back(v.get<double>());
    }
  } else {
    m.rows = record.at("rows").get<std::size_t>();
    m.cols = record.at("cols").get<std::size_t>();
    m.data = data.get<std::vector<double>>();
  }
  if (m.data.size() != m.rows * m.cols) throw DataError("matrix data does not match rows x cols");
  return m;
}

Matrix load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open matrix file " + path);
  try {
    return matrix_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

void report_timing(const std::vector<double>& ms, std::ostream& err) {
  if (ms.empty()) return;
  const double total = std::accumulate(ms.begin(), ms.end(), 0.0);
  err << "scored " << ms.size() << " samples, mean " << total / static_cast<double>(ms.size())
      << " ms/sample, max " << *std::max_element(ms.begin(), ms.end()) << " ms\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"memescore: digit-gated harm scoring, importance-weighted quantization, evaluation"};
  app.require_subcommand(1);

  // score
  PipelineFlags score_flags;
  std::string score_samples, score_text, score_id = "cli", score_out;
  bool score_timing = false;
  auto* score = app.add_subcommand("score", "score one text or a sample stream");
  score_flags.attach(*score);
  score->add_option("--samples", score_samples, "line-delimited sample file (default stdin)");
  score->add_option("--text", score_text, "score a single OCR text instead of a file");
  score->add_option("--id", score_id, "id for --text");
  score->add_option("--out", score_out, "scored output (default stdout)");
  score->add_flag("--timing", score_timing, "print per-sample wall time summary to stderr");

  // eval
  PipelineFlags eval_flags;
  std::string eval_samples, eval_report, eval_scored;
  auto* eval = app.add_subcommand("eval", "score a labeled dataset and write an AUROC/accuracy report");
  eval_flags.attach(*eval);
  eval->add_option("--samples", eval_samples, "line-delimited sample file")->required();
  eval->add_option("--report", eval_report, "report output (default stdout)");
  eval->add_option("--scored-out", eval_scored, "also write scored samples here");

  // filter-text
  std::string filter_text;
  std::vector<std::string> filter_scripts;
  auto* filter = app.add_subcommand("filter-text", "keep only tokens containing allowed-script characters");
  auto* filter_text_opt = filter->add_option("--text", filter_text, "text to filter (default: stdin lines)");
  filter->add_option("--scripts", filter_scripts, "allowed script classes")->delimiter(',');

  // imatrix
  std::string imx_activations, imx_out;
  std::vector<std::string> imx_merge;
  auto* imatrix = app.add_subcommand("imatrix", "accumulate an importance matrix from activation rows");
  imatrix->add_option("--activations", imx_activations, "JSON lines, one activation array per line (default stdin)");
  imatrix->add_option("--merge", imx_merge, "existing IMX1 files to merge in");
  imatrix->add_option("--out", imx_out, "IMX1 output file")->required();

  // quantize
  std::string q_weights, q_imatrix, q_out;
  QuantConfig q_config;
  std::size_t q_threads = 1;
  auto* quantize = app.add_subcommand("quantize", "importance-weighted affine block quantization");
  quantize->add_option("--weights", q_weights, "weight matrix JSON {rows, cols, data}")->required();
  quantize->add_option("--imatrix", q_imatrix, "IMX1 importance file (default: uniform)");
  quantize->add_option("--bits", q_config.bits, "code width: 2, 3, 4 or 8");
  quantize->add_option("--block-size", q_config.block_size, "elements per block");
  quantize->add_option("--refine-iters", q_config.refine_iters, "assign/refit rounds");
  quantize->add_option("--epsilon", q_config.importance_epsilon, "added to every importance weight");
  quantize->add_option("--threads", q_threads, "worker threads");
  quantize->add_option("--out", q_out, "AQT1 output file")->required();

  // report-quant
  std::string r_weights, r_quantized, r_imatrix;
  double r_epsilon = 1e-8;
  auto* report_quant = app.add_subcommand("report-quant", "quantization error report");
  report_quant->add_option("--weights", r_weights, "original weight matrix JSON")->required();
  report_quant->add_option("--quantized", r_quantized, "AQT1 file")->required();
  report_quant->add_option("--imatrix", r_imatrix, "IMX1 file (default: uniform)");
  report_quant->add_option("--epsilon", r_epsilon, "added to every importance weight");

  // train-head
  std::string t_scored, t_out;
  TrainConfig t_config;
  auto* train = app.add_subcommand("train-head", "fit the FCN head on scored, labeled samples");
  train->add_option("--scored", t_scored, "scored sample stream (default stdin)");
  train->add_option("--out", t_out, "head JSON output")->required();
  train->add_option("--hidden", t_config.hidden_width, "hidden width");
  train->add_option("--lr", t_config.learning_rate, "learning rate");
  train->add_option("--epochs", t_config.epochs, "full-batch epochs");
  train->add_option("--seed", t_config.seed, "initialization seed");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kUsageError;
  }

  try {
    if (score->parsed()) {
      const Pipeline pipeline = Pipeline::resolve(score_flags.resolve());
      std::vector<Sample> samples;
      if (score->count("--text") > 0) {
        samples.push_back(Sample{score_id, score_text, std::nullopt, std::nullopt});
      } else {
        samples = read_samples(score_samples, in);
      }
      std::vector<double> elapsed;
      const auto scored = pipeline.score_all(samples, &elapsed);
      Output sink(score_out);
      write_scored(scored, sink.stream(out));
      if (score_timing) report_timing(elapsed, err);
    } else if (eval->parsed()) {
      const Pipeline pipeline = Pipeline::resolve(eval_flags.resolve());
      const std::vector<Sample> samples = ingest_samples_file(eval_samples);
      std::vector<ScoredSample> scored;
      Output sink(eval_report);
      run_eval(samples, pipeline, sink.stream(out), &scored);
      if (!eval_scored.empty()) {
        Output scored_sink(eval_scored);
        write_scored(scored, scored_sink.stream(out));
      }
    } else if (filter->parsed()) {
      ScriptFilterConfig config;
      if (!filter_scripts.empty()) {
        config.allowed_scripts.clear();
        for (const auto& s : filter_scripts) config.allowed_scripts.insert(parse_script_name(s));
      }
      config.validate();
      if (filter_text_opt->count() > 0) {
        out << filter_script_text(filter_text, config) << '\n';
      } else {
        for (std::string line; std::getline(in, line);) out << filter_script_text(line, config) << '\n';
      }
    } else if (imatrix->parsed()) {
      std::optional<ImportanceMatrix> matrix;
      for (const auto& path : imx_merge) {
        ImportanceMatrix other = load_importance(path);
        if (matrix) {
          matrix->merge(other);
        } else {
          matrix = std::move(other);
        }
      }
      std::ifstream file;
      if (!imx_activations.empty() && imx_activations != "-") {
        file.open(imx_activations, std::ios::binary);
        if (!file) throw DataError("cannot open activation file " + imx_activations);
      }
      std::istream& src = file.is_open() ? file : in;
      detail::for_each_json_line(src, [&](const json& row, std::size_t) {
        const auto values = row.get<std::vector<double>>();
        if (!matrix) matrix.emplace(values.size());
        matrix->accumulate(values);
      });
      if (!matrix) throw DataError("no activation rows or importance files given");
      save_importance(*matrix, imx_out);
      err << "accumulated " << matrix->count << " rows over " << matrix->cols() << " columns\n";
    } else if (quantize->parsed()) {
      const Matrix weights = load_matrix(q_weights);
      std::vector<double> importance;
      if (!q_imatrix.empty()) importance = load_importance(q_imatrix).weights(q_config.importance_epsilon);
      const QuantizedTensor tensor = quantize_tensor(weights, importance, q_config, q_threads);
      save_quantized(tensor, q_out);
    } else if (report_quant->parsed()) {
      const Matrix weights = load_matrix(r_weights);
      const QuantizedTensor tensor = load_quantized(r_quantized);
      const ImportanceMatrix importance = r_imatrix.empty() ? ImportanceMatrix(weights.cols) : load_importance(r_imatrix);
      const QuantReport report = quantization_report(weights, tensor, importance, r_epsilon);
      out << json{{"weighted_mse", report.weighted_mse},
                  {"unweighted_mse", report.unweighted_mse},
                  {"bits_per_weight", report.bits_per_weight}}
                 .dump()
          << '\n';
    } else if (train->parsed()) {
      std::vector<ScoredSample> scored;
      if (t_scored.empty() || t_scored == "-") {
        scored = read_scored(in);
      } else {
        std::ifstream file(t_scored, std::ios::binary);
        if (!file) throw DataError("cannot open scored file " + t_scored);
        scored = read_scored(file);
      }
      std::vector<DigitVector> features;
      std::vector<int> labels;
      for (const ScoredSample& s : scored) {
        if (!s.sample.label) continue;
        features.push_back(s.features);
        labels.push_back(*s.sample.label);
      }
      const TrainedHead trained = train_head_traced(features, labels, t_config);
      save_head(trained.head, t_out);
      err << "trained on " << features.size() << " samples, loss " << trained.initial_loss << " -> "
          << trained.final_loss << '\n';
    }
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternalError;
  }
  return kOk;
}

}  // namespace memescore::cli
