#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "memescore/cli.hpp"
#include "memescore/datamodel.hpp"
#include "memescore/features.hpp"
#include "memescore/quant.hpp"
#include "support/synthetic.hpp"

namespace memescore {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(const std::vector<std::string>& args, const std::string& stdin_text = "") {
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  const int code = cli::run(args, in, out, err);
  return {code, out.str(), err.str()};
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("memescore_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run_cli({}).code, cli::kUsageError);
  EXPECT_EQ(run_cli({"bogus"}).code, cli::kUsageError);
  EXPECT_EQ(run_cli({"eval"}).code, cli::kUsageError);
  EXPECT_EQ(run_cli({"score", "--threshold", "abc"}).code, cli::kUsageError);
  const Result help = run_cli({"--help"});
  EXPECT_EQ(help.code, cli::kOk);
  EXPECT_NE(help.out.find("quantize"), std::string::npos);
}

TEST_F(CliTest, ScoreSingleText) {
  const Result r = run_cli({"score", "--text", "", "--id", "empty"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  std::istringstream in(r.out);
  const auto scored = read_scored(in);
  ASSERT_EQ(scored.size(), 1u);
  EXPECT_EQ(scored[0].sample.id, "empty");
  EXPECT_EQ(scored[0].aggregate, 0.5);
}

TEST_F(CliTest, ScoreStdinWithDemoModelAndTiming) {
  const Result r = run_cli({"score", "--model", "builtin:demo", "--timing"},
                           "{\"id\":\"a\",\"text\":\"杀死你\"}\n{\"id\":\"b\",\"text\":\"你好吗\"}\n");
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  std::istringstream in(r.out);
  const auto scored = read_scored(in);
  ASSERT_EQ(scored.size(), 2u);
  EXPECT_GT(scored[0].score(), scored[1].score());
  EXPECT_NE(r.err.find("ms/sample"), std::string::npos);
}

TEST_F(CliTest, BadInputIsDataError) {
  EXPECT_EQ(run_cli({"score"}, "{not json}\n").code, cli::kDataError);
  EXPECT_EQ(run_cli({"score", "--model", "builtin:nope", "--text", "x"}).code, cli::kDataError);
  EXPECT_EQ(run_cli({"score", "--scripts", "klingon", "--text", "x"}).code, cli::kDataError);
  EXPECT_EQ(run_cli({"eval", "--samples", path("missing.jsonl")}).code, cli::kDataError);
  EXPECT_EQ(run_cli({"score", "--threshold", "2", "--text", "x"}).code, cli::kDataError);
}

TEST_F(CliTest, EvalWritesReportAndScored) {
  write_file(path("samples.jsonl"),
             "{\"id\":\"a\",\"text\":\"杀死你 lol\",\"label\":1}\n"
             "{\"id\":\"b\",\"text\":\"你好吗\",\"label\":0}\n"
             "{\"id\":\"c\",\"text\":\"滚出去\",\"label\":1}\n");
  const Result r = run_cli({"eval", "--samples", path("samples.jsonl"), "--model", "builtin:demo", "--report",
                            path("report.json"), "--scored-out", path("scored.jsonl")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const EvalReport report = parse_report(read_file(path("report.json")));
  EXPECT_EQ(report.auroc, std::optional<double>(1.0));
  EXPECT_EQ(report.n, 3u);
  std::ifstream scored_in(path("scored.jsonl"));
  EXPECT_EQ(read_scored(scored_in).size(), 3u);
}

TEST_F(CliTest, EvalWithoutBothClassesFails) {
  write_file(path("samples.jsonl"), "{\"id\":\"a\",\"text\":\"x\",\"label\":1}\n{\"id\":\"b\",\"text\":\"y\"}\n");
  const Result r = run_cli({"eval", "--samples", path("samples.jsonl")});
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find("AUROC undefined"), std::string::npos) << r.err;
}

TEST_F(CliTest, ConfigFileAndFlagOverride) {
  write_file(path("model.json"), toy_model_to_json(synthetic::cue_model()).dump());
  write_file(path("pipeline.json"), R"({"model": "model.json", "threshold": 0.3})");
  write_file(path("samples.jsonl"), "{\"id\":\"a\",\"text\":\"杀死你\",\"label\":1}\n"
                                    "{\"id\":\"b\",\"text\":\"你好吗\",\"label\":0}\n");
  const Result from_config = run_cli({"eval", "--samples", path("samples.jsonl"), "--config", path("pipeline.json")});
  ASSERT_EQ(from_config.code, cli::kOk) << from_config.err;
  EXPECT_EQ(parse_report(from_config.out).threshold, 0.3);
  const Result overridden = run_cli(
      {"eval", "--samples", path("samples.jsonl"), "--config", path("pipeline.json"), "--threshold", "0.7"});
  ASSERT_EQ(overridden.code, cli::kOk) << overridden.err;
  EXPECT_EQ(parse_report(overridden.out).threshold, 0.7);
}

TEST_F(CliTest, FilterText) {
  Result r = run_cli({"filter-text", "--text", "ya ya papaya"});
  ASSERT_EQ(r.code, cli::kOk);
  EXPECT_EQ(r.out, "\n");
  r = run_cli({"filter-text"}, "lol 杀死你 வணக்கம்\nhello world\n");
  ASSERT_EQ(r.code, cli::kOk);
  EXPECT_EQ(r.out, "杀死你 வணக்கம்\n\n");
  r = run_cli({"filter-text", "--scripts", "latin", "--text", "lol 杀死你"});
  EXPECT_EQ(r.out, "lol\n");
}

TEST_F(CliTest, QuantizationWorkflow) {
  write_file(path("acts.jsonl"), "[1, 2, 0, 1]\n[3, 0, 1, 1]\n");
  Result r = run_cli({"imatrix", "--activations", path("acts.jsonl"), "--out", path("a.imx")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  ImportanceMatrix expected(4);
  expected.accumulate(std::vector<double>{1, 2, 0, 1});
  expected.accumulate(std::vector<double>{3, 0, 1, 1});
  EXPECT_EQ(load_importance(path("a.imx")), expected);

  r = run_cli({"imatrix", "--merge", path("a.imx"), "--out", path("b.imx")}, "[1, 1, 1, 1]\n");
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_EQ(load_importance(path("b.imx")).count, 3u);

  write_file(path("w.json"), R"({"data": [[0, 1, 2, 3], [0.5, 0.5, 0.5, 0.5]]})");
  r = run_cli({"quantize", "--weights", path("w.json"), "--imatrix", path("a.imx"), "--bits", "2", "--block-size",
               "4", "--threads", "2", "--out", path("w.aqt")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const QuantizedTensor t = load_quantized(path("w.aqt"));
  EXPECT_EQ(t.rows, 2u);
  EXPECT_EQ(t.cols, 4u);

  r = run_cli({"report-quant", "--weights", path("w.json"), "--quantized", path("w.aqt"), "--imatrix", path("a.imx")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto report = nlohmann::json::parse(r.out);
  EXPECT_EQ(report.at("weighted_mse").get<double>(), 0.0);
  EXPECT_EQ(report.at("bits_per_weight").get<double>(), 2.0 + 64.0 / 4.0);
}

TEST_F(CliTest, QuantizationErrors) {
  write_file(path("w.json"), R"({"rows": 1, "cols": 3, "data": [1, 2]})");
  EXPECT_EQ(run_cli({"quantize", "--weights", path("w.json"), "--out", path("x.aqt")}).code, cli::kDataError);
  write_file(path("w2.json"), R"({"rows": 1, "cols": 4, "data": [1, 2, 3, 4]})");
  EXPECT_EQ(run_cli({"quantize", "--weights", path("w2.json"), "--bits", "5", "--block-size", "4", "--out",
                     path("x.aqt")})
                .code,
            cli::kDataError);
  EXPECT_EQ(run_cli({"imatrix", "--out", path("x.imx")}, "[1, 2]\n[1]\n").code, cli::kDataError);
  EXPECT_EQ(run_cli({"imatrix", "--out", path("x.imx")}, "").code, cli::kDataError);
  write_file(path("junk.aqt"), "AQT1junk");
  EXPECT_EQ(run_cli({"report-quant", "--weights", path("w2.json"), "--quantized", path("junk.aqt")}).code,
            cli::kDataError);
}

TEST_F(CliTest, TrainHeadFromScoredOutput) {
  const auto set = synthetic::make_dataset(60, 11);
  write_file(path("model.json"), toy_model_to_json(set.model).dump());
  std::ostringstream samples;
  write_samples(set.samples, samples);
  write_file(path("samples.jsonl"), samples.str());
  Result r = run_cli({"score", "--samples", path("samples.jsonl"), "--model", path("model.json"), "--out",
                      path("scored.jsonl")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  r = run_cli({"train-head", "--scored", path("scored.jsonl"), "--out", path("head.json"), "--hidden", "4",
               "--epochs", "50", "--seed", "3"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const FcnHead head = load_head(path("head.json"));
  EXPECT_EQ(head.hidden_width, 4u);
  EXPECT_EQ(head.seed, 3u);

  r = run_cli({"eval", "--samples", path("samples.jsonl"), "--model", path("model.json"), "--head",
               path("head.json")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_TRUE(parse_report(r.out).auroc.has_value());
}

TEST_F(CliTest, TrainHeadNeedsBothClasses) {
  const Result r = run_cli({"train-head", "--out", path("head.json")},
                           "{\"id\":\"a\",\"text\":\"\",\"label\":1,\"score\":0.5,\"aggregate_score\":0.5,"
                           "\"features\":[0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1],"
                           "\"distribution\":[0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1]}\n");
  EXPECT_EQ(r.code, cli::kDataError) << r.err;
}

}  // namespace
}  // namespace memescore
