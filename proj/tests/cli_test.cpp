#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "rnmt/cli.h"
#include "rnmt/corpus.h"
#include "rnmt/error.h"
#include "rnmt/run_config.h"

#include <unistd.h>

namespace rnmt {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("rnmt_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run_cli(args, out_, err_);
  }

  std::string p(const std::string& name) const { return (dir_ / name).string(); }

  // Small synthetic corpus under dir_/data.
  void synth(const std::string& family = "blockSwap(3)+headFinal", const std::string& count = "60") {
    ASSERT_EQ(run({"synth", "--family", family, "--vocab", "16", "--min-len", "3", "--max-len", "7", "--count", count,
                   "--split", "0.8,0.1,0.1", "--seed", "3", "--out", p("data")}),
              0)
        << err_.str();
  }

  std::vector<std::string> tiny_train(const std::string& variant, const std::string& out) {
    return {"train", "--train", p("data/train"), "--valid", p("data/valid"), "--out", p(out),
            "--set", "d_model=8", "--set", "d_ff=16", "--set", "heads=2", "--set", "layers=1",
            "--set", "steps=12", "--set", "batch_size=8", "--set", "log_every=4", "--set", "warmup=4",
            "--set", "variant=" + variant, "--seed", "5"};
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

TEST_F(Cli, ScoreIdenticalFilesIsHundred) {
  spit(p("a.txt"), "the cat sat on the mat\nthere is a dog in the garden\n");
  EXPECT_EQ(run({"score", "--hyp", p("a.txt"), "--ref", p("a.txt")}), 0);
  EXPECT_EQ(out_.str(), "100.00\n");
}

TEST_F(Cli, ScoreLineCountMismatchIsDataError) {
  spit(p("a.txt"), "a b c d\n");
  spit(p("b.txt"), "a b c d\ne f g h\n");
  EXPECT_EQ(run({"score", "--hyp", p("a.txt"), "--ref", p("b.txt")}), kExitData);
  EXPECT_NE(err_.str().find("1 hypotheses vs 2 references"), std::string::npos);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run({}), kExitUsage);
  EXPECT_EQ(run({"frobnicate"}), kExitUsage);
  EXPECT_EQ(run({"score", "--hyp", p("a.txt")}), kExitUsage);
  EXPECT_EQ(run({"score", "--bogus"}), kExitUsage);
  EXPECT_EQ(run({"--help"}), 0);
  EXPECT_NE(out_.str().find("sweep-lambda"), std::string::npos);
}

TEST_F(Cli, MissingInputIsDataError) {
  EXPECT_EQ(run({"score", "--hyp", p("none.txt"), "--ref", p("none.txt")}), kExitData);
}

TEST_F(Cli, PreprocessIdentityAlignments) {
  spit(p("s"), "a b c\nd e\n");
  spit(p("t"), "x y z\nu v\n");
  spit(p("al"), "0-0 1-1 2-2\n0-0 1-1\n");
  ASSERT_EQ(run({"preprocess", "--src", p("s"), "--tgt", p("t"), "--align", p("al"), "--out", p("o")}), 0);
  EXPECT_EQ(slurp(dir_ / "o" / "source.pos"), "0 1 2\n0 1\n");
  EXPECT_EQ(slurp(dir_ / "o" / "source.reordered"), "a b c\nd e\n");
  EXPECT_NE(out_.str().find("mean_kendall_tau\t0.000000"), std::string::npos);
  EXPECT_EQ(slurp(dir_ / "o" / "stats.txt"), out_.str());
}

TEST_F(Cli, PreprocessReversalHasMaximalTau) {
  spit(p("s"), "a b c d\ne f\n");
  spit(p("t"), "w x y z\nu v\n");
  spit(p("al"), "0-3 1-2 2-1 3-0\n0-1 1-0\n");
  ASSERT_EQ(run({"preprocess", "--src", p("s"), "--tgt", p("t"), "--align", p("al"), "--out", p("o")}), 0);
  EXPECT_EQ(slurp(dir_ / "o" / "source.reordered"), "d c b a\nf e\n");
  EXPECT_NE(out_.str().find("mean_kendall_tau\t1.000000"), std::string::npos);
  EXPECT_NE(out_.str().find("tau[0.9,1.0]\t2"), std::string::npos);
}

TEST_F(Cli, PreprocessTargetFirstSwapsPairs) {
  spit(p("s"), "a b c\n");
  spit(p("t"), "x y z\n");
  spit(p("al"), "0-2 1-0 2-1\n");
  ASSERT_EQ(run({"preprocess", "--src", p("s"), "--tgt", p("t"), "--align", p("al"), "--out", p("o"),
                 "--target-first"}),
            0);
  // tgt 0 <- src 2, tgt 1 <- src 0, tgt 2 <- src 1.
  EXPECT_EQ(slurp(dir_ / "o" / "source.reordered"), "c a b\n");
}

TEST_F(Cli, PreprocessRejectsBadInput) {
  spit(p("s"), "a b\nc d\n");
  spit(p("t"), "x y\nz w\n");
  spit(p("al"), "0-0 1-1\n");
  EXPECT_EQ(run({"preprocess", "--src", p("s"), "--tgt", p("t"), "--align", p("al"), "--out", p("o")}), kExitData);
  EXPECT_NE(err_.str().find("alignment"), std::string::npos);

  spit(p("al"), "0-0 1-1\n0-0 7-1\n");
  EXPECT_EQ(run({"preprocess", "--src", p("s"), "--tgt", p("t"), "--align", p("al"), "--out", p("o")}), kExitData);
  EXPECT_NE(err_.str().find("2"), std::string::npos);
}

double brute_tau(const std::vector<std::int32_t>& r) {
  if (r.size() < 2) return 0.0;
  std::size_t inv = 0;
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = i + 1; j < r.size(); ++j) inv += r[i] > r[j];
  return static_cast<double>(inv) / (static_cast<double>(r.size() * (r.size() - 1)) / 2.0);
}

TEST_F(Cli, SynthThenPreprocessRoundTrips) {
  synth();
  ASSERT_EQ(run({"preprocess", "--src", p("data/train.src"), "--tgt", p("data/train.tgt"), "--align",
                 p("data/train.align"), "--out", p("pre")}),
            0)
      << err_.str();
  EXPECT_EQ(slurp(dir_ / "pre" / "source.pos"), slurp(dir_ / "data" / "train.pos"));

  // Reordered source maps token by token onto the target.
  const auto reordered = read_token_file(dir_ / "pre" / "source.reordered");
  const auto tgt = read_token_file(dir_ / "data" / "train.tgt");
  ASSERT_EQ(reordered.size(), 48u);
  std::map<std::string, std::string> sub;
  for (std::size_t i = 0; i < tgt.size(); ++i) {
    ASSERT_EQ(reordered[i].size(), tgt[i].size());
    for (std::size_t j = 0; j < tgt[i].size(); ++j) {
      auto [it, fresh] = sub.emplace(reordered[i][j], tgt[i][j]);
      EXPECT_EQ(it->second, tgt[i][j]);
    }
  }

  // Stats against an inversion-count oracle.
  double sum = 0;
  std::array<std::size_t, 10> hist{};
  for (const auto& r : read_positions(dir_ / "data" / "train.pos")) {
    const double t = brute_tau(r.positions);
    sum += t;
    hist[std::min<std::size_t>(9, static_cast<std::size_t>(t * 10))]++;
  }
  std::ostringstream expect;
  expect << "mean_kendall_tau\t" << std::fixed << std::setprecision(6) << sum / 48 << '\n';
  EXPECT_NE(out_.str().find(expect.str()), std::string::npos) << out_.str();
  const auto st = order_stats(read_positions(dir_ / "data" / "train.pos"));
  EXPECT_EQ(st.histogram, hist);
  EXPECT_GT(st.mean_tau, 0.2);
}

TEST_F(Cli, SynthIdentityFamilyIsMonotone) {
  synth("identity", "20");
  for (const auto& r : read_positions(dir_ / "data" / "train.pos"))
    for (std::size_t j = 0; j < r.size(); ++j) EXPECT_EQ(r[j], static_cast<std::int32_t>(j));
}

TEST_F(Cli, SynthRejectsBadFamily) {
  EXPECT_EQ(run({"synth", "--family", "shuffle(2)", "--out", p("data")}), kExitUsage);
  EXPECT_EQ(run({"synth", "--split", "0.5,0.1", "--out", p("data")}), kExitUsage);
}

TEST_F(Cli, TrainRefusesLambdaOnBaseline) {
  synth();
  auto args = tiny_train("baseline", "run");
  args.insert(args.end(), {"--set", "lambda=0.6"});
  EXPECT_EQ(run(args), kExitUsage);
  EXPECT_NE(err_.str().find("lambda"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "run"));
}

TEST_F(Cli, TrainRejectsUnknownKeys) {
  synth();
  auto args = tiny_train("baseline", "run");
  args.insert(args.end(), {"--set", "learning_rate=3"});
  EXPECT_EQ(run(args), kExitUsage);
  EXPECT_NE(err_.str().find("unknown config key 'learning_rate'"), std::string::npos);

  spit(p("bad.cfg"), "d_model = 8\nwarmpu = 10\n");
  args = tiny_train("baseline", "run");
  args.insert(args.end(), {"--config", p("bad.cfg")});
  EXPECT_EQ(run(args), kExitUsage);
  EXPECT_FALSE(fs::exists(dir_ / "run"));
}

TEST_F(Cli, TrainIsDeterministicAndLogsConfig) {
  synth();
  ASSERT_EQ(run(tiny_train("exgre", "a")), 0) << err_.str();
  const std::string log_a = out_.str();
  EXPECT_NE(err_.str().find("d_model = 8"), std::string::npos);
  ASSERT_EQ(run(tiny_train("exgre", "b")), 0);
  EXPECT_EQ(out_.str(), log_a);
  EXPECT_EQ(slurp(dir_ / "a" / "metrics.tsv"), slurp(dir_ / "b" / "metrics.tsv"));
  EXPECT_NE(slurp(dir_ / "a" / "config.resolved").find("seed = 5"), std::string::npos);
}

TEST_F(Cli, ConfigFileThenOverrides) {
  synth();
  spit(p("run.cfg"), "# tiny\nsteps = 4\nlog_every = 2\n");
  auto args = tiny_train("baseline", "run");
  args.insert(args.end(), {"--config", p("run.cfg")});
  ASSERT_EQ(run(args), 0) << err_.str();
  // --set steps=12 is applied after the file.
  EXPECT_NE(slurp(dir_ / "run" / "config.resolved").find("steps = 12"), std::string::npos);
  EXPECT_NE(slurp(dir_ / "run" / "config.resolved").find("log_every = 4"), std::string::npos);
}

TEST_F(Cli, TranslateBeamOneEqualsGreedy) {
  synth();
  ASSERT_EQ(run(tiny_train("refsr", "m")), 0) << err_.str();
  const std::string model = p("m/model.bin");
  ASSERT_EQ(run({"translate", "--model", model, "--input", p("data/test.src"), "--beam", "1"}), 0) << err_.str();
  const std::string beam1 = out_.str();
  ASSERT_EQ(run({"translate", "--model", model, "--input", p("data/test.src"), "--greedy", "--output", p("g.txt")}),
            0);
  EXPECT_EQ(slurp(dir_ / "g.txt"), beam1);
  EXPECT_EQ(std::count(beam1.begin(), beam1.end(), '\n'), 6);

  ASSERT_EQ(run({"translate", "--model", model, "--input", p("data/test.src"), "--beam", "3"}), 0);
  const std::string beam3 = out_.str();
  EXPECT_EQ(std::count(beam3.begin(), beam3.end(), '\n'), 6);
}

TEST_F(Cli, SimReportsBothSimilarities) {
  synth();
  ASSERT_EQ(run(tiny_train("exgre", "m")), 0) << err_.str();
  ASSERT_EQ(run({"sim", "--model", p("m/model.bin"), "--test", p("data/test")}), 0) << err_.str();
  EXPECT_NE(out_.str().find("sim_pr\t"), std::string::npos);
  EXPECT_NE(out_.str().find("sim_pe\t"), std::string::npos);

  ASSERT_EQ(run(tiny_train("baseline", "b")), 0);
  EXPECT_EQ(run({"sim", "--model", p("b/model.bin"), "--test", p("data/test")}), kExitUsage);
}

TEST_F(Cli, SweepLambdaTable) {
  synth();
  auto args = tiny_train("exgre", "sweep");
  args[0] = "sweep-lambda";
  args.insert(args.end(), {"--test", p("data/test"), "--lambdas", "0,0.6", "--jobs", "2", "--greedy"});
  ASSERT_EQ(run(args), 0) << err_.str();
  std::istringstream table(out_.str());
  std::string header, row0, row1, extra;
  std::getline(table, header);
  std::getline(table, row0);
  std::getline(table, row1);
  EXPECT_EQ(header, "lambda\tbleu\tsim");
  EXPECT_EQ(row0.substr(0, 2), "0\t");
  EXPECT_EQ(row1.substr(0, 4), "0.6\t");
  EXPECT_FALSE(std::getline(table, extra));
  EXPECT_TRUE(fs::exists(dir_ / "sweep" / "lambda_0" / "model.bin"));
  EXPECT_TRUE(fs::exists(dir_ / "sweep" / "lambda_0.6" / "model.bin"));
}

TEST_F(Cli, SweepFailureKeepsPartialResults) {
  synth();
  auto args = tiny_train("exgre", "sweep");
  args[0] = "sweep-lambda";
  args.insert(args.end(), {"--test", p("data/test"), "--lambdas", "0.2,-1,0.4", "--greedy"});
  EXPECT_NE(run(args), 0);
  EXPECT_NE(err_.str().find("partial results"), std::string::npos);
  const std::string saved = slurp(dir_ / "sweep" / "results.tsv");
  EXPECT_EQ(std::count(saved.begin(), saved.end(), '\n'), 2) << saved;
  EXPECT_EQ(saved.find("0.4\t"), std::string::npos);
}

TEST_F(Cli, SweepNeedsReorderingVariant) {
  synth();
  auto args = tiny_train("baseline", "sweep");
  args[0] = "sweep-lambda";
  args.insert(args.end(), {"--test", p("data/test")});
  EXPECT_EQ(run(args), kExitUsage);
}

TEST(RunConfigTest, ResolvedListsEveryKeySorted) {
  RunConfig rc;
  rc.apply("d_model=32");
  rc.set("lambda", "0.6");
  rc.set("steps", "10000");
  const std::string r = rc.resolved();
  for (const char* k : {"d_model = 32", "lambda = 0.6", "steps = 10000", "warmup = ", "window = 0.5", "seed = 1"})
    EXPECT_NE(r.find(k), std::string::npos) << k;
  EXPECT_LT(r.find("average_last"), r.find("batch_size"));
  EXPECT_THROW(rc.set("nope", "1"), ConfigError);
  EXPECT_THROW(rc.set("steps", "many"), ConfigError);
  EXPECT_THROW(rc.apply("steps"), ConfigError);
}

TEST(OrderStatsTest, HistogramBins) {
  std::vector<PositionSequence> rs{{{0, 1, 2}}, {{2, 1, 0}}, {{1, 0, 2}}, {{0}}};
  const auto st = order_stats(rs);
  EXPECT_EQ(st.sentences, 4u);
  EXPECT_DOUBLE_EQ(st.mean_tau, (0.0 + 1.0 + 1.0 / 3.0 + 0.0) / 4.0);
  EXPECT_EQ(st.histogram[0], 2u);
  EXPECT_EQ(st.histogram[3], 1u);
  EXPECT_EQ(st.histogram[9], 1u);
}

}  // namespace
}  // namespace rnmt
