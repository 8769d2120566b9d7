#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "rnmt/error.h"
#include "rnmt/loss.h"
#include "rnmt/ops.h"
#include "rnmt/schedule.h"
#include "rnmt/trainer.h"
#include "support.h"

#include <unistd.h>

namespace rnmt {
namespace {

namespace fs = std::filesystem;
using testing::param;
using testing::random_tensor;

ModelConfig toy_config(Variant v) {
  ModelConfig c;
  c.d_model = 8;
  c.d_ff = 16;
  c.heads = 2;
  c.layers = 1;
  c.src_vocab = 11;
  c.tgt_vocab = 11;
  c.dropout = 0.0;
  c.max_len = 12;
  c.variant = v;
  c.seed = 9;
  return c;
}

Batch toy_batch() {
  std::vector<Example> ex;
  ex.push_back({{4, 5, 6, 7}, {9, 4}, PositionSequence{{3, 0, 2, 1}}});
  ex.push_back({{10, 4, 8}, {6, 7, 8}, PositionSequence{{1, 0, 2}}});
  return make_batch(ex);
}

TEST(SmoothedNll, HandOracle) {
  Tape tape;
  Tensor logits = Tensor::matrix(1, 3, {1, 2, 3});
  const std::vector<std::int32_t> target{2};
  const double z = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
  const double expect = 0.9 * (z - 3.0) + 0.1 * ((z - 1.0) + (z - 2.0) + (z - 3.0)) / 3.0;
  EXPECT_NEAR(nll_label_smoothed(tape, logits, target, 0.1).item(), expect, 1e-14);
  EXPECT_NEAR(expect, 0.507606, 5e-7);
}

TEST(SmoothedNll, UniformConfidentAndInvalid) {
  Tape tape;
  const std::vector<std::int32_t> target{1};
  EXPECT_NEAR(nll_label_smoothed(tape, Tensor(Shape{1, 7}, 0.3), target, 0.0).item(), std::log(7.0), 1e-14);
  EXPECT_LT(nll_label_smoothed(tape, Tensor::matrix(1, 3, {-50, 50, -50}), target, 0.0).item(), 1e-40);
  const std::vector<std::int32_t> bad{3};
  EXPECT_THROW(nll_label_smoothed(tape, Tensor(Shape{1, 3}), bad, 0.1), std::invalid_argument);
}

TEST(SmoothedNll, MaskAndGradient) {
  std::mt19937_64 rng(1);
  Tensor logits = param(random_tensor({4, 5}, rng));
  const std::vector<std::int32_t> targets{0, 4, 2, 2};
  const std::vector<std::uint8_t> mask{1, 0, 1, 1};
  auto f = [&](Tape& t) { return nll_label_smoothed(t, logits, targets, 0.1, mask); };
  EXPECT_LT(testing::gradient_check(f, {logits}), 1e-5);
  Tape tape;
  nll_label_smoothed(tape, logits, targets, 0.1, mask);
  Tensor only = Tensor(Shape{3, 5});
  for (std::size_t r = 0, k = 0; r < 4; ++r) {
    if (!mask[r]) continue;
    for (std::size_t c = 0; c < 5; ++c) only[k * 5 + c] = logits.at(r, c);
    ++k;
  }
  const std::vector<std::int32_t> kept{0, 2, 2};
  EXPECT_NEAR(f(tape).item(), nll_label_smoothed(tape, only, kept, 0.1).item(), 1e-14);
}

TEST(ReorderingLoss, CosineCases) {
  std::mt19937_64 rng(2);
  Tape tape;
  Tensor re = random_tensor({6, 4}, rng);
  EXPECT_NEAR(reordering_loss(tape, re, re, {}, 2).item(), 3.0, 1e-14);
  EXPECT_NEAR(reordering_loss(tape, ops::scale(tape, re, 2.0), re, {}, 2).item(), 3.0, 1e-14);
  Tensor a = Tensor::matrix(2, 2, {1, 0, 0, 3});
  Tensor b = Tensor::matrix(2, 2, {0, 2, -1, 0});
  EXPECT_EQ(reordering_loss(tape, a, b, {}, 1).item(), 0.0);
  Tensor zero(Shape{2, 2}, 0.0);
  EXPECT_EQ(reordering_loss(tape, zero, b, {}, 1).item(), 0.0);
  Tensor neg = ops::scale(tape, re, -1.0);
  EXPECT_NEAR(reordering_loss(tape, neg, re, {}, 1).item(), -6.0, 1e-13);
}

TEST(ReorderingLoss, Gradient) {
  std::mt19937_64 rng(3);
  Tensor pr = param(random_tensor({5, 4}, rng));
  Tensor re = random_tensor({5, 4}, rng);
  const std::vector<std::uint8_t> mask{1, 1, 0, 1, 1};
  auto f = [&](Tape& t) { return reordering_loss(t, pr, re, mask, 2); };
  EXPECT_LT(testing::gradient_check(f, {pr}), 1e-5);
}

TEST(TotalLoss, ZeroLambdaIsPlainNllWithInertTerm) {
  Model m(toy_config(Variant::kExgre));
  Batch b = toy_batch();
  LossOptions lo;
  lo.lambda = 0.0;
  auto grads = [&](bool use_total) {
    m.params().zero_grad();
    Tape tape;
    LossTerms terms = total_loss(tape, m, b, lo);
    Tensor loss = use_total ? terms.total : terms.nll;
    EXPECT_TRUE(terms.reorder.defined());
    EXPECT_FALSE(terms.reorder.requires_grad());
    tape.backward(loss);
    std::vector<double> out;
    for (const auto& [name, t] : m.params().items())
      if (name.rfind("reorder", 0) == 0) out.insert(out.end(), t.grad().begin(), t.grad().end());
    return out;
  };
  EXPECT_EQ(grads(true), grads(false));
  Tape tape;
  LossTerms terms = total_loss(tape, m, b, lo);
  EXPECT_TRUE(terms.total.same_storage(terms.nll));
}

TEST(TotalLoss, RejectsLambdaWithoutReordering) {
  LossOptions lo;
  lo.lambda = 0.6;
  Model base(toy_config(Variant::kBaseline));
  Tape tape;
  EXPECT_THROW(total_loss(tape, base, toy_batch(), lo), ConfigError);
  Model ex(toy_config(Variant::kExgre));
  std::vector<Example> plain{{{4, 5}, {6}, std::nullopt}};
  EXPECT_THROW(total_loss(tape, ex, make_batch(plain), lo), ConfigError);
}

TEST(TotalLoss, CombinesTerms) {
  Model m(toy_config(Variant::kRefsr));
  LossOptions lo;
  lo.lambda = 0.6;
  Tape tape;
  LossTerms t = total_loss(tape, m, toy_batch(), lo);
  EXPECT_NEAR(t.total.item(), t.nll.item() - 0.6 * t.reorder.item(), 1e-14);
  EXPECT_EQ(t.tokens, 7u);
}

TEST(Schedule, WarmupShape) {
  ScheduleState s{1, 400, 64, 1.0};
  EXPECT_NEAR(lr_at(400, s), 0.125 * 0.05, 1e-15);
  EXPECT_NEAR(lr_at(400, s), 0.00625, 1e-15);
  EXPECT_NEAR(lr_at(200, s), 0.5 * lr_at(400, s), 1e-15);
  EXPECT_LT(lr_at(1600, s), lr_at(400, s));
  EXPECT_NEAR(lr_at(1600, s), 0.125 / 40.0, 1e-15);
  EXPECT_THROW(lr_at(0, s), std::invalid_argument);
}

std::vector<Example> copy_examples(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Example> ex;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::int32_t> s(3 + rng() % 4);
    for (auto& t : s) t = static_cast<std::int32_t>(4 + rng() % 7);
    ex.push_back({s, s, std::nullopt});
  }
  return ex;
}

TEST(Trainer, UntrainedLossNearUniform) {
  ModelConfig c = toy_config(Variant::kBaseline);
  Model m(c);
  Tape tape(Tape::Mode::kInference);
  auto ex = copy_examples(32, 1);
  Batch b = make_batch(ex);
  LossOptions lo;
  lo.smoothing = 0.0;
  const double nll = total_loss(tape, m, b, lo).nll.item();
  EXPECT_NEAR(nll, std::log(11.0), 0.35 * std::log(11.0));
}

TEST(Trainer, CopyTaskLossFallsOverFirstSteps) {
  ModelConfig c = toy_config(Variant::kBaseline);
  c.d_model = 16;
  c.d_ff = 32;
  Model m(c);
  TrainConfig tc;
  tc.warmup = 100;
  Trainer trainer(m, tc);
  auto ex = copy_examples(400, 2);
  std::vector<double> window_means;
  double acc = 0;
  for (std::size_t step = 0; step < 300; ++step) {
    std::vector<Example> slice(ex.begin() + static_cast<std::ptrdiff_t>((step * 16) % 384),
                               ex.begin() + static_cast<std::ptrdiff_t>((step * 16) % 384 + 16));
    acc += trainer.step(make_batch(slice)).loss;
    if ((step + 1) % 50 == 0) {
      window_means.push_back(acc / 50);
      acc = 0;
    }
  }
  // Steep early descent, then a plateau at the label-smoothing floor.
  for (std::size_t i = 1; i < 4; ++i) EXPECT_LT(window_means[i], window_means[i - 1]) << i;
  for (std::size_t i = 1; i < window_means.size(); ++i) EXPECT_LT(window_means[i], window_means.front() * 0.7) << i;
}

Corpus synthetic_corpus(std::size_t n, bool with_positions) {
  Corpus c;
  std::mt19937_64 rng(3);
  for (std::size_t i = 0; i < n; ++i) {
    SentencePairRecord r;
    const std::size_t len = 2 + rng() % 3;
    for (std::size_t j = 0; j < len; ++j) r.src.push_back("a" + std::to_string(rng() % 5));
    r.tgt = Tokens(r.src.rbegin(), r.src.rend());
    if (with_positions) {
      PositionSequence p;
      for (std::size_t j = 0; j < len; ++j) p.positions.push_back(static_cast<std::int32_t>(len - 1 - j));
      r.reordered_positions = p;
    }
    c.push_back(r);
  }
  return c;
}

class TrainRuns : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("rnmt_train_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST_F(TrainRuns, MissingPositionsRejectedBeforeTraining) {
  auto data = prepare_data(synthetic_corpus(20, false), synthetic_corpus(4, false));
  ModelConfig c = toy_config(Variant::kExgre);
  c.lambda = 0.6;
  TrainConfig tc;
  tc.steps = 5;
  EXPECT_THROW(train(data, c, tc, dir_), DataError);
  EXPECT_FALSE(fs::exists(dir_));
  c.variant = Variant::kBaseline;
  EXPECT_THROW(train(data, c, tc, dir_), ConfigError);
  EXPECT_FALSE(fs::exists(dir_));
}

TEST_F(TrainRuns, SameSeedSameMetricsAndFiles) {
  auto data = prepare_data(synthetic_corpus(40, true), synthetic_corpus(6, true));
  ModelConfig c = toy_config(Variant::kRefsr);
  c.lambda = 0.6;
  c.dropout = 0.1;
  TrainConfig tc;
  tc.steps = 12;
  tc.batch_size = 8;
  tc.log_every = 4;
  tc.save_every = 3;
  tc.average_last = 2;
  std::ostringstream log1, log2;
  auto r1 = train(data, c, tc, dir_ / "a", &log1);
  auto r2 = train(data, c, tc, dir_ / "b", &log2);
  EXPECT_EQ(log1.str(), log2.str());
  EXPECT_EQ(r1.metrics.size(), 3u);
  EXPECT_FALSE(std::isnan(r1.metrics.back().valid_sim));
  for (const char* f : {"metrics.tsv", "model.bin", "config.resolved", "checkpoint_3.bin", "checkpoint_12.bin"})
    EXPECT_TRUE(fs::exists(dir_ / "a" / f)) << f;
  std::ifstream m1(dir_ / "a" / "metrics.tsv"), m2(dir_ / "b" / "metrics.tsv");
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(m1), {}), std::string(std::istreambuf_iterator<char>(m2), {}));

  // model.bin is the mean of the last two snapshots.
  std::vector<fs::path> last{dir_ / "a" / "checkpoint_9.bin", dir_ / "a" / "checkpoint_12.bin"};
  Checkpoint avg = average_checkpoints(last);
  Checkpoint saved = load_checkpoint(dir_ / "a" / "model.bin");
  ASSERT_EQ(avg.tensors.size(), saved.tensors.size());
  for (std::size_t i = 0; i < avg.tensors.size(); ++i) EXPECT_EQ(avg.tensors[i].values, saved.tensors[i].values);
}

}  // namespace
}  // namespace rnmt
