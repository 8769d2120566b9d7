#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <random>

#include "rnmt/adam.h"
#include "rnmt/ops.h"
#include "support.h"

namespace rnmt {
namespace {

using testing::gradient_check;
using testing::param;
using testing::random_tensor;

TEST(Tensor, ShapeMatchesData) {
  Tensor t(Shape{2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
}

TEST(Tensor, GradientHasDataShape) {
  Tensor t(Shape{4, 2});
  EXPECT_FALSE(t.has_grad());
  EXPECT_EQ(t.ensure_grad().size(), t.size());
}

TEST(Tensor, BuffersAreCacheLineAligned) {
  for (std::size_t n : {1u, 3u, 7u, 64u, 1000u}) {
    Tensor t(Shape{n, 1});
    EXPECT_EQ(reinterpret_cast<std::uintptr_t>(t.data().data()) % 64, 0u);
    EXPECT_EQ(reinterpret_cast<std::uintptr_t>(t.ensure_grad().data()) % 64, 0u);
    EXPECT_EQ(reinterpret_cast<std::uintptr_t>(t.clone().data().data()) % 64, 0u);
  }
}

TEST(Matmul, IdentityAndHandValues) {
  Tape tape;
  Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  Tensor m = Tensor::matrix(2, 2, {1, 2, 3, 4});
  Tensor out = ops::matmul(tape, eye, m);
  EXPECT_EQ(std::vector<double>(out.data().begin(), out.data().end()), (std::vector<double>{1, 2, 3, 4}));
  Tensor dot = ops::matmul(tape, Tensor::matrix(1, 2, {1, 2}), Tensor::matrix(2, 1, {3, 4}));
  EXPECT_EQ(dot.item(), 11.0);
}

TEST(Matmul, ShapeMismatchReportsDimensions) {
  Tape tape;
  try {
    ops::matmul(tape, Tensor(Shape{2, 3}), Tensor(Shape{2, 3}));
    FAIL() << "expected a throw";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos) << e.what();
  }
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  Tensor a = param(random_tensor({3, 4}, rng));
  Tensor b = param(random_tensor({4, 2}, rng));
  auto f = [&](Tape& t) { return ops::sum(t, ops::matmul(t, a, b)); };
  EXPECT_LT(gradient_check(f, {a, b}), 1e-6);
}

TEST(Elementwise, ScalarValues) {
  Tape tape;
  EXPECT_EQ(ops::sigmoid(tape, Tensor::scalar(0)).item(), 0.5);
  EXPECT_EQ(ops::tanh(tape, Tensor::scalar(0)).item(), 0.0);
  EXPECT_NEAR(ops::sigmoid(tape, Tensor::scalar(1)).item(), 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(ops::sigmoid(tape, Tensor::scalar(1)).item(), 0.731059, 5e-7);
  EXPECT_EQ(ops::relu(tape, Tensor::scalar(-2)).item(), 0.0);
  EXPECT_EQ(ops::scale(tape, Tensor::scalar(3), -2).item(), -6.0);
}

TEST(Elementwise, SigmoidStaysFiniteAtExtremes) {
  Tape tape;
  Tensor x(Shape{2}, std::vector<double>{-1000, 1000});
  Tensor y = ops::sigmoid(tape, x);
  EXPECT_EQ(y[0], 0.0);
  EXPECT_EQ(y[1], 1.0);
}

TEST(Elementwise, ShapeMismatchRejected) {
  Tape tape;
  EXPECT_THROW(ops::add(tape, Tensor(Shape{2}), Tensor(Shape{3})), std::invalid_argument);
}

TEST(Elementwise, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  Tensor a = param(random_tensor({2, 3}, rng));
  Tensor b = param(random_tensor({2, 3}, rng));
  const std::vector<std::pair<const char*, std::function<Tensor(Tape&)>>> cases = {
      {"add", [&](Tape& t) { return ops::add(t, a, b); }},
      {"sub", [&](Tape& t) { return ops::sub(t, a, b); }},
      {"mul", [&](Tape& t) { return ops::mul(t, a, b); }},
      {"sigmoid", [&](Tape& t) { return ops::sigmoid(t, a); }},
      {"tanh", [&](Tape& t) { return ops::tanh(t, a); }},
      {"relu", [&](Tape& t) { return ops::relu(t, a); }},
      {"exp", [&](Tape& t) { return ops::exp(t, a); }},
      {"scale", [&](Tape& t) { return ops::affine(t, a, -1.7, 0.3); }},
  };
  Tensor w = random_tensor({2, 3}, rng);
  for (const auto& [name, op] : cases) {
    auto f = [&](Tape& t) { return ops::sum(t, ops::mul(t, op(t), w)); };
    EXPECT_LT(gradient_check(f, {a, b}), 1e-4) << name;
  }
}

TEST(Softmax, HandValues) {
  Tape tape;
  Tensor s = ops::softmax(tape, Tensor(Shape{3}, std::vector<double>{1, 2, 3}), 0);
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(s[i], std::exp(i + 1.0) / z, 1e-15);
  EXPECT_NEAR(s[0], 0.090031, 5e-7);
  EXPECT_NEAR(s[1], 0.244728, 5e-7);
  EXPECT_NEAR(s[2], 0.665241, 5e-7);
  Tensor u = ops::softmax(tape, Tensor(Shape{2}, 0.0), 0);
  EXPECT_EQ(u[0], 0.5);
  Tensor big = ops::softmax(tape, Tensor(Shape{2}, 1000.0), 0);
  EXPECT_EQ(big[0], 0.5);
  EXPECT_EQ(big[1], 0.5);
}

TEST(Softmax, SumsToOneAndShiftInvariant) {
  std::mt19937_64 rng(11);
  Tape tape;
  for (std::size_t axis = 0; axis < 2; ++axis) {
    Tensor x = random_tensor({4, 5}, rng);
    Tensor s = ops::softmax(tape, x, axis);
    Tensor shifted = ops::softmax(tape, ops::affine(tape, x, 1.0, 37.0), axis);
    const std::size_t outer = axis == 0 ? 5 : 4, inner = axis == 0 ? 4 : 5;
    for (std::size_t o = 0; o < outer; ++o) {
      double total = 0;
      for (std::size_t i = 0; i < inner; ++i) total += axis == 0 ? s.at(i, o) : s.at(o, i);
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(s[i], shifted[i], 1e-12);
  }
}

TEST(Softmax, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  Tensor x = param(random_tensor({3, 4}, rng));
  Tensor w = random_tensor({3, 4}, rng);
  for (std::size_t axis = 0; axis < 2; ++axis) {
    auto f = [&](Tape& t) { return ops::sum(t, ops::mul(t, ops::softmax(t, x, axis), w)); };
    EXPECT_LT(gradient_check(f, {x}), 1e-4);
  }
}

TEST(LayerNorm, HandValues) {
  Tape tape;
  Tensor gain(Shape{2}, 1.0), bias(Shape{2}, 0.0);
  Tensor y = ops::layer_norm(tape, Tensor(Shape{1, 2}, std::vector<double>{1, 3}), gain, bias, 0.0);
  EXPECT_DOUBLE_EQ(y[0], -1.0);
  EXPECT_DOUBLE_EQ(y[1], 1.0);
  Tensor g3(Shape{3}, 1.0), b3(Shape{3}, 0.0);
  Tensor c = ops::layer_norm(tape, Tensor(Shape{1, 3}, 4.2), g3, b3);
  for (double v : c.data()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(ops::layer_norm(tape, Tensor(Shape{1, 3}), gain, bias), std::invalid_argument);
}

TEST(LayerNorm, NormalisesEachRow) {
  std::mt19937_64 rng(13);
  Tape tape;
  Tensor x = random_tensor({5, 16}, rng);
  Tensor y = ops::layer_norm(tape, x, Tensor(Shape{16}, 1.0), Tensor(Shape{16}, 0.0), 1e-12);
  for (std::size_t r = 0; r < 5; ++r) {
    double m = 0, v = 0;
    for (std::size_t c = 0; c < 16; ++c) m += y.at(r, c) / 16;
    for (std::size_t c = 0; c < 16; ++c) v += (y.at(r, c) - m) * (y.at(r, c) - m) / 16;
    EXPECT_LT(std::abs(m), 1e-10);
    EXPECT_NEAR(v, 1.0, 1e-6);
  }
}

TEST(LayerNorm, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(14);
  Tensor x = param(random_tensor({2, 4}, rng));
  Tensor g = param(random_tensor({4}, rng));
  Tensor b = param(random_tensor({4}, rng));
  Tensor w = random_tensor({2, 4}, rng);
  auto f = [&](Tape& t) { return ops::sum(t, ops::mul(t, ops::layer_norm(t, x, g, b), w)); };
  EXPECT_LT(gradient_check(f, {x, g, b}), 1e-5);
}

TEST(Broadcasts, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(15);
  Tensor x = param(random_tensor({3, 4}, rng));
  Tensor row = param(random_tensor({4}, rng));
  Tensor col = param(random_tensor({3, 1}, rng));
  Tensor wt = param(random_tensor({4, 2}, rng));
  Tensor bias = param(random_tensor({2}, rng));
  Tensor table = param(random_tensor({5, 4}, rng));
  const std::vector<std::int32_t> ids{4, 0, 4};
  auto f = [&](Tape& t) {
    Tensor h = ops::mul_col(t, ops::add_row(t, x, row), col);
    h = ops::add(t, h, ops::gather_rows(t, table, ids));
    return ops::mean(t, ops::tanh(t, ops::linear(t, h, wt, bias)));
  };
  EXPECT_LT(gradient_check(f, {x, row, col, wt, bias, table}), 1e-4);
}

TEST(GatherRows, RejectsOutOfRangeIds) {
  Tape tape;
  const std::vector<std::int32_t> ids{0, 5};
  EXPECT_THROW(ops::gather_rows(tape, Tensor(Shape{5, 2}), ids), std::invalid_argument);
}

TEST(Dropout, InvertedScalingAndIdentityAtZero) {
  std::mt19937_64 rng(1);
  Tape tape;
  Tensor x(Shape{1000}, 1.0);
  Tensor same = ops::dropout(tape, x, 0.0, rng);
  EXPECT_TRUE(same.same_storage(x));
  Tensor y = ops::dropout(tape, x, 0.5, rng);
  std::size_t kept = 0;
  for (double v : y.data()) {
    EXPECT_TRUE(v == 0.0 || v == 2.0);
    kept += v != 0.0;
  }
  EXPECT_GT(kept, 400u);
  EXPECT_LT(kept, 600u);
}

TEST(Backward, QuadraticAndSigmoid) {
  Tensor w = param(Tensor(Shape{2}, std::vector<double>{1, 2}));
  {
    Tape tape;
    Tensor loss = ops::sum(tape, ops::mul(tape, w, w));
    tape.backward(loss);
  }
  EXPECT_EQ(w.grad()[0], 2.0);
  EXPECT_EQ(w.grad()[1], 4.0);

  Tensor z = param(Tensor::scalar(0));
  Tape tape;
  Tensor s = ops::sigmoid(tape, z);
  tape.backward(s);
  EXPECT_EQ(z.grad()[0], 0.25);
}

TEST(Backward, RejectsNonScalarLoss) {
  Tensor w = param(Tensor(Shape{2}, 1.0));
  Tape tape;
  Tensor y = ops::tanh(tape, w);
  EXPECT_THROW(tape.backward(y), std::invalid_argument);
}

TEST(Backward, ChainRuleOnTwoOpComposition) {
  // d/dx tanh(3x) = 3 (1 - tanh^2(3x)).
  Tensor x = param(Tensor::scalar(0.4));
  Tape tape;
  Tensor y = ops::tanh(tape, ops::scale(tape, x, 3.0));
  tape.backward(y);
  const double t = std::tanh(1.2);
  EXPECT_NEAR(x.grad()[0], 3.0 * (1 - t * t), 1e-15);
}

TEST(Backward, VisitsEveryRecordedOpOnceAndPopulatesGrads) {
  std::mt19937_64 rng(2);
  Tensor a = param(random_tensor({2, 2}, rng));
  Tensor b = param(random_tensor({2, 2}, rng));
  Tensor unused = param(random_tensor({2, 2}, rng));
  Tape tape;
  Tensor loss = ops::sum(tape, ops::mul(tape, ops::matmul(tape, a, b), a));
  EXPECT_EQ(tape.op_names(), (std::vector<std::string>{"matmul", "mul", "sum"}));
  tape.backward(loss);
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_TRUE(a.has_grad());
  EXPECT_TRUE(b.has_grad());
  EXPECT_FALSE(unused.has_grad());
  for (double g : a.grad()) EXPECT_TRUE(std::isfinite(g));
}

TEST(Backward, InferenceTapeRecordsNothing) {
  Tensor w = param(Tensor(Shape{2}, 1.0));
  Tape tape(Tape::Mode::kInference);
  ops::sum(tape, ops::mul(tape, w, w));
  EXPECT_EQ(tape.size(), 0u);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  ParameterSet ps;
  Tensor& w = ps.add("w", Tensor(Shape{3}, std::vector<double>{1, -2, 3}));
  w.ensure_grad();
  AdamState st;
  adam_step(ps, st, 0.1);
  EXPECT_EQ(w[0], 1.0);
  EXPECT_EQ(w[1], -2.0);
  EXPECT_EQ(w[2], 3.0);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterSet ps;
  Tensor& w = ps.add("w", Tensor::scalar(1.0));
  AdamState st;
  w.ensure_grad()[0] = 1.0;
  adam_step(ps, st, 0.1);
  // m_hat = 1, v_hat = 1: step = lr / (1 + eps).
  EXPECT_NEAR(w[0], 1.0 - 0.1 / (1.0 + 1e-9), 1e-15);
  const double after_one = w[0];
  adam_step(ps, st, 0.1);
  EXPECT_LT(w[0], after_one);
}

TEST(ParameterSet, DuplicateNamesRejected) {
  ParameterSet ps;
  ps.add("a", Tensor(Shape{2}));
  EXPECT_THROW(ps.add("a", Tensor(Shape{2})), std::invalid_argument);
  EXPECT_EQ(ps.count(), 2u);
}

}  // namespace
}  // namespace rnmt
