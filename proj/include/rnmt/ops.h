#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "rnmt/tensor.h"

// Differentiable operations. Every op validates shapes, computes its output
// eagerly and, when the tape records and an input needs a gradient, records
// its adjoint on the tape.
namespace rnmt::ops {

enum class Unary { kSigmoid, kTanh, kRelu, kExp };
enum class Binary { kAdd, kSub, kMul };

Tensor unary(Tape& tape, Unary kind, const Tensor& x);
Tensor binary(Tape& tape, Binary kind, const Tensor& a, const Tensor& b);

inline Tensor sigmoid(Tape& t, const Tensor& x) { return unary(t, Unary::kSigmoid, x); }
inline Tensor tanh(Tape& t, const Tensor& x) { return unary(t, Unary::kTanh, x); }
inline Tensor relu(Tape& t, const Tensor& x) { return unary(t, Unary::kRelu, x); }
inline Tensor exp(Tape& t, const Tensor& x) { return unary(t, Unary::kExp, x); }
inline Tensor add(Tape& t, const Tensor& a, const Tensor& b) { return binary(t, Binary::kAdd, a, b); }
inline Tensor sub(Tape& t, const Tensor& a, const Tensor& b) { return binary(t, Binary::kSub, a, b); }
inline Tensor mul(Tape& t, const Tensor& a, const Tensor& b) { return binary(t, Binary::kMul, a, b); }

// scale * x + shift
Tensor affine(Tape& tape, const Tensor& x, double scale, double shift = 0.0);
inline Tensor scale(Tape& t, const Tensor& x, double c) { return affine(t, x, c, 0.0); }

// [m x k] . [k x n]
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
// x W + bias, with x [n x in], W [in x out], bias [out] (may be undefined).
Tensor linear(Tape& tape, const Tensor& x, const Tensor& weight, const Tensor& bias);

// x [n x d] + row [d] broadcast over rows.
Tensor add_row(Tape& tape, const Tensor& x, const Tensor& row);
// x [n x d] scaled per row by column [n x 1].
Tensor mul_col(Tape& tape, const Tensor& x, const Tensor& col);

Tensor softmax(Tape& tape, const Tensor& x, std::size_t axis);
Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

Tensor sum(Tape& tape, const Tensor& x);
Tensor mean(Tape& tape, const Tensor& x);

// Rows of table [V x d] selected by ids -> [ids.size() x d].
Tensor gather_rows(Tape& tape, const Tensor& table, std::span<const std::int32_t> ids);

// Inverted dropout; identity when p == 0.
Tensor dropout(Tape& tape, const Tensor& x, double p, std::mt19937_64& rng);

}  // namespace rnmt::ops
