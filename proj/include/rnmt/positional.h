#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rnmt/alignment.h"
#include "rnmt/tensor.h"

namespace rnmt {

// Sinusoidal position vector for a (possibly real-valued) position:
// even dims sin(pos / 10000^(2k/d)), odd dims cos(pos / 10000^(2k/d)).
std::vector<double> sinusoid(double pos, std::size_t d_model);

class PositionalTable {
 public:
  PositionalTable(std::size_t max_len, std::size_t d_model);

  std::size_t max_len() const { return max_len_; }
  std::size_t d_model() const { return d_model_; }
  std::span<const double> row(std::size_t pos) const;
  double at(std::size_t pos, std::size_t dim) const { return row(pos)[dim]; }
  // First `len` rows as a constant [len x d_model] tensor.
  Tensor rows(std::size_t len) const;

 private:
  std::size_t max_len_;
  std::size_t d_model_;
  std::vector<double> table_;
};

// Gaussian selection window around a predicted position b: integers s with
// |s - b| <= half_width, weighted exp(-(s - b)^2 / (2 sigma)).
struct ReorderWindow {
  double half_width = 0.5;
  double sigma = 0.25;
};

struct WindowTerm {
  std::size_t pos;
  double weight;
  double dweight_db;
};

// Window members clamped to [0, J-1]. If clamping empties the window the
// nearest valid integer is used with its true-distance weight.
std::vector<WindowTerm> window_terms(double b, std::size_t J, const ReorderWindow& window);

// pr = sum_s pe_s * w_s(b).
std::vector<double> gaussian_reorder_embedding(double b, const PositionalTable& table, std::size_t J,
                                               const ReorderWindow& window = {});

// Per-layer parameters of the position predictor: W [d x d], U [d x 1].
struct ReorderPredictor {
  Tensor weight;
  Tensor score;
  ReorderWindow window;
};

// b_j = J_j * sigmoid(U . tanh(W h_j)) for every row of packed hidden states
// hidden [N x d]; row_lengths[i] is the sentence length J of row i. Returns [N x 1].
Tensor predict_positions(Tape& tape, const Tensor& hidden, const ReorderPredictor& predictor,
                         std::span<const std::size_t> row_lengths);

// Row-wise gaussian_reorder_embedding over b [N x 1]; returns PR [N x d].
// The gradient flows through the weights only; window membership is piecewise
// constant in b.
Tensor gaussian_reorder(Tape& tape, const Tensor& b, const PositionalTable& table,
                        std::span<const std::size_t> row_lengths, const ReorderWindow& window);

// H + PR.
Tensor inject_reordering(Tape& tape, const Tensor& hidden, const Tensor& reordered);

// RE rows: the sinusoidal table evaluated at r_j, [J x d_model].
Tensor supervised_position_embeddings(const PositionSequence& r, std::size_t d_model);

}  // namespace rnmt
