#include "rnmt/positional.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rnmt/ops.h"

namespace rnmt {

std::vector<double> sinusoid(double pos, std::size_t d_model) {
  if (d_model == 0 || d_model % 2 != 0)
    throw std::invalid_argument("positional encoding needs an even d_model, got " + std::to_string(d_model));
  std::vector<double> v(d_model);
  for (std::size_t k = 0; 2 * k < d_model; ++k) {
    const double freq = std::pow(10000.0, static_cast<double>(2 * k) / static_cast<double>(d_model));
    v[2 * k] = std::sin(pos / freq);
    v[2 * k + 1] = std::cos(pos / freq);
  }
  return v;
}

PositionalTable::PositionalTable(std::size_t max_len, std::size_t d_model) : max_len_(max_len), d_model_(d_model) {
  if (max_len == 0) throw std::invalid_argument("positional table needs max_len >= 1");
  table_.reserve(max_len * d_model);
  for (std::size_t pos = 0; pos < max_len; ++pos) {
    auto row = sinusoid(static_cast<double>(pos), d_model);
    table_.insert(table_.end(), row.begin(), row.end());
  }
}

std::span<const double> PositionalTable::row(std::size_t pos) const {
  if (pos >= max_len_)
    throw std::out_of_range("position " + std::to_string(pos) + " beyond table length " + std::to_string(max_len_));
  return std::span<const double>(table_).subspan(pos * d_model_, d_model_);
}

Tensor PositionalTable::rows(std::size_t len) const {
  if (len > max_len_)
    throw std::out_of_range("sequence of length " + std::to_string(len) + " exceeds table length " +
                            std::to_string(max_len_));
  return Tensor(Shape{len, d_model_}, std::vector<double>(table_.begin(), table_.begin() + static_cast<std::ptrdiff_t>(len * d_model_)));
}

std::vector<WindowTerm> window_terms(double b, std::size_t J, const ReorderWindow& window) {
  if (J == 0) throw std::invalid_argument("window_terms: empty sentence");
  const double two_sigma = 2.0 * window.sigma;
  auto term = [&](std::size_t s) {
    const double diff = static_cast<double>(s) - b;
    const double w = std::exp(-diff * diff / two_sigma);
    return WindowTerm{s, w, w * diff / window.sigma};
  };
  const double last = static_cast<double>(J - 1);
  const double lo = std::max(0.0, std::ceil(b - window.half_width));
  const double hi = std::min(last, std::floor(b + window.half_width));
  std::vector<WindowTerm> terms;
  for (double s = lo; s <= hi; s += 1.0) terms.push_back(term(static_cast<std::size_t>(s)));
  if (terms.empty()) {
    const double nearest = std::clamp(std::round(b), 0.0, last);
    terms.push_back(term(static_cast<std::size_t>(nearest)));
  }
  return terms;
}

std::vector<double> gaussian_reorder_embedding(double b, const PositionalTable& table, std::size_t J,
                                               const ReorderWindow& window) {
  std::vector<double> pr(table.d_model(), 0.0);
  for (const auto& t : window_terms(b, J, window)) {
    auto pe = table.row(t.pos);
    for (std::size_t c = 0; c < pr.size(); ++c) pr[c] += t.weight * pe[c];
  }
  return pr;
}

Tensor predict_positions(Tape& tape, const Tensor& hidden, const ReorderPredictor& predictor,
                         std::span<const std::size_t> row_lengths) {
  if (hidden.rank() != 2 || predictor.weight.rank() != 2 || hidden.cols() != predictor.weight.dim(0) ||
      predictor.weight.dim(1) != predictor.score.size())
    throw std::invalid_argument("predict_positions: hidden " + shape_str(hidden.shape()) + " vs W " +
                                shape_str(predictor.weight.shape()) + " / U " + shape_str(predictor.score.shape()));
  if (row_lengths.size() != hidden.rows())
    throw std::invalid_argument("predict_positions: one sentence length per row required");
  Tensor lengths(Shape{hidden.rows(), 1});
  for (std::size_t i = 0; i < row_lengths.size(); ++i) lengths[i] = static_cast<double>(row_lengths[i]);
  Tensor u = predictor.score;
  if (u.rank() != 2) throw std::invalid_argument("predict_positions: U must be [d x 1]");
  Tensor inner = ops::tanh(tape, ops::matmul(tape, hidden, predictor.weight));
  Tensor gate = ops::sigmoid(tape, ops::matmul(tape, inner, u));
  return ops::mul(tape, gate, lengths);
}

Tensor gaussian_reorder(Tape& tape, const Tensor& b, const PositionalTable& table,
                        std::span<const std::size_t> row_lengths, const ReorderWindow& window) {
  const std::size_t n = b.size();
  if (row_lengths.size() != n) throw std::invalid_argument("gaussian_reorder: one sentence length per row required");
  const std::size_t d = table.d_model();
  Tensor out(Shape{n, d});
  auto ov = out.data();
  std::vector<std::vector<WindowTerm>> terms(n);
  for (std::size_t i = 0; i < n; ++i) {
    terms[i] = window_terms(b[i], row_lengths[i], window);
    for (const auto& t : terms[i]) {
      auto pe = table.row(t.pos);
      for (std::size_t c = 0; c < d; ++c) ov[i * d + c] += t.weight * pe[c];
    }
  }
  if (tape.wants({&b})) {
    out.set_requires_grad();
    tape.record("gaussian_reorder", [b, out, &table, d, terms = std::move(terms)]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto bg = b.ensure_grad();
      for (std::size_t i = 0; i < terms.size(); ++i) {
        double acc = 0;
        for (const auto& t : terms[i]) {
          auto pe = table.row(t.pos);
          double dot = 0;
          for (std::size_t c = 0; c < d; ++c) dot += g[i * d + c] * pe[c];
          acc += dot * t.dweight_db;
        }
        bg[i] += acc;
      }
    });
  }
  return out;
}

Tensor inject_reordering(Tape& tape, const Tensor& hidden, const Tensor& reordered) {
  return ops::add(tape, hidden, reordered);
}

Tensor supervised_position_embeddings(const PositionSequence& r, std::size_t d_model) {
  if (r.size() == 0) throw std::invalid_argument("supervised_position_embeddings: empty position sequence");
  std::vector<double> values;
  values.reserve(r.size() * d_model);
  for (std::size_t j = 0; j < r.size(); ++j) {
    auto row = sinusoid(static_cast<double>(r[j]), d_model);
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor(Shape{r.size(), d_model}, std::move(values));
}

}  // namespace rnmt
