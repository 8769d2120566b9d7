#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rnmt/adam.h"
#include "rnmt/tensor.h"

namespace rnmt {

// One sentence inside a packed batch: query rows [q_offset, q_offset+q_len)
// attend to key/value rows [k_offset, k_offset+k_len).
struct AttentionSpan {
  std::size_t q_offset = 0;
  std::size_t q_len = 0;
  std::size_t k_offset = 0;
  std::size_t k_len = 0;
};

struct AttentionOptions {
  std::size_t heads = 1;
  bool causal = false;      // query i sees keys 0..i of its span (q_len == k_len)
  double dropout = 0.0;     // on attention weights
  std::mt19937_64* rng = nullptr;
};

// Scaled dot-product attention over packed sentences, heads split along the
// feature dimension. q [Nq x d], k and v [Nk x d]; returns [Nq x d].
// When `weights` is given it receives the per-span, per-head attention
// matrices (pre-dropout), span-major then head-major, each q_len x k_len.
Tensor scaled_dot_attention(Tape& tape, const Tensor& q, const Tensor& k, const Tensor& v,
                            std::span<const AttentionSpan> spans, const AttentionOptions& opts,
                            std::vector<std::vector<double>>* weights = nullptr);

struct AttentionParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;

  static AttentionParams create(ParameterSet& params, const std::string& prefix, std::size_t d_model,
                                std::mt19937_64& rng);
};

// Projections, attention, output projection. For self-attention pass the same
// tensor as query and memory.
Tensor multi_head_attention(Tape& tape, const AttentionParams& p, const Tensor& query, const Tensor& memory,
                            std::span<const AttentionSpan> spans, const AttentionOptions& opts,
                            std::vector<std::vector<double>>* weights = nullptr);

// Scaled-uniform initialisation bound sqrt(6 / (fan_in + fan_out)).
Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

}  // namespace rnmt
