#pragma once

#include <cstdint>
#include <span>

#include "rnmt/batch.h"
#include "rnmt/model.h"
#include "rnmt/tensor.h"

namespace rnmt {

// Mean over unmasked rows of (1 - eps) * -log p(target) + eps * mean_v(-log p(v)).
// An empty mask means every row counts.
Tensor nll_label_smoothed(Tape& tape, const Tensor& logits, std::span<const std::int32_t> targets, double smoothing,
                          std::span<const std::uint8_t> mask = {});

// Sum over unmasked rows of cos(pr_j, re_j), divided by `sentences`. Rows of
// zero norm contribute 0. `re` is a constant.
Tensor reordering_loss(Tape& tape, const Tensor& pr, const Tensor& re, std::span<const std::uint8_t> mask,
                       std::size_t sentences);

// Packed RE rows for every sentence of a batch, [rows x d_model].
Tensor batch_supervised_embeddings(const Batch& batch, std::size_t d_model);

struct LossTerms {
  Tensor total;         // nll - lambda * reorder (the minimised objective)
  Tensor nll;
  Tensor reorder;       // undefined for the baseline variant
  std::size_t tokens = 0;
};

struct LossOptions {
  double lambda = 0.0;
  double smoothing = 0.1;
  EncodeOptions encode;
};

// Joint objective. lambda > 0 with the baseline variant, or without positions
// in the batch, is rejected. With lambda == 0 the reordering term is not part
// of the graph.
LossTerms total_loss(Tape& tape, const Model& model, const Batch& batch, const LossOptions& opts);

}  // namespace rnmt
