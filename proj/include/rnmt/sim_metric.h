#pragma once

#include <span>

#include "rnmt/batch.h"
#include "rnmt/model.h"

namespace rnmt {

struct SimResult {
  double reordered = 0.0;   // mean cos(pr^N_j, re_j)
  double positional = 0.0;  // mean cos(pe_j, re_j), the unreordered reference
  std::size_t tokens = 0;
};

// Corpus-averaged cosine similarity between each source word's final-layer
// reordered embedding and its supervised embedding, over all test words.
// Needs an exgre/refsr model and positions on every example.
SimResult sim_metric(const Model& model, std::span<const Example> examples, std::size_t batch_size = 64,
                     const EncodeOptions& opts = {});

double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace rnmt
