#pragma once

#include <array>
#include <cstddef>
#include <span>

#include "rnmt/corpus.h"

namespace rnmt {

struct BleuStats {
  std::array<std::size_t, 4> matches{};   // clipped n-gram matches, n = 1..4
  std::array<std::size_t, 4> totals{};    // hypothesis n-gram counts
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;
  double brevity_penalty = 1.0;
  double bleu = 0.0;  // 0..100
};

// Corpus-level BLEU over whitespace tokens, single reference, no smoothing:
// any zero precision yields 0.
BleuStats corpus_bleu_stats(std::span<const Tokens> hypotheses, std::span<const Tokens> references,
                            std::size_t max_order = 4);
double corpus_bleu(std::span<const Tokens> hypotheses, std::span<const Tokens> references, std::size_t max_order = 4);

}  // namespace rnmt
