#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rnmt/model.h"

namespace rnmt {

struct Hypothesis {
  std::vector<std::int32_t> tokens;  // excludes <s>; ends with </s> when finished
  double log_prob = 0.0;
  bool finished = false;

  // Length-normalised log-probability.
  double score() const { return tokens.empty() ? log_prob : log_prob / static_cast<double>(tokens.size()); }
};

// Argmax decoding, lowest id on ties. Stops at </s> or after max_len tokens.
Hypothesis greedy_decode(const Model& model, std::span<const std::int32_t> src, std::size_t max_len);

// Greedy decoding of many sentences in one packed pass per step.
std::vector<Hypothesis> greedy_decode_batch(const Model& model, std::span<const std::vector<std::int32_t>> sources,
                                            std::size_t max_len);

// Beam search over beam_size slots ranked by log-probability (ties: lower
// token id, then earlier beam). An end-of-sentence within the top ranks
// finishes that hypothesis and retires its slot. Finished hypotheses compete
// on length-normalised score; unfinished ones are force-finished at max_len.
// Search stops early once no live prefix can still overtake the best finished one.
Hypothesis beam_search(const Model& model, std::span<const std::int32_t> src, std::size_t beam_size,
                       std::size_t max_len);

// Log-probabilities of the next token after each prefix, one row per prefix.
// Every prefix starts with <s> and attends the same encoded source.
std::vector<std::vector<double>> next_token_log_probs(const Model& model, const Tensor& memory,
                                                      std::span<const std::vector<std::int32_t>> prefixes);

}  // namespace rnmt
