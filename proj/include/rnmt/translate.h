#pragma once

#include <span>
#include <vector>

#include "rnmt/corpus.h"
#include "rnmt/model.h"
#include "rnmt/vocab.h"

namespace rnmt {

struct DecodeSettings {
  std::size_t beam = 5;
  bool greedy = false;  // batched argmax decoding instead of beam search
};

// Tokenised sources in, detokenised hypotheses out. Sources longer than the
// model's max_len are a DataError.
std::vector<Tokens> translate(const Model& model, const Vocab& src_vocab, const Vocab& tgt_vocab,
                              std::span<const Tokens> sources, const DecodeSettings& settings = {});

}  // namespace rnmt
