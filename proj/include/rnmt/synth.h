#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rnmt/corpus.h"

namespace rnmt {

enum class PermutationKind { kIdentity, kReverse, kRotate, kBlockSwap, kHeadFinal };

struct PermutationStep {
  PermutationKind kind = PermutationKind::kIdentity;
  std::size_t param = 0;  // rotate amount or block length
};

// Steps applied left to right. "blockSwap(3)+headFinal" first swaps blocks,
// then moves marked tokens of the result to the end.
struct PermutationFamily {
  std::vector<PermutationStep> steps;

  static PermutationFamily parse(const std::string& text);
  std::string to_string() const;

  // order[t] = source index that lands at target position t. Token ids are
  // needed by headFinal only.
  std::vector<std::size_t> order(std::span<const std::int32_t> ids, std::size_t marked_below) const;
};

std::vector<std::size_t> apply_step(const PermutationStep& step, std::span<const std::int32_t> ids,
                                    std::size_t marked_below);

struct SynthTaskSpec {
  std::size_t vocab = 64;
  std::size_t min_len = 5;
  std::size_t max_len = 15;
  PermutationFamily family;
  std::vector<std::int32_t> substitution;  // empty: drawn from the seed
  std::uint64_t seed = 1;

  // Source ids below this are "marked" for headFinal.
  std::size_t marked_below() const { return vocab / 8 ? vocab / 8 : 1; }
  void validate() const;
};

std::string source_token(std::int32_t id);
std::string target_token(std::int32_t id);

// Records carry the exact alignment (links order[t]-t) and the positions it
// implies.
Corpus generate(const SynthTaskSpec& spec, std::size_t count);

struct Splits {
  Corpus train;
  Corpus valid;
  Corpus test;
};

// Ratios must sum to 1; a split with positive ratio that comes out empty is
// rejected.
Splits split(const Corpus& corpus, double train, double valid, double test, std::uint64_t seed);

}  // namespace rnmt
