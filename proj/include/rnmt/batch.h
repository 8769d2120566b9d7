#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rnmt/alignment.h"

namespace rnmt {

// Variable-length sentences packed back to back without padding. Row i of a
// packed tensor belongs to the sentence whose [offset, offset+length) covers i.
struct PackedSequences {
  std::vector<std::int32_t> ids;
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> lengths;

  std::size_t sentences() const { return lengths.size(); }
  std::size_t rows() const { return ids.size(); }
  void append(std::span<const std::int32_t> sentence);
  // Sentence length J for every packed row.
  std::vector<std::size_t> row_lengths() const;
  // Position of every row inside its sentence.
  std::vector<std::size_t> row_positions() const;
};

struct Batch {
  PackedSequences src;
  PackedSequences tgt_in;   // <s> y_1 .. y_I
  std::vector<std::int32_t> tgt_out;  // y_1 .. y_I </s>, aligned with tgt_in rows
  std::vector<PositionSequence> positions;  // empty, or one per sentence
  // Loss mask over tgt_out rows; packing leaves no padding so all ones unless
  // a caller masks rows explicitly.
  std::vector<std::uint8_t> tgt_mask;

  std::size_t sentences() const { return src.sentences(); }
  bool has_positions() const { return !positions.empty(); }
};

// One tokenised sentence pair.
struct Example {
  std::vector<std::int32_t> src;
  std::vector<std::int32_t> tgt;
  std::optional<PositionSequence> positions;
};

// Packs examples; positions are attached only when every example has them.
Batch make_batch(std::span<const Example* const> examples);
Batch make_batch(std::span<const Example> examples);

}  // namespace rnmt
