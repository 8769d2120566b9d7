#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rnmt {

struct AlignmentLink {
  std::size_t src = 0;
  std::size_t tgt = 0;
  auto operator<=>(const AlignmentLink&) const = default;
};

// Word alignment of one sentence pair. Links are kept sorted and unique.
class AlignmentSet {
 public:
  AlignmentSet(std::size_t src_len, std::size_t tgt_len) : src_len_(src_len), tgt_len_(tgt_len) {}
  AlignmentSet(std::size_t src_len, std::size_t tgt_len, std::vector<AlignmentLink> links);

  std::size_t src_len() const { return src_len_; }
  std::size_t tgt_len() const { return tgt_len_; }
  const std::vector<AlignmentLink>& links() const { return links_; }
  bool empty() const { return links_.empty(); }

  // Pharaoh "i-j" text, source index first.
  std::string to_string() const;

 private:
  std::size_t src_len_;
  std::size_t tgt_len_;
  std::vector<AlignmentLink> links_;
};

// Target-order position r_j for every source word j. Always a permutation of
// 0..J-1 when produced by derive_reordered_positions.
struct PositionSequence {
  std::vector<std::int32_t> positions;

  std::size_t size() const { return positions.size(); }
  std::int32_t operator[](std::size_t j) const { return positions[j]; }
  bool operator==(const PositionSequence&) const = default;
};

// Parses whitespace-separated "i-j" pairs. When target_first is set the file
// carries "tgt-src" pairs and they are swapped on read. line_no is only used
// in error messages (1-based; 0 omits it).
AlignmentSet parse_alignment_line(std::string_view text, std::size_t src_len, std::size_t tgt_len,
                                  std::size_t line_no = 0, bool target_first = false);

// Key each aligned source word by its minimum aligned target index, pin
// unaligned words to their own slot, and hand the remaining slots, in
// ascending order, to aligned words sorted by (key, source index).
PositionSequence derive_reordered_positions(const AlignmentSet& alignment);

bool is_permutation(const PositionSequence& r);
PositionSequence inverse(const PositionSequence& r);

// Scatter: out[r_j] = tokens[j]. r must be a permutation of the same length.
template <typename T>
std::vector<T> reorder_tokens(std::span<const T> tokens, const PositionSequence& r) {
  if (tokens.size() != r.size())
    throw std::invalid_argument("reorder_tokens: " + std::to_string(tokens.size()) + " tokens but " +
                                std::to_string(r.size()) + " positions");
  if (!is_permutation(r)) throw std::invalid_argument("reorder_tokens: positions are not a permutation");
  std::vector<T> out(tokens.size());
  for (std::size_t j = 0; j < tokens.size(); ++j) out[static_cast<std::size_t>(r[j])] = tokens[j];
  return out;
}

template <typename T>
std::vector<T> reorder_tokens(const std::vector<T>& tokens, const PositionSequence& r) {
  return reorder_tokens(std::span<const T>(tokens), r);
}

// Normalized Kendall-tau distance between r and the identity: inversions over
// J(J-1)/2, zero for J < 2.
double kendall_tau_distance(const PositionSequence& r);

}  // namespace rnmt
