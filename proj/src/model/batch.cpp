#include "rnmt/batch.h"

#include <stdexcept>

#include "rnmt/vocab.h"

namespace rnmt {

void PackedSequences::append(std::span<const std::int32_t> sentence) {
  if (sentence.empty()) throw std::invalid_argument("cannot pack an empty sentence");
  offsets.push_back(ids.size());
  lengths.push_back(sentence.size());
  ids.insert(ids.end(), sentence.begin(), sentence.end());
}

std::vector<std::size_t> PackedSequences::row_lengths() const {
  std::vector<std::size_t> out;
  out.reserve(ids.size());
  for (auto len : lengths) out.insert(out.end(), len, len);
  return out;
}

std::vector<std::size_t> PackedSequences::row_positions() const {
  std::vector<std::size_t> out;
  out.reserve(ids.size());
  for (auto len : lengths)
    for (std::size_t j = 0; j < len; ++j) out.push_back(j);
  return out;
}

Batch make_batch(std::span<const Example* const> examples) {
  if (examples.empty()) throw std::invalid_argument("cannot build an empty batch");
  Batch b;
  bool all_positions = true;
  for (const Example* ex : examples) {
    if (ex->tgt.empty()) throw std::invalid_argument("cannot pack an empty target sentence");
    b.src.append(ex->src);
    std::vector<std::int32_t> in;
    in.reserve(ex->tgt.size() + 1);
    in.push_back(Vocab::kBos);
    in.insert(in.end(), ex->tgt.begin(), ex->tgt.end());
    b.tgt_in.append(in);
    b.tgt_out.insert(b.tgt_out.end(), ex->tgt.begin(), ex->tgt.end());
    b.tgt_out.push_back(Vocab::kEos);
    all_positions = all_positions && ex->positions.has_value();
  }
  if (all_positions)
    for (const Example* ex : examples) b.positions.push_back(*ex->positions);
  return b;
}

Batch make_batch(std::span<const Example> examples) {
  std::vector<const Example*> ptrs;
  ptrs.reserve(examples.size());
  for (const auto& e : examples) ptrs.push_back(&e);
  return make_batch(ptrs);
}

}  // namespace rnmt
