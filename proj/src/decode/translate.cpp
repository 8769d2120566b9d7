#include "rnmt/translate.h"

#include <algorithm>
#include <map>

#include "rnmt/error.h"
#include "rnmt/search.h"
#include "rnmt/trainer.h"

namespace rnmt {

std::vector<Tokens> translate(const Model& model, const Vocab& src_vocab, const Vocab& tgt_vocab,
                              std::span<const Tokens> sources, const DecodeSettings& settings) {
  if (!settings.greedy && settings.beam == 0) throw ConfigError("beam size must be >= 1");
  const std::size_t max_len = model.config().max_len;
  std::vector<std::vector<std::int32_t>> ids;
  ids.reserve(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (sources[i].empty()) throw DataError("source line " + std::to_string(i + 1) + " is empty");
    if (sources[i].size() > max_len)
      throw DataError("source line " + std::to_string(i + 1) + " longer than max_len " + std::to_string(max_len));
    ids.push_back(src_vocab.encode(sources[i]));
  }
  std::vector<Tokens> out;
  out.reserve(sources.size());
  if (settings.greedy) {
    // Sentences sharing a length cap share a packed pass.
    std::map<std::size_t, std::vector<std::size_t>> by_limit;
    for (std::size_t i = 0; i < ids.size(); ++i) by_limit[decode_limit(ids[i].size(), max_len)].push_back(i);
    out.resize(ids.size());
    constexpr std::size_t kChunk = 64;
    for (const auto& [limit, members] : by_limit) {
      for (std::size_t start = 0; start < members.size(); start += kChunk) {
        const std::size_t end = std::min(members.size(), start + kChunk);
        std::vector<std::vector<std::int32_t>> chunk;
        for (std::size_t k = start; k < end; ++k) chunk.push_back(ids[members[k]]);
        auto hyps = greedy_decode_batch(model, chunk, limit);
        for (std::size_t k = start; k < end; ++k) out[members[k]] = tgt_vocab.decode(hyps[k - start].tokens);
      }
    }
    return out;
  }
  for (const auto& src : ids)
    out.push_back(tgt_vocab.decode(beam_search(model, src, settings.beam, decode_limit(src.size(), max_len)).tokens));
  return out;
}

}  // namespace rnmt
