#include "rnmt/search.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rnmt/vocab.h"

namespace rnmt {
namespace {

std::vector<double> log_softmax_row(std::span<const double> row) {
  double mx = row[0];
  for (double v : row) mx = std::max(mx, v);
  double z = 0;
  for (double v : row) z += std::exp(v - mx);
  const double log_z = mx + std::log(z);
  std::vector<double> out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) out[i] = row[i] - log_z;
  return out;
}

std::int32_t argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return static_cast<std::int32_t>(best);
}

Tensor encode_one(const Model& model, std::span<const std::int32_t> src) {
  Tape tape(Tape::Mode::kInference);
  PackedSequences packed;
  packed.append(src);
  return model.encode(tape, packed).output;
}

}  // namespace

std::vector<std::vector<double>> next_token_log_probs(const Model& model, const Tensor& memory,
                                                      std::span<const std::vector<std::int32_t>> prefixes) {
  Tape tape(Tape::Mode::kInference);
  PackedSequences tgt;
  for (const auto& p : prefixes) tgt.append(p);
  std::vector<std::size_t> offsets(prefixes.size(), 0), lengths(prefixes.size(), memory.rows());
  Tensor logits = model.decode(tape, memory, offsets, lengths, tgt);
  const std::size_t v = logits.cols();
  std::vector<std::vector<double>> out;
  out.reserve(prefixes.size());
  for (std::size_t i = 0; i < prefixes.size(); ++i) {
    const std::size_t row = tgt.offsets[i] + tgt.lengths[i] - 1;
    out.push_back(log_softmax_row(logits.data().subspan(row * v, v)));
  }
  return out;
}

Hypothesis greedy_decode(const Model& model, std::span<const std::int32_t> src, std::size_t max_len) {
  if (max_len == 0) throw std::invalid_argument("greedy_decode: max_len must be >= 1");
  const Tensor memory = encode_one(model, src);
  Hypothesis hyp;
  std::vector<std::vector<std::int32_t>> prefix{{Vocab::kBos}};
  while (hyp.tokens.size() < max_len) {
    const auto lp = next_token_log_probs(model, memory, prefix).front();
    const std::int32_t next = argmax(lp);
    hyp.tokens.push_back(next);
    hyp.log_prob += lp[static_cast<std::size_t>(next)];
    if (next == Vocab::kEos) {
      hyp.finished = true;
      break;
    }
    prefix.front().push_back(next);
  }
  return hyp;
}

std::vector<Hypothesis> greedy_decode_batch(const Model& model, std::span<const std::vector<std::int32_t>> sources,
                                            std::size_t max_len) {
  std::vector<Hypothesis> hyps(sources.size());
  if (sources.empty()) return hyps;
  Tape tape(Tape::Mode::kInference);
  PackedSequences src;
  for (const auto& s : sources) src.append(s);
  const Tensor memory = model.encode(tape, src).output;

  std::vector<std::size_t> alive(sources.size());
  for (std::size_t i = 0; i < alive.size(); ++i) alive[i] = i;
  for (std::size_t step = 0; step < max_len && !alive.empty(); ++step) {
    PackedSequences tgt;
    std::vector<std::size_t> offsets, lengths;
    for (auto i : alive) {
      std::vector<std::int32_t> prefix{Vocab::kBos};
      prefix.insert(prefix.end(), hyps[i].tokens.begin(), hyps[i].tokens.end());
      tgt.append(prefix);
      offsets.push_back(src.offsets[i]);
      lengths.push_back(src.lengths[i]);
    }
    Tape step_tape(Tape::Mode::kInference);
    Tensor logits = model.decode(step_tape, memory, offsets, lengths, tgt);
    const std::size_t v = logits.cols();
    std::vector<std::size_t> still;
    for (std::size_t a = 0; a < alive.size(); ++a) {
      const std::size_t row = tgt.offsets[a] + tgt.lengths[a] - 1;
      const auto lp = log_softmax_row(logits.data().subspan(row * v, v));
      const std::int32_t next = argmax(lp);
      auto& h = hyps[alive[a]];
      h.tokens.push_back(next);
      h.log_prob += lp[static_cast<std::size_t>(next)];
      if (next == Vocab::kEos) h.finished = true;
      else still.push_back(alive[a]);
    }
    alive.swap(still);
  }
  return hyps;
}

Hypothesis beam_search(const Model& model, std::span<const std::int32_t> src, std::size_t beam_size,
                       std::size_t max_len) {
  if (beam_size == 0) throw std::invalid_argument("beam_search: beam size must be >= 1");
  if (max_len == 0) throw std::invalid_argument("beam_search: max_len must be >= 1");
  const Tensor memory = encode_one(model, src);

  struct Candidate {
    double log_prob;
    std::size_t beam;
    std::int32_t token;
  };
  std::vector<Hypothesis> alive(1);
  std::vector<Hypothesis> finished;
  std::size_t slots = beam_size;

  for (std::size_t step = 0; step < max_len && !alive.empty(); ++step) {
    std::vector<std::vector<std::int32_t>> prefixes;
    for (const auto& h : alive) {
      std::vector<std::int32_t> p{Vocab::kBos};
      p.insert(p.end(), h.tokens.begin(), h.tokens.end());
      prefixes.push_back(std::move(p));
    }
    const auto lps = next_token_log_probs(model, memory, prefixes);
    const std::size_t alive_width = slots;
    std::vector<Candidate> cands;
    cands.reserve(alive.size() * lps.front().size());
    for (std::size_t b = 0; b < alive.size(); ++b)
      for (std::size_t v = 0; v < lps[b].size(); ++v)
        cands.push_back({alive[b].log_prob + lps[b][v], b, static_cast<std::int32_t>(v)});
    std::sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
      if (x.log_prob != y.log_prob) return x.log_prob > y.log_prob;
      if (x.token != y.token) return x.token < y.token;
      return x.beam < y.beam;
    });

    // Only the top ranks survive; each end-of-sentence among them retires its
    // slot, so the beam narrows as hypotheses finish.
    std::vector<Hypothesis> next;
    for (std::size_t rank = 0; rank < cands.size() && rank < alive_width; ++rank) {
      const auto& c = cands[rank];
      Hypothesis h = alive[c.beam];
      h.tokens.push_back(c.token);
      h.log_prob = c.log_prob;
      if (c.token == Vocab::kEos) {
        h.finished = true;
        finished.push_back(std::move(h));
        --slots;
      } else {
        next.push_back(std::move(h));
      }
    }
    alive.swap(next);
    // Log-probabilities only fall, so an alive prefix scores at best
    // log_prob / max_len. Stop once none can beat the best finished one.
    if (!finished.empty()) {
      double best = finished.front().score();
      for (const auto& h : finished) best = std::max(best, h.score());
      const double cap = static_cast<double>(max_len);
      if (std::all_of(alive.begin(), alive.end(), [&](const Hypothesis& h) { return h.log_prob / cap <= best; })) {
        alive.clear();
        break;
      }
    }
  }
  // Anything still alive ran into max_len.
  for (auto& h : alive) finished.push_back(std::move(h));

  const Hypothesis* best = &finished.front();
  for (const auto& h : finished)
    if (h.score() > best->score()) best = &h;
  return *best;
}

}  // namespace rnmt
