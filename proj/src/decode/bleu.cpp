#include "rnmt/bleu.h"

#include <cmath>
#include <map>
#include <stdexcept>

namespace rnmt {
namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const Tokens& s, std::size_t n) {
  NgramCounts counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i)
    ++counts[std::vector<std::string>(s.begin() + static_cast<std::ptrdiff_t>(i),
                                      s.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

}  // namespace

BleuStats corpus_bleu_stats(std::span<const Tokens> hypotheses, std::span<const Tokens> references,
                            std::size_t max_order) {
  if (hypotheses.size() != references.size())
    throw std::invalid_argument("BLEU: " + std::to_string(hypotheses.size()) + " hypotheses vs " +
                                std::to_string(references.size()) + " references");
  if (hypotheses.empty()) throw std::invalid_argument("BLEU: empty corpus");
  if (max_order == 0 || max_order > 4) throw std::invalid_argument("BLEU: max order must be 1..4");
  BleuStats st;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    st.hyp_length += hypotheses[i].size();
    st.ref_length += references[i].size();
    for (std::size_t n = 1; n <= max_order; ++n) {
      const auto h = count_ngrams(hypotheses[i], n);
      const auto r = count_ngrams(references[i], n);
      for (const auto& [gram, c] : h) {
        st.totals[n - 1] += c;
        if (auto it = r.find(gram); it != r.end()) st.matches[n - 1] += std::min(c, it->second);
      }
    }
  }
  double log_sum = 0;
  for (std::size_t n = 0; n < max_order; ++n) {
    if (st.matches[n] == 0 || st.totals[n] == 0) {
      st.bleu = 0.0;
      st.brevity_penalty = st.hyp_length < st.ref_length && st.hyp_length > 0
                               ? std::exp(1.0 - static_cast<double>(st.ref_length) / static_cast<double>(st.hyp_length))
                               : (st.hyp_length == 0 ? 0.0 : 1.0);
      return st;
    }
    log_sum += std::log(static_cast<double>(st.matches[n]) / static_cast<double>(st.totals[n]));
  }
  st.brevity_penalty = st.hyp_length < st.ref_length
                           ? std::exp(1.0 - static_cast<double>(st.ref_length) / static_cast<double>(st.hyp_length))
                           : 1.0;
  // Exact 100 when every clipped precision is 1 and there is no brevity penalty.
  const double geo = log_sum == 0.0 ? 1.0 : std::exp(log_sum / static_cast<double>(max_order));
  st.bleu = 100.0 * st.brevity_penalty * geo;
  return st;
}

double corpus_bleu(std::span<const Tokens> hypotheses, std::span<const Tokens> references, std::size_t max_order) {
  return corpus_bleu_stats(hypotheses, references, max_order).bleu;
}

}  // namespace rnmt
