#include "rnmt/synth.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>

#include "rnmt/error.h"

namespace rnmt {
namespace {

PermutationStep parse_step(std::string s) {
  s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }), s.end());
  std::string name = s, arg;
  if (auto open = s.find('('); open != std::string::npos) {
    if (s.back() != ')') throw ConfigError("bad permutation step '" + s + "'");
    name = s.substr(0, open);
    arg = s.substr(open + 1, s.size() - open - 2);
  }
  auto need_arg = [&](const char* what) -> std::size_t {
    if (arg.empty()) throw ConfigError(std::string(what) + " needs an argument, e.g. " + what + "(3)");
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(arg, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != arg.size()) throw ConfigError("bad argument '" + arg + "' for " + what);
    return v;
  };
  auto no_arg = [&] {
    if (!arg.empty()) throw ConfigError(name + " takes no argument");
  };
  if (name == "identity") return no_arg(), PermutationStep{PermutationKind::kIdentity, 0};
  if (name == "reverse") return no_arg(), PermutationStep{PermutationKind::kReverse, 0};
  if (name == "headFinal") return no_arg(), PermutationStep{PermutationKind::kHeadFinal, 0};
  if (name == "rotate") return {PermutationKind::kRotate, need_arg("rotate")};
  if (name == "blockSwap") {
    const std::size_t len = need_arg("blockSwap");
    if (len == 0) throw ConfigError("blockSwap block length must be >= 1");
    return {PermutationKind::kBlockSwap, len};
  }
  throw ConfigError("unknown permutation family '" + name + "'");
}

}  // namespace

PermutationFamily PermutationFamily::parse(const std::string& text) {
  PermutationFamily f;
  std::size_t start = 0;
  while (true) {
    const auto plus = text.find('+', start);
    f.steps.push_back(parse_step(text.substr(start, plus == std::string::npos ? std::string::npos : plus - start)));
    if (plus == std::string::npos) break;
    start = plus + 1;
  }
  return f;
}

std::string PermutationFamily::to_string() const {
  std::string out;
  for (const auto& s : steps) {
    if (!out.empty()) out += '+';
    switch (s.kind) {
      case PermutationKind::kIdentity: out += "identity"; break;
      case PermutationKind::kReverse: out += "reverse"; break;
      case PermutationKind::kHeadFinal: out += "headFinal"; break;
      case PermutationKind::kRotate: out += "rotate(" + std::to_string(s.param) + ")"; break;
      case PermutationKind::kBlockSwap: out += "blockSwap(" + std::to_string(s.param) + ")"; break;
    }
  }
  return out.empty() ? "identity" : out;
}

std::vector<std::size_t> apply_step(const PermutationStep& step, std::span<const std::int32_t> ids,
                                    std::size_t marked_below) {
  const std::size_t n = ids.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  switch (step.kind) {
    case PermutationKind::kIdentity:
      break;
    case PermutationKind::kReverse:
      std::reverse(order.begin(), order.end());
      break;
    case PermutationKind::kRotate:
      if (n > 0) std::rotate(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(step.param % n), order.end());
      break;
    case PermutationKind::kBlockSwap: {
      // Consecutive block pairs trade places; a trailing partial pair stays.
      const std::size_t b = step.param;
      for (std::size_t s = 0; s + 2 * b <= n; s += 2 * b)
        std::rotate(order.begin() + static_cast<std::ptrdiff_t>(s), order.begin() + static_cast<std::ptrdiff_t>(s + b),
                    order.begin() + static_cast<std::ptrdiff_t>(s + 2 * b));
      break;
    }
    case PermutationKind::kHeadFinal:
      std::stable_partition(order.begin(), order.end(), [&](std::size_t i) {
        return static_cast<std::size_t>(ids[i]) >= marked_below;
      });
      break;
  }
  return order;
}

std::vector<std::size_t> PermutationFamily::order(std::span<const std::int32_t> ids, std::size_t marked_below) const {
  std::vector<std::size_t> total(ids.size());
  std::iota(total.begin(), total.end(), 0);
  std::vector<std::int32_t> current(ids.begin(), ids.end());
  for (const auto& s : steps) {
    const auto o = apply_step(s, current, marked_below);
    std::vector<std::size_t> next(o.size());
    std::vector<std::int32_t> next_ids(o.size());
    for (std::size_t t = 0; t < o.size(); ++t) {
      next[t] = total[o[t]];
      next_ids[t] = current[o[t]];
    }
    total = std::move(next);
    current = std::move(next_ids);
  }
  return total;
}

void SynthTaskSpec::validate() const {
  if (vocab < 2) throw ConfigError("synth vocab must be >= 2");
  if (min_len == 0 || min_len > max_len) throw ConfigError("synth length range must satisfy 1 <= min <= max");
  if (!substitution.empty()) {
    if (substitution.size() != vocab) throw ConfigError("substitution map must cover the whole vocabulary");
    std::vector<bool> seen(vocab, false);
    for (auto v : substitution) {
      if (v < 0 || static_cast<std::size_t>(v) >= vocab || seen[static_cast<std::size_t>(v)])
        throw ConfigError("substitution map is not a bijection");
      seen[static_cast<std::size_t>(v)] = true;
    }
  }
}

std::string source_token(std::int32_t id) { return "s" + std::to_string(id); }
std::string target_token(std::int32_t id) { return "t" + std::to_string(id); }

Corpus generate(const SynthTaskSpec& spec, std::size_t count) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::vector<std::int32_t> sub = spec.substitution;
  if (sub.empty()) {
    sub.resize(spec.vocab);
    std::iota(sub.begin(), sub.end(), 0);
    std::shuffle(sub.begin(), sub.end(), rng);
  }
  std::uniform_int_distribution<std::size_t> len_dist(spec.min_len, spec.max_len);
  std::uniform_int_distribution<std::int32_t> tok_dist(0, static_cast<std::int32_t>(spec.vocab) - 1);
  Corpus corpus;
  corpus.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t n = len_dist(rng);
    std::vector<std::int32_t> ids(n);
    for (auto& id : ids) id = tok_dist(rng);
    const auto order = spec.family.order(ids, spec.marked_below());
    SentencePairRecord rec;
    std::vector<AlignmentLink> links;
    PositionSequence r;
    r.positions.resize(n);
    for (std::size_t j = 0; j < n; ++j) rec.src.push_back(source_token(ids[j]));
    for (std::size_t t = 0; t < n; ++t) {
      rec.tgt.push_back(target_token(sub[static_cast<std::size_t>(ids[order[t]])]));
      links.push_back({order[t], t});
      r.positions[order[t]] = static_cast<std::int32_t>(t);
    }
    rec.alignment = AlignmentSet(n, n, std::move(links));
    rec.reordered_positions = std::move(r);
    corpus.push_back(std::move(rec));
  }
  return corpus;
}

Splits split(const Corpus& corpus, double train, double valid, double test, std::uint64_t seed) {
  if (train < 0 || valid < 0 || test < 0) throw ConfigError("split ratios must be non-negative");
  if (std::abs(train + valid + test - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  const std::size_t n = corpus.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto b1 = std::min(n, static_cast<std::size_t>(std::llround(static_cast<double>(n) * train)));
  const auto b2 = std::max(b1, std::min(n, static_cast<std::size_t>(std::llround(static_cast<double>(n) * (train + valid)))));
  Splits s;
  for (std::size_t i = 0; i < n; ++i) {
    Corpus& dst = i < b1 ? s.train : (i < b2 ? s.valid : s.test);
    dst.push_back(corpus[idx[i]]);
  }
  auto check = [](const Corpus& c, double ratio, const char* name) {
    if (ratio > 0 && c.empty()) throw ConfigError(std::string("split '") + name + "' would be empty");
  };
  check(s.train, train, "train");
  check(s.valid, valid, "valid");
  check(s.test, test, "test");
  return s;
}

}  // namespace rnmt
