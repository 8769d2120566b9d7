#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>

#include "rnmt/error.h"
#include "rnmt/synth.h"

namespace rnmt {
namespace {

SynthTaskSpec spec_for(const std::string& family, std::size_t min_len = 5, std::size_t max_len = 15) {
  SynthTaskSpec s;
  s.family = PermutationFamily::parse(family);
  s.min_len = min_len;
  s.max_len = max_len;
  s.seed = 11;
  return s;
}

std::vector<std::int32_t> source_ids(const Tokens& src) {
  std::vector<std::int32_t> ids;
  for (const auto& t : src) ids.push_back(std::stoi(t.substr(1)));
  return ids;
}

TEST(Families, ParseAndPrint) {
  EXPECT_EQ(PermutationFamily::parse("blockSwap(3)+headFinal").to_string(), "blockSwap(3)+headFinal");
  EXPECT_EQ(PermutationFamily::parse(" rotate( 2 ) ").to_string(), "rotate(2)");
  for (const char* bad : {"shuffle", "rotate", "blockSwap(0)", "reverse(1)", "blockSwap(x)"})
    EXPECT_THROW(PermutationFamily::parse(bad), ConfigError) << bad;
}

TEST(Families, BijectiveForEveryLength) {
  for (const char* f : {"identity", "reverse", "rotate(3)", "blockSwap(2)", "blockSwap(3)", "headFinal",
                        "blockSwap(3)+headFinal"}) {
    const auto fam = PermutationFamily::parse(f);
    for (std::size_t n = 1; n <= 12; ++n) {
      std::vector<std::int32_t> ids(n);
      for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<std::int32_t>((i * 37) % 64);
      auto o = fam.order(ids, 8);
      std::sort(o.begin(), o.end());
      std::vector<std::size_t> expect(n);
      std::iota(expect.begin(), expect.end(), 0);
      EXPECT_EQ(o, expect) << f << " n=" << n;
    }
  }
}

TEST(Families, HandOrders) {
  const std::vector<std::int32_t> ids{20, 21, 22, 23, 24, 25, 26};
  EXPECT_EQ(apply_step({PermutationKind::kBlockSwap, 3}, ids, 8), (std::vector<std::size_t>{3, 4, 5, 0, 1, 2, 6}));
  EXPECT_EQ(apply_step({PermutationKind::kBlockSwap, 2}, ids, 8), (std::vector<std::size_t>{2, 3, 0, 1, 4, 5, 6}));
  EXPECT_EQ(apply_step({PermutationKind::kRotate, 2}, ids, 8), (std::vector<std::size_t>{2, 3, 4, 5, 6, 0, 1}));
}

TEST(Generate, IdentityAndReverse) {
  for (const auto& rec : generate(spec_for("identity"), 50)) {
    std::vector<std::int32_t> expect(rec.src.size());
    std::iota(expect.begin(), expect.end(), 0);
    EXPECT_EQ(derive_reordered_positions(*rec.alignment).positions, expect);
  }
  for (const auto& rec : generate(spec_for("reverse", 4, 4), 10))
    EXPECT_EQ(derive_reordered_positions(*rec.alignment).positions, (std::vector<std::int32_t>{3, 2, 1, 0}));
}

TEST(Generate, HeadFinalMatchesStablePartitionOracle) {
  auto spec = spec_for("headFinal", 1, 8);
  const std::size_t marked = spec.marked_below();
  for (const auto& rec : generate(spec, 500)) {
    const auto ids = source_ids(rec.src);
    // Oracle: enumerate target slots, unmarked words in order, then marked.
    std::vector<std::int32_t> r(ids.size());
    std::int32_t next = 0;
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t j = 0; j < ids.size(); ++j)
        if ((static_cast<std::size_t>(ids[j]) < marked) == (pass == 1)) r[j] = next++;
    EXPECT_EQ(derive_reordered_positions(*rec.alignment).positions, r);
  }
}

TEST(Generate, RoundTripAndPermutationAlignments) {
  for (const char* f : {"blockSwap(3)+headFinal", "rotate(4)", "reverse"}) {
    auto spec = spec_for(f);
    Corpus c = generate(spec, 300);
    // Recover the substitution from the data itself and check it is a function.
    std::map<std::string, std::string> sub;
    for (const auto& rec : c) {
      ASSERT_EQ(rec.alignment->links().size(), rec.src.size());
      std::vector<int> src_seen(rec.src.size()), tgt_seen(rec.tgt.size());
      for (const auto& l : rec.alignment->links()) {
        ++src_seen[l.src];
        ++tgt_seen[l.tgt];
      }
      EXPECT_TRUE(std::all_of(src_seen.begin(), src_seen.end(), [](int v) { return v == 1; }));
      EXPECT_TRUE(std::all_of(tgt_seen.begin(), tgt_seen.end(), [](int v) { return v == 1; }));
      const auto r = derive_reordered_positions(*rec.alignment);
      EXPECT_EQ(r, *rec.reordered_positions);
      const auto reordered = reorder_tokens(rec.src, r);
      for (std::size_t t = 0; t < reordered.size(); ++t) {
        auto [it, inserted] = sub.emplace(reordered[t], rec.tgt[t]);
        EXPECT_EQ(it->second, rec.tgt[t]);
      }
      EXPECT_GE(rec.src.size(), 5u);
      EXPECT_LE(rec.src.size(), 15u);
    }
    std::map<std::string, std::string> back;
    for (const auto& [s, t] : sub) EXPECT_TRUE(back.emplace(t, s).second) << "substitution not injective";
  }
}

TEST(Generate, DeterministicAndExplicitSubstitution) {
  auto spec = spec_for("blockSwap(3)+headFinal");
  Corpus a = generate(spec, 40), b = generate(spec, 40);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].src, b[i].src);
    EXPECT_EQ(a[i].tgt, b[i].tgt);
  }
  spec.vocab = 4;
  spec.substitution = {1, 0, 3, 2};
  spec.family = PermutationFamily::parse("identity");
  for (const auto& rec : generate(spec, 20))
    for (std::size_t j = 0; j < rec.src.size(); ++j) {
      const int s = std::stoi(rec.src[j].substr(1));
      EXPECT_EQ(rec.tgt[j], target_token(spec.substitution[static_cast<std::size_t>(s)]));
    }
  spec.substitution = {0, 0, 1, 2};
  EXPECT_THROW(generate(spec, 1), ConfigError);
}

TEST(Split, RatiosAndDeterminism) {
  Corpus c = generate(spec_for("identity"), 101);
  auto all = split(c, 1.0, 0.0, 0.0, 3);
  EXPECT_EQ(all.train.size(), 101u);
  EXPECT_TRUE(all.valid.empty());
  auto s1 = split(c, 0.8, 0.1, 0.1, 3), s2 = split(c, 0.8, 0.1, 0.1, 3);
  EXPECT_EQ(s1.train.size() + s1.valid.size() + s1.test.size(), 101u);
  for (std::size_t i = 0; i < s1.test.size(); ++i) EXPECT_EQ(s1.test[i].src, s2.test[i].src);
  EXPECT_THROW(split(c, 0.5, 0.2, 0.2, 3), ConfigError);
  Corpus tiny(c.begin(), c.begin() + 3);
  EXPECT_THROW(split(tiny, 0.9, 0.05, 0.05, 3), ConfigError);
}

}  // namespace
}  // namespace rnmt
