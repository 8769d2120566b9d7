#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace rnmt {

// Token <-> id map. Ids 0..3 are reserved for <pad>, <s>, </s>, <unk>.
class Vocab {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kBos = 1;
  static constexpr std::int32_t kEos = 2;
  static constexpr std::int32_t kUnk = 3;

  Vocab();
  // Specials followed by every distinct token, sorted lexicographically.
  static Vocab build(std::span<const std::vector<std::string>> sentences);
  // Inverse of tokens(): the list must start with the four specials.
  static Vocab from_tokens(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  std::int32_t id(const std::string& token) const;
  const std::string& token(std::int32_t id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<std::int32_t> encode(std::span<const std::string> tokens) const;
  // Stops at </s>; skips <s> and <pad>.
  std::vector<std::string> decode(std::span<const std::int32_t> ids) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

}  // namespace rnmt
