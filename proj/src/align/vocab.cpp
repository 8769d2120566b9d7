#include "rnmt/vocab.h"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace rnmt {
namespace {
const std::vector<std::string> kSpecials = {"<pad>", "<s>", "</s>", "<unk>"};
}

Vocab::Vocab() : tokens_(kSpecials) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<std::int32_t>(i));
}

Vocab Vocab::build(std::span<const std::vector<std::string>> sentences) {
  std::set<std::string> distinct;
  for (const auto& s : sentences) distinct.insert(s.begin(), s.end());
  std::vector<std::string> tokens = kSpecials;
  for (const auto& t : distinct)
    if (std::find(kSpecials.begin(), kSpecials.end(), t) == kSpecials.end()) tokens.push_back(t);
  return from_tokens(std::move(tokens));
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < kSpecials.size() || !std::equal(kSpecials.begin(), kSpecials.end(), tokens.begin()))
    throw std::invalid_argument("vocabulary must start with the reserved tokens");
  Vocab v;
  v.tokens_ = std::move(tokens);
  v.index_.clear();
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], static_cast<std::int32_t>(i)).second)
      throw std::invalid_argument("duplicate vocabulary entry: " + v.tokens_[i]);
  }
  return v;
}

std::int32_t Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<std::int32_t> Vocab::encode(std::span<const std::string> tokens) const {
  std::vector<std::int32_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocab::decode(std::span<const std::int32_t> ids) const {
  std::vector<std::string> out;
  for (auto id : ids) {
    if (id == kEos) break;
    if (id == kBos || id == kPad) continue;
    out.push_back(token(id));
  }
  return out;
}

}  // namespace rnmt
