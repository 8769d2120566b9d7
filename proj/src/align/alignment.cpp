#include "rnmt/alignment.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <numeric>
#include <sstream>

#include "rnmt/error.h"

namespace rnmt {
namespace {

std::string where(std::size_t line_no) {
  return line_no ? "alignment line " + std::to_string(line_no) + ": " : "alignment: ";
}

bool parse_index(std::string_view s, std::size_t& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

AlignmentSet::AlignmentSet(std::size_t src_len, std::size_t tgt_len, std::vector<AlignmentLink> links)
    : src_len_(src_len), tgt_len_(tgt_len), links_(std::move(links)) {
  for (const auto& l : links_)
    if (l.src >= src_len_ || l.tgt >= tgt_len_)
      throw std::invalid_argument("alignment link " + std::to_string(l.src) + "-" + std::to_string(l.tgt) +
                                  " outside " + std::to_string(src_len_) + "x" + std::to_string(tgt_len_));
  std::sort(links_.begin(), links_.end());
  links_.erase(std::unique(links_.begin(), links_.end()), links_.end());
}

std::string AlignmentSet::to_string() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < links_.size(); ++i) {
    if (i) os << ' ';
    os << links_[i].src << '-' << links_[i].tgt;
  }
  return os.str();
}

AlignmentSet parse_alignment_line(std::string_view text, std::size_t src_len, std::size_t tgt_len,
                                  std::size_t line_no, bool target_first) {
  std::vector<AlignmentLink> links;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos >= text.size()) break;
    std::size_t end = pos;
    while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end]))) ++end;
    const std::string_view item = text.substr(pos, end - pos);
    pos = end;
    const auto dash = item.find('-');
    std::size_t a = 0, b = 0;
    if (dash == std::string_view::npos || !parse_index(item.substr(0, dash), a) ||
        !parse_index(item.substr(dash + 1), b))
      throw DataError(where(line_no) + "malformed pair '" + std::string(item) + "'");
    if (target_first) std::swap(a, b);
    if (a >= src_len)
      throw DataError(where(line_no) + "source index " + std::to_string(a) + " >= source length " +
                      std::to_string(src_len));
    if (b >= tgt_len)
      throw DataError(where(line_no) + "target index " + std::to_string(b) + " >= target length " +
                      std::to_string(tgt_len));
    links.push_back({a, b});
  }
  return AlignmentSet(src_len, tgt_len, std::move(links));
}

PositionSequence derive_reordered_positions(const AlignmentSet& alignment) {
  const std::size_t J = alignment.src_len();
  constexpr std::size_t kUnaligned = static_cast<std::size_t>(-1);
  std::vector<std::size_t> key(J, kUnaligned);
  for (const auto& l : alignment.links()) key[l.src] = std::min(key[l.src], l.tgt);

  PositionSequence r;
  r.positions.assign(J, -1);
  std::vector<bool> taken(J, false);
  std::vector<std::size_t> aligned;
  for (std::size_t j = 0; j < J; ++j) {
    if (key[j] == kUnaligned) {
      r.positions[j] = static_cast<std::int32_t>(j);
      taken[j] = true;
    } else {
      aligned.push_back(j);
    }
  }
  std::stable_sort(aligned.begin(), aligned.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
  std::size_t slot = 0;
  for (std::size_t j : aligned) {
    while (taken[slot]) ++slot;
    r.positions[j] = static_cast<std::int32_t>(slot);
    taken[slot] = true;
  }
  return r;
}

bool is_permutation(const PositionSequence& r) {
  std::vector<bool> seen(r.size(), false);
  for (auto p : r.positions) {
    if (p < 0 || static_cast<std::size_t>(p) >= r.size() || seen[static_cast<std::size_t>(p)]) return false;
    seen[static_cast<std::size_t>(p)] = true;
  }
  return true;
}

PositionSequence inverse(const PositionSequence& r) {
  if (!is_permutation(r)) throw std::invalid_argument("inverse: positions are not a permutation");
  PositionSequence inv;
  inv.positions.resize(r.size());
  for (std::size_t j = 0; j < r.size(); ++j) inv.positions[static_cast<std::size_t>(r[j])] = static_cast<std::int32_t>(j);
  return inv;
}

double kendall_tau_distance(const PositionSequence& r) {
  const std::size_t n = r.size();
  if (n < 2) return 0.0;
  std::size_t inversions = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (r[i] > r[j]) ++inversions;
  return static_cast<double>(inversions) / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

}  // namespace rnmt
