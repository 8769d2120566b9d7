#include "rnmt/corpus.h"

#include <cctype>
#include <fstream>
#include <sstream>

#include "rnmt/error.h"

namespace rnmt {

Tokens split_tokens(std::string_view line) {
  Tokens out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    std::size_t end = pos;
    while (end < line.size() && !std::isspace(static_cast<unsigned char>(line[end]))) ++end;
    if (end > pos) out.emplace_back(line.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

void write_lines(const std::filesystem::path& path, std::span<const std::string> lines) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

std::vector<Tokens> read_token_file(const std::filesystem::path& path) {
  std::vector<Tokens> out;
  for (const auto& l : read_lines(path)) out.push_back(split_tokens(l));
  return out;
}

void write_token_file(const std::filesystem::path& path, std::span<const Tokens> sentences) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& s : sentences) out << join_tokens(s) << '\n';
}

Corpus read_parallel(const std::filesystem::path& src, const std::filesystem::path& tgt) {
  auto s = read_token_file(src);
  auto t = read_token_file(tgt);
  if (s.size() != t.size())
    throw DataError("parallel corpus mismatch: " + std::to_string(s.size()) + " source lines vs " +
                    std::to_string(t.size()) + " target lines");
  Corpus corpus;
  corpus.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i].empty() || t[i].empty())
      throw DataError("empty sentence on line " + std::to_string(i + 1) + " of " +
                      (s[i].empty() ? src : tgt).string());
    corpus.push_back({std::move(s[i]), std::move(t[i]), std::nullopt, std::nullopt});
  }
  return corpus;
}

void write_parallel(const Corpus& corpus, const std::filesystem::path& src, const std::filesystem::path& tgt) {
  std::ofstream so(src), to(tgt);
  if (!so || !to) throw DataError("cannot write corpus to " + src.string());
  for (const auto& r : corpus) {
    so << join_tokens(r.src) << '\n';
    to << join_tokens(r.tgt) << '\n';
  }
}

void write_alignments(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : corpus) out << (r.alignment ? r.alignment->to_string() : std::string()) << '\n';
}

std::vector<PositionSequence> read_positions(const std::filesystem::path& path) {
  std::vector<PositionSequence> out;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    PositionSequence r;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) {
      try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        r.positions.push_back(v);
      } catch (const std::exception&) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad position '" + tok + "'");
      }
    }
    if (!is_permutation(r))
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": positions are not a permutation");
    out.push_back(std::move(r));
  }
  return out;
}

void write_positions(std::span<const PositionSequence> positions, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : positions) {
    for (std::size_t j = 0; j < r.size(); ++j) out << (j ? " " : "") << r[j];
    out << '\n';
  }
}

void attach_positions(Corpus& corpus, std::vector<PositionSequence> positions) {
  if (positions.size() != corpus.size())
    throw DataError("positions file has " + std::to_string(positions.size()) + " lines for " +
                    std::to_string(corpus.size()) + " sentence pairs");
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (positions[i].size() != corpus[i].src.size())
      throw DataError("positions line " + std::to_string(i + 1) + " has " + std::to_string(positions[i].size()) +
                      " entries for a " + std::to_string(corpus[i].src.size()) + "-token source");
    corpus[i].reordered_positions = std::move(positions[i]);
  }
}

bool has_positions(const Corpus& corpus) {
  for (const auto& r : corpus)
    if (!r.reordered_positions) return false;
  return true;
}

ReorderedCorpus reorder_corpus(Corpus corpus, std::span<const std::string> alignment_lines, bool target_first) {
  if (alignment_lines.size() != corpus.size())
    throw DataError("alignment file has " + std::to_string(alignment_lines.size()) + " lines for " +
                    std::to_string(corpus.size()) + " sentence pairs");
  ReorderedCorpus out;
  out.reordered_source.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto& rec = corpus[i];
    rec.alignment = parse_alignment_line(alignment_lines[i], rec.src.size(), rec.tgt.size(), i + 1, target_first);
    rec.reordered_positions = derive_reordered_positions(*rec.alignment);
    out.reordered_source.push_back(reorder_tokens(rec.src, *rec.reordered_positions));
  }
  out.corpus = std::move(corpus);
  return out;
}

}  // namespace rnmt
