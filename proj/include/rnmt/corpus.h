#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rnmt/alignment.h"

namespace rnmt {

using Tokens = std::vector<std::string>;

struct SentencePairRecord {
  Tokens src;
  Tokens tgt;
  std::optional<AlignmentSet> alignment;
  std::optional<PositionSequence> reordered_positions;
};

using Corpus = std::vector<SentencePairRecord>;

Tokens split_tokens(std::string_view line);
std::string join_tokens(std::span<const std::string> tokens);

std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::filesystem::path& path, std::span<const std::string> lines);

std::vector<Tokens> read_token_file(const std::filesystem::path& path);
void write_token_file(const std::filesystem::path& path, std::span<const Tokens> sentences);

// Reads two line-aligned files. Empty lines and count mismatches are DataError.
Corpus read_parallel(const std::filesystem::path& src, const std::filesystem::path& tgt);
void write_parallel(const Corpus& corpus, const std::filesystem::path& src, const std::filesystem::path& tgt);

void write_alignments(const Corpus& corpus, const std::filesystem::path& path);

std::vector<PositionSequence> read_positions(const std::filesystem::path& path);
void write_positions(std::span<const PositionSequence> positions, const std::filesystem::path& path);

// Attaches one position sequence per record; lengths must match the source side.
void attach_positions(Corpus& corpus, std::vector<PositionSequence> positions);
bool has_positions(const Corpus& corpus);

struct ReorderedCorpus {
  Corpus corpus;                       // original order, alignment and R attached
  std::vector<Tokens> reordered_source;  // source sides in target order
};

// One alignment line per record; a count mismatch is a DataError.
ReorderedCorpus reorder_corpus(Corpus corpus, std::span<const std::string> alignment_lines, bool target_first = false);

}  // namespace rnmt
