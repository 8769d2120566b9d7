#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

// Flat `key = value` text: one pair per line, '#' starts a comment.
namespace rnmt::kv {

std::string format(std::size_t v);
// Shortest representation that parses back to the same double.
std::string format(double v);

std::size_t parse_size(const std::string& key, const std::string& value);
std::uint64_t parse_u64(const std::string& key, const std::string& value);
double parse_double(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);

// Ordered pairs, duplicate keys kept in order (later wins when applied).
std::vector<std::pair<std::string, std::string>> parse_text(const std::string& text);
std::vector<std::pair<std::string, std::string>> parse_file(const std::filesystem::path& path);

// "key=value" command-line override.
std::pair<std::string, std::string> parse_assignment(const std::string& s);

}  // namespace rnmt::kv
