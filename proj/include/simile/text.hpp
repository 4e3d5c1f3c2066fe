#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace simile {

using Tokens = std::vector<std::string>;

// Splits on ASCII whitespace; runs of whitespace collapse.
Tokens split_words(std::string_view line);

// Joins tokens with single spaces.
std::string join_words(const Tokens& tokens);

// Collapses whitespace runs and trims both ends.
std::string normalize_whitespace(std::string_view line);

// Splits a UTF-8 string into code points. Malformed bytes are kept as
// single-byte units so the round trip stays lossless.
std::vector<std::string> utf8_code_points(std::string_view s);

std::string ascii_lower(std::string_view s);

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

// Parses the whole of `s` as a double; returns false on trailing junk.
bool parse_double(std::string_view s, double& out);

}  // namespace simile
