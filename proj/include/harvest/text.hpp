#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared by the extraction modules.
namespace harvest::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);

// Trims and collapses internal whitespace runs (including NBSP) to single spaces.
std::string normalize_space(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool iequals(std::string_view a, std::string_view b);
bool is_word_char(char c);

// Removes footnote markers: "^X" tokens, and a single letter glued to a unit
// ("ppbA" -> "ppb"). Result is space-normalized.
std::string strip_footnotes(std::string_view s);

// Shortest decimal form that round-trips ("8.4", "20", "2.5").
std::string format_number(double v);

// Strict decimal parse of the whole token; accepts "8", "8.4", ".5", "1,500".
std::optional<double> parse_decimal(std::string_view token);

// True if any whitespace-separated token (after footnote stripping) parses as a
// decimal > 0.
bool contains_positive_number(std::string_view s);

// Lowercase tokens split on non-word characters, pure numbers dropped.
std::vector<std::string> tokenize(std::string_view s);

// Offsets of case-insensitive occurrences of `needle` in `hay` that are not
// flanked by ASCII word characters.
std::vector<std::size_t> find_word(std::string_view hay, std::string_view needle);

// Windows-1252 bytes to UTF-8.
std::string cp1252_to_utf8(std::string_view s);
bool is_valid_utf8(std::string_view s);

// Replaces tabs/newlines with spaces so a value fits in one TSV field.
std::string tsv_safe(std::string_view s);

}  // namespace harvest::text
