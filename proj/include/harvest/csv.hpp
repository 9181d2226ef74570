#pragma once

#include <string>
#include <string_view>
#include <vector>

// UTF-8, comma-separated, double-quote escaping, LF line endings.
namespace harvest::csv {

struct Row {
    std::vector<std::string> fields;
    std::size_t line = 0;  // 1-based line where the row starts
};

std::string format_row(const std::vector<std::string>& fields);

// Throws ParseError (with line number) on an unterminated quote or stray quote.
std::vector<Row> parse(std::string_view content);

}  // namespace harvest::csv
