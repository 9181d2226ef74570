#include "harvest/csv.hpp"

#include <fmt/format.h>

#include "harvest/error.hpp"

namespace harvest::csv {

namespace {

bool needs_quotes(std::string_view f) {
    return f.find_first_of(",\"\n\r") != std::string_view::npos;
}

}  // namespace

std::string format_row(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(',');
        const auto& f = fields[i];
        if (!needs_quotes(f)) {
            out += f;
            continue;
        }
        out.push_back('"');
        for (char c : f) {
            if (c == '"') out.push_back('"');
            out.push_back(c);
        }
        out.push_back('"');
    }
    out.push_back('\n');
    return out;
}

std::vector<Row> parse(std::string_view content) {
    std::vector<Row> rows;
    std::size_t i = 0;
    std::size_t line = 1;
    while (i < content.size()) {
        Row row;
        row.line = line;
        std::string field;
        bool done = false;
        while (!done) {
            if (i < content.size() && content[i] == '"') {
                std::size_t open_line = line;
                ++i;
                while (true) {
                    if (i >= content.size())
                        throw ParseError(fmt::format("line {}: unterminated quoted field", open_line), i,
                                         open_line);
                    char c = content[i];
                    if (c == '"') {
                        if (i + 1 < content.size() && content[i + 1] == '"') {
                            field.push_back('"');
                            i += 2;
                            continue;
                        }
                        ++i;
                        break;
                    }
                    if (c == '\n') ++line;
                    field.push_back(c);
                    ++i;
                }
                if (i < content.size() && content[i] != ',' && content[i] != '\n')
                    throw ParseError(fmt::format("line {}: unexpected character after quoted field", line), i,
                                     line);
            } else {
                while (i < content.size() && content[i] != ',' && content[i] != '\n') {
                    if (content[i] == '"')
                        throw ParseError(fmt::format("line {}: stray quote in unquoted field", line), i, line);
                    field.push_back(content[i]);
                    ++i;
                }
                if (!field.empty() && field.back() == '\r') field.pop_back();
            }
            row.fields.push_back(std::move(field));
            field.clear();
            if (i >= content.size()) {
                done = true;
            } else if (content[i] == ',') {
                ++i;
            } else {
                ++i;  // newline
                ++line;
                done = true;
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace harvest::csv
