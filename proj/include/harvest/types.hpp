#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

// Document and table types shared across the extraction stages.
namespace harvest {

enum class SourceKind { html, pdf };

std::string_view to_string(SourceKind kind);
std::optional<SourceKind> source_kind_from_string(std::string_view s);

struct SourceRef {
    std::string url;
    SourceKind kind = SourceKind::html;
    std::optional<int> year_hint;
    std::string title;

    bool operator==(const SourceRef&) const = default;
};

using Timestamp = std::chrono::sys_seconds;

// RFC 3339 UTC, e.g. "2020-06-01T12:00:00Z".
std::string format_rfc3339(Timestamp t);
// Throws ParseError on anything but the format produced above.
Timestamp parse_rfc3339(std::string_view s);

struct SourceDocument {
    SourceRef ref;
    std::string bytes;
    Timestamp fetched_at{};
    std::string content_hash;  // lowercase hex SHA-256 of bytes
};

// Rectangular grid of trimmed cell text. Short rows are padded at construction
// and the number of padded cells is kept in `padded_cells`.
struct RawTable {
    std::vector<std::vector<std::string>> cells;
    std::optional<std::size_t> header_row_index;
    std::string context_text;
    SourceRef source;
    std::optional<int> page_number;
    std::size_t padded_cells = 0;

    std::size_t rows() const { return cells.size(); }
    std::size_t cols() const { return cells.empty() ? 0 : cells.front().size(); }
    bool is_rectangular() const;

    // Builds a rectangular table from ragged rows, trimming every cell.
    static RawTable from_rows(std::vector<std::vector<std::string>> rows);

    bool operator==(const RawTable&) const = default;
};

}  // namespace harvest
