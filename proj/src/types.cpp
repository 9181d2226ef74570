#include "harvest/types.hpp"

#include <ctime>

#include <fmt/format.h>

#include "harvest/error.hpp"
#include "harvest/text.hpp"

namespace harvest {

std::string_view to_string(SourceKind kind) {
    return kind == SourceKind::pdf ? "pdf" : "html";
}

std::optional<SourceKind> source_kind_from_string(std::string_view s) {
    if (s == "pdf") return SourceKind::pdf;
    if (s == "html") return SourceKind::html;
    return std::nullopt;
}

std::string format_rfc3339(Timestamp t) {
    std::time_t secs = t.time_since_epoch().count();
    std::tm tm{};
    gmtime_r(&secs, &tm);
    return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}Z", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                       tm.tm_hour, tm.tm_min, tm.tm_sec);
}

Timestamp parse_rfc3339(std::string_view s) {
    std::tm tm{};
    char z = 0;
    std::string buf(s);
    int n = std::sscanf(buf.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &tm.tm_year, &tm.tm_mon, &tm.tm_mday, &tm.tm_hour,
                        &tm.tm_min, &tm.tm_sec, &z);
    if (n != 7 || z != 'Z' || buf.size() != 20) throw ParseError(fmt::format("bad RFC 3339 timestamp '{}'", s), 0);
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    return Timestamp(std::chrono::seconds(timegm(&tm)));
}

bool RawTable::is_rectangular() const {
    for (const auto& row : cells) {
        if (row.size() != cols()) return false;
    }
    return true;
}

RawTable RawTable::from_rows(std::vector<std::vector<std::string>> rows) {
    RawTable t;
    std::size_t width = 0;
    for (const auto& r : rows) width = std::max(width, r.size());
    for (auto& r : rows) {
        for (auto& c : r) c = text::normalize_space(c);
        t.padded_cells += width - r.size();
        r.resize(width);
    }
    t.cells = std::move(rows);
    return t;
}

}  // namespace harvest
