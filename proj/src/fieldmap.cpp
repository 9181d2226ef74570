#include "harvest/fieldmap.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "harvest/text.hpp"

namespace harvest::fieldmap {

namespace {

constexpr std::array<Field, 6> kAllFields = {Field::Drug, Field::Sensitivity, Field::Test,
                                             Field::Matrix, Field::MRL, Field::Tolerance};

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(fmt::format("cannot open {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Calls fn(line_number, fields) for each non-blank, non-comment line.
template <typename Fn>
void for_each_tsv_line(std::string_view content, Fn&& fn) {
    std::size_t line_no = 0;
    for (auto& raw : text::split(content, '\n')) {
        ++line_no;
        std::string line = raw;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty() || text::trim(line).front() == '#') continue;
        auto fields = text::split(line, '\t');
        std::vector<std::string> cleaned;
        for (auto& f : fields) {
            auto t = text::trim(f);
            if (!t.empty()) cleaned.push_back(std::move(t));
        }
        fn(line_no, cleaned);
    }
}

GuardedPattern make_pattern(const std::string& source, std::size_t line_no) {
    try {
        return GuardedPattern(source);
    } catch (const std::regex_error& e) {
        throw ValidationError(fmt::format("line {}: invalid pattern '{}': {}", line_no, source, e.what()),
                              line_no);
    }
}

struct FieldMatch {
    Field field;
    std::size_t pos;
    std::size_t len;
};

}  // namespace

std::string_view to_string(Field f) {
    switch (f) {
        case Field::Drug: return "Drug";
        case Field::Sensitivity: return "Sensitivity";
        case Field::Test: return "Test";
        case Field::Matrix: return "Matrix";
        case Field::MRL: return "MRL";
        case Field::Tolerance: return "Tolerance";
    }
    return "?";
}

std::optional<Field> field_from_string(std::string_view s) {
    for (auto f : kAllFields) {
        if (to_string(f) == s) return f;
    }
    return std::nullopt;
}

std::string_view to_string(KeywordCategory c) {
    switch (c) {
        case KeywordCategory::matrix: return "matrix";
        case KeywordCategory::field: return "field";
        case KeywordCategory::unit: return "unit";
    }
    return "?";
}

std::optional<KeywordCategory> category_from_string(std::string_view s) {
    if (s == "matrix") return KeywordCategory::matrix;
    if (s == "field") return KeywordCategory::field;
    if (s == "unit") return KeywordCategory::unit;
    return std::nullopt;
}

GuardedPattern::GuardedPattern(std::string source)
    : source_(std::move(source)),
      re_("(?:^|[^A-Za-z0-9_])(" + source_ + ")(?=[^A-Za-z0-9_]|$)",
          std::regex::ECMAScript | std::regex::icase) {}

std::vector<PatternMatch> GuardedPattern::find_all(std::string_view text) const {
    std::vector<PatternMatch> out;
    auto begin = std::cregex_iterator(text.data(), text.data() + text.size(), re_);
    for (auto it = begin; it != std::cregex_iterator(); ++it) {
        const auto& m = *it;
        if (m.length(1) == 0) continue;
        out.push_back({static_cast<std::size_t>(m.position(1)), static_cast<std::size_t>(m.length(1))});
    }
    return out;
}

std::vector<std::string> GuardedPattern::samples() const {
    std::vector<std::string> out;
    for (const auto& alt : text::split(source_, '|')) {
        std::string s;
        for (std::size_t i = 0; i < alt.size(); ++i) {
            char c = alt[i];
            if (c == '.' && i + 1 < alt.size() && alt[i + 1] == '?') {
                s.push_back(' ');
                ++i;
            } else if (c == '\\' && i + 1 < alt.size()) {
                char n = alt[++i];
                s.push_back(n == 's' ? ' ' : n);
            } else if (c == '?' || c == '(' || c == ')') {
                continue;
            } else {
                s.push_back(c);
            }
        }
        out.push_back(text::normalize_space(s));
    }
    return out;
}

const std::vector<GuardedPattern>& KeywordDictionary::of(KeywordCategory c) const {
    switch (c) {
        case KeywordCategory::matrix: return matrix_keywords;
        case KeywordCategory::field: return field_keywords;
        case KeywordCategory::unit: return unit_keywords;
    }
    return matrix_keywords;
}

KeywordDictionary KeywordDictionary::parse(std::string_view content) {
    KeywordDictionary kw;
    for_each_tsv_line(content, [&](std::size_t line_no, const std::vector<std::string>& fields) {
        auto cat = category_from_string(fields.empty() ? "" : fields[0]);
        if (!cat)
            throw ValidationError(
                fmt::format("line {}: unknown keyword category '{}'", line_no, fields.empty() ? "" : fields[0]),
                line_no);
        auto& target = *cat == KeywordCategory::matrix  ? kw.matrix_keywords
                       : *cat == KeywordCategory::field ? kw.field_keywords
                                                        : kw.unit_keywords;
        for (std::size_t i = 1; i < fields.size(); ++i) target.push_back(make_pattern(fields[i], line_no));
    });
    return kw;
}

KeywordDictionary KeywordDictionary::load(const std::filesystem::path& path) {
    return parse(read_file(path));
}

std::string KeywordDictionary::serialize() const {
    std::string out;
    for (auto cat : {KeywordCategory::matrix, KeywordCategory::field, KeywordCategory::unit}) {
        out += to_string(cat);
        for (const auto& p : of(cat)) {
            out += '\t';
            out += p.source();
        }
        out += '\n';
    }
    return out;
}

std::string KeywordHit::term() const {
    auto end = matched.size();
    while (end > 0 && !text::is_word_char(matched[end - 1])) --end;
    return matched.substr(0, end);
}

std::vector<KeywordHit> keyword_scan(std::string_view text, const KeywordDictionary& kw,
                                     KeywordCategory category) {
    std::vector<KeywordHit> hits;
    for (const auto& p : kw.of(category)) {
        for (const auto& m : p.find_all(text)) {
            hits.push_back({p.source(), std::string(text.substr(m.position, m.length)), m.position});
        }
    }
    std::stable_sort(hits.begin(), hits.end(), [](const KeywordHit& a, const KeywordHit& b) {
        if (a.position != b.position) return a.position < b.position;
        return a.matched.size() > b.matched.size();
    });
    return hits;
}

HeaderSynonymTable HeaderSynonymTable::parse(std::string_view content) {
    HeaderSynonymTable syn;
    std::set<Field> seen;
    for_each_tsv_line(content, [&](std::size_t line_no, const std::vector<std::string>& fields) {
        auto field = field_from_string(fields.empty() ? "" : fields[0]);
        if (!field)
            throw ValidationError(
                fmt::format("line {}: unknown canonical field '{}'", line_no, fields.empty() ? "" : fields[0]),
                line_no);
        if (!seen.insert(*field).second)
            throw ValidationError(fmt::format("line {}: canonical field '{}' listed twice", line_no, fields[0]),
                                  line_no);
        std::vector<GuardedPattern> variants;
        for (std::size_t i = 1; i < fields.size(); ++i) variants.push_back(make_pattern(fields[i], line_no));
        syn.entries.emplace_back(*field, std::move(variants));
    });
    if (seen.size() != kAllFields.size()) {
        for (auto f : kAllFields) {
            if (!seen.count(f))
                throw ValidationError(fmt::format("canonical field '{}' missing", to_string(f)));
        }
    }
    return syn;
}

HeaderSynonymTable HeaderSynonymTable::load(const std::filesystem::path& path) {
    return parse(read_file(path));
}

std::string HeaderSynonymTable::serialize() const {
    std::string out;
    for (const auto& [field, variants] : entries) {
        out += to_string(field);
        for (const auto& v : variants) {
            out += '\t';
            out += v.source();
        }
        out += '\n';
    }
    return out;
}

AmbiguousHeader::AmbiguousHeader(std::string cell, Field first, Field second)
    : Error(fmt::format("header '{}' matches both {} and {}", cell, to_string(first), to_string(second))),
      cell_(std::move(cell)),
      first_(first),
      second_(second) {}

std::optional<Field> map_header(std::string_view header_cell, const HeaderSynonymTable& syn) {
    std::string cell = text::strip_footnotes(header_cell);
    std::vector<FieldMatch> matches;
    for (const auto& [field, variants] : syn.entries) {
        for (const auto& v : variants) {
            for (const auto& m : v.find_all(cell)) matches.push_back({field, m.position, m.length});
        }
    }
    std::vector<Field> surviving;
    for (const auto& a : matches) {
        bool shadowed = std::any_of(matches.begin(), matches.end(), [&](const FieldMatch& b) {
            return b.field != a.field && b.len > a.len && b.pos <= a.pos && a.pos + a.len <= b.pos + b.len;
        });
        if (!shadowed && std::find(surviving.begin(), surviving.end(), a.field) == surviving.end())
            surviving.push_back(a.field);
    }
    if (surviving.empty()) return std::nullopt;
    if (surviving.size() > 1) throw AmbiguousHeader(cell, surviving[0], surviving[1]);
    return surviving.front();
}

std::optional<std::size_t> detect_header_row(const RawTable& t, const HeaderSynonymTable& syn,
                                             std::size_t max_scan) {
    for (std::size_t r = 0; r < t.rows() && r < max_scan; ++r) {
        const auto& row = t.cells[r];
        if (row.empty()) continue;
        std::size_t hits = 0;
        for (const auto& cell : row) {
            if (cell.empty()) continue;
            try {
                if (map_header(cell, syn)) ++hits;
            } catch (const AmbiguousHeader&) {
                ++hits;
            }
        }
        if (hits >= 2 && hits * 2 >= row.size()) return r;
    }
    return std::nullopt;
}

std::optional<std::size_t> TableSchema::column_of(Field f) const {
    for (const auto& [col, field] : columns) {
        if (field == f) return col;
    }
    return std::nullopt;
}

TableSchema map_table_schema(const RawTable& t, const HeaderSynonymTable& syn) {
    if (!t.header_row_index || *t.header_row_index >= t.rows())
        throw ValidationError("table has no header row");
    TableSchema schema;
    const auto& header = t.cells[*t.header_row_index];
    for (std::size_t c = 0; c < header.size(); ++c) {
        auto field = map_header(header[c], syn);
        if (!field) continue;
        if (auto prev = schema.column_of(*field))
            throw StructuralError(fmt::format("columns {} and {} both map to {}", *prev, c, to_string(*field)));
        schema.columns[c] = *field;
    }
    schema.relevant = schema.column_of(Field::Drug) && schema.column_of(Field::Sensitivity);
    return schema;
}

std::vector<LintIssue> lint(const HeaderSynonymTable& syn, const std::vector<std::string>& extra_headers) {
    std::vector<LintIssue> issues;
    std::map<std::string, Field> sources;
    std::vector<std::pair<std::string, Field>> probes;
    for (const auto& [field, variants] : syn.entries) {
        for (const auto& v : variants) {
            auto key = text::to_lower(v.source());
            auto [it, inserted] = sources.emplace(key, field);
            if (!inserted && it->second != field)
                issues.push_back({fmt::format("variant '{}' listed under both {} and {}", v.source(),
                                              to_string(it->second), to_string(field))});
            for (auto& s : v.samples()) probes.emplace_back(std::move(s), field);
        }
    }
    for (const auto& [probe, expected] : probes) {
        try {
            auto got = map_header(probe, syn);
            if (got && *got != expected)
                issues.push_back({fmt::format("sample '{}' of {} maps to {}", probe, to_string(expected),
                                              to_string(*got))});
        } catch (const AmbiguousHeader& e) {
            issues.push_back({e.what()});
        }
    }
    for (const auto& h : extra_headers) {
        try {
            map_header(h, syn);
        } catch (const AmbiguousHeader& e) {
            issues.push_back({e.what()});
        }
    }
    return issues;
}

}  // namespace harvest::fieldmap
