#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "harvest/error.hpp"
#include "harvest/types.hpp"

// Keyword ensembles and header synonyms as word-guarded, case-insensitive
// regular expressions. A pattern only matches when the characters on both
// sides are non-word characters or the string edge.
namespace harvest::fieldmap {

enum class Field { Drug, Sensitivity, Test, Matrix, MRL, Tolerance };

std::string_view to_string(Field f);
std::optional<Field> field_from_string(std::string_view s);

enum class KeywordCategory { matrix, field, unit };

std::string_view to_string(KeywordCategory c);
std::optional<KeywordCategory> category_from_string(std::string_view s);

struct PatternMatch {
    std::size_t position = 0;
    std::size_t length = 0;
};

class GuardedPattern {
public:
    // Throws std::regex_error on an invalid pattern.
    explicit GuardedPattern(std::string source);

    const std::string& source() const noexcept { return source_; }
    std::vector<PatternMatch> find_all(std::string_view text) const;
    bool matches_in(std::string_view text) const { return !find_all(text).empty(); }

    // Plain-text realization used by lint: ".?" becomes a space, other
    // optional markers are dropped, one string per top-level alternative.
    std::vector<std::string> samples() const;

private:
    std::string source_;
    std::regex re_;
};

struct KeywordHit {
    std::string keyword;  // pattern source
    std::string matched;  // text as it appeared
    std::size_t position = 0;

    // `matched` minus trailing non-word characters a wildcard picked up
    // ("honey." -> "honey").
    std::string term() const;

    bool operator==(const KeywordHit&) const = default;
};

struct KeywordDictionary {
    std::vector<GuardedPattern> matrix_keywords;
    std::vector<GuardedPattern> field_keywords;
    std::vector<GuardedPattern> unit_keywords;

    const std::vector<GuardedPattern>& of(KeywordCategory c) const;

    // Lines: category<TAB>pattern<TAB>pattern...; '#' starts a comment line.
    static KeywordDictionary parse(std::string_view content);
    static KeywordDictionary load(const std::filesystem::path& path);
    std::string serialize() const;
};

std::vector<KeywordHit> keyword_scan(std::string_view text, const KeywordDictionary& kw,
                                     KeywordCategory category);

struct HeaderSynonymTable {
    // Order is the file order; every canonical field appears exactly once.
    std::vector<std::pair<Field, std::vector<GuardedPattern>>> entries;

    // Lines: canonical<TAB>variant<TAB>variant...
    static HeaderSynonymTable parse(std::string_view content);
    static HeaderSynonymTable load(const std::filesystem::path& path);
    std::string serialize() const;
};

class AmbiguousHeader : public Error {
public:
    AmbiguousHeader(std::string cell, Field first, Field second);
    Field first() const noexcept { return first_; }
    Field second() const noexcept { return second_; }
    const std::string& cell() const noexcept { return cell_; }

private:
    std::string cell_;
    Field first_;
    Field second_;
};

// Canonical field for a header cell. A match lying inside a longer match of a
// different field is discarded; two surviving fields raise AmbiguousHeader.
std::optional<Field> map_header(std::string_view header_cell, const HeaderSynonymTable& syn);

// Header-row detection: the first row (within the first `max_scan` rows) where
// at least half of the cells match some synonym.
std::optional<std::size_t> detect_header_row(const RawTable& t, const HeaderSynonymTable& syn,
                                             std::size_t max_scan);

struct TableSchema {
    std::map<std::size_t, Field> columns;
    bool relevant = false;

    std::optional<std::size_t> column_of(Field f) const;
};

// Throws StructuralError when two columns map to the same field, and
// ValidationError when the table has no header row.
TableSchema map_table_schema(const RawTable& t, const HeaderSynonymTable& syn);

struct LintIssue {
    std::string message;
};

// Probes every variant sample (and any extra header strings) through
// map_header and reports cross-field overlaps.
std::vector<LintIssue> lint(const HeaderSynonymTable& syn, const std::vector<std::string>& extra_headers = {});

}  // namespace harvest::fieldmap
