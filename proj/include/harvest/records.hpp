#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "harvest/canon.hpp"
#include "harvest/error.hpp"
#include "harvest/fieldmap.hpp"
#include "harvest/types.hpp"

namespace harvest::records {

enum class Unit { ppb, ppm };

std::string_view to_string(Unit u);

// ppm -> ppb factor; µg/kg is read as ppb.
inline constexpr double kPpbPerPpm = 1000.0;

struct SensitivityValue {
    double low = 0;
    double high = 0;
    Unit unit = Unit::ppb;
    std::string raw;

    double low_ppb() const { return unit == Unit::ppm ? low * kPpbPerPpm : low; }
    double high_ppb() const { return unit == Unit::ppm ? high * kPpbPerPpm : high; }
    bool is_scalar() const { return low == high; }

    // Value equality; the raw text does not participate.
    bool operator==(const SensitivityValue& o) const {
        return low == o.low && high == o.high && unit == o.unit;
    }
};

// Equal after converting both sides to ppb ("8 ppb" == "8.0 ppb").
bool same_value(const SensitivityValue& a, const SensitivityValue& b);

class ValueError : public ParseError {
public:
    enum class Reason { no_number, malformed, unit_unresolved, range_order, non_positive };

    ValueError(Reason reason, std::string raw, std::string what)
        : ParseError(std::move(what), 0), reason_(reason), raw_(std::move(raw)) {}

    Reason reason() const noexcept { return reason_; }
    const std::string& raw() const noexcept { return raw_; }

private:
    Reason reason_;
    std::string raw_;
};

// Accepts "v", "v unit", "a to b", "a to b unit" (also "a - b"). Footnote
// markers are stripped first. The unit comes from the cell, else the column
// hint, else ValueError(unit_unresolved).
SensitivityValue parse_sensitivity(std::string_view cell, std::optional<Unit> column_unit_hint);

std::string format_sensitivity(const SensitivityValue& v);

// Unit implied by a column heading ("(ppb)", "(µg/kg)", "ppm").
std::optional<Unit> unit_hint(std::string_view header_cell);

// Tolerance / MRL reference. "None" cells are an explicit no-reference marker;
// "100 / 200" pairs (EU / CODEX) keep both figures.
struct ReferenceLimit {
    bool none_stated = false;
    double value = 0;
    std::optional<double> secondary;
    Unit unit = Unit::ppb;
    std::string raw;

    double value_ppb() const { return unit == Unit::ppm ? value * kPpbPerPpm : value; }

    bool operator==(const ReferenceLimit& o) const {
        return none_stated == o.none_stated && value == o.value && secondary == o.secondary &&
               unit == o.unit;
    }
};

ReferenceLimit parse_reference(std::string_view cell, std::optional<Unit> column_unit_hint);
std::string format_reference(const ReferenceLimit& r);

struct IdentityKey {
    std::string drug;
    std::string test;
    std::string matrix;
    std::string type;  // empty when no method type

    auto operator<=>(const IdentityKey&) const = default;
    bool operator==(const IdentityKey&) const = default;
};

struct AssayRecord {
    std::string drug;
    SensitivityValue sensitivity;
    std::string matrix;
    std::string test;
    std::optional<canon::MethodType> type;
    std::optional<ReferenceLimit> tolerance;
    std::optional<ReferenceLimit> mrl;
    std::optional<std::string> species;
    std::optional<std::string> manufacturer;
    std::string source_url;

    IdentityKey key() const;
    bool operator==(const AssayRecord&) const = default;
};

// Canonical record CSV columns, in order.
inline const std::vector<std::string> kCsvHeader = {"Drug", "Sensitivity",  "Matrix", "Test", "Type",
                                                    "Tolerance", "MRL", "Species", "Manufacturer", "URL"};

std::vector<std::string> to_csv_fields(const AssayRecord& r);
// Throws ValidationError naming `line` on any invalid field.
AssayRecord from_csv_fields(const std::vector<std::string>& fields, std::size_t line);

std::string write_csv(const std::vector<AssayRecord>& records);
std::vector<AssayRecord> read_csv(std::string_view content);

struct ToleranceRow {
    std::string drug;
    std::string species;  // empty = any
    std::string matrix;   // empty = any
    ReferenceLimit value;
    std::string citation;
};

struct ToleranceTable {
    std::vector<ToleranceRow> rows;

    // TSV: drug, species, matrix, value, unit, citation. At most one row per
    // (drug, species, matrix).
    static ToleranceTable parse(std::string_view content);
    static ToleranceTable load(const std::filesystem::path& path);

    // Most specific row for the record; nullopt when none or when the best
    // candidates tie.
    const ToleranceRow* lookup(const std::string& drug, const std::string& species,
                               const std::string& matrix) const;
};

struct ToleranceConflict {
    IdentityKey key;
    ReferenceLimit table_value;    // what the source document said
    ReferenceLimit curated_value;  // what was stored
    std::string citation;
};

struct Annotation {
    AssayRecord record;
    std::optional<ToleranceConflict> conflict;
};

Annotation annotate_tolerance(const AssayRecord& r, const ToleranceTable& tol);

// True iff the sensitivity upper bound is at or below the tolerance (both in
// ppb). Absent when there is no numeric tolerance.
std::optional<bool> below_tolerance(const AssayRecord& r);

struct DocumentContext {
    std::string test;
    std::string matrix;
    std::optional<canon::MethodType> type;
    std::optional<std::string> species;
    bool species_defaulted = false;
    std::optional<std::string> manufacturer;
    std::string source_url;
};

struct Lexicons {
    canon::SynonymLexicon drugs;
    canon::SynonymLexicon tests;
    canon::SynonymLexicon matrices;
};

struct SkippedRow {
    std::size_t row = 0;
    std::string reason;
};

struct UnknownName {
    canon::NameKind kind = canon::NameKind::drug;
    std::string name;
    bool operator==(const UnknownName&) const = default;
};

struct BuildResult {
    std::vector<AssayRecord> records;
    std::vector<SkippedRow> skipped;
    std::vector<std::string> warnings;
    std::vector<UnknownName> unknown_names;
};

// One record per data row (rows after the header). Throws ValidationError if
// the schema is not relevant.
BuildResult build_records(const RawTable& t, const fieldmap::TableSchema& schema, const DocumentContext& ctx,
                          const Lexicons& lex);

}  // namespace harvest::records
