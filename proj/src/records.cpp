#include "harvest/records.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "harvest/csv.hpp"
#include "harvest/text.hpp"

namespace harvest::records {

namespace {

const char* const kNumber = R"((\d[\d,]*(?:\.\d+)?|\.\d+))";
const char* const kUnit = R"((?:\(?\s*(ppb|ppm|µg/kg|μg/kg|ug/kg|mg/kg)\s*\)?))";

const std::regex& sensitivity_re() {
    static const std::regex re(std::string("^") + kNumber + R"((?:\s*(?:to|-)\s*)" + kNumber + ")?\\s*" + kUnit +
                                   "?$",
                               std::regex::ECMAScript | std::regex::icase);
    return re;
}

const std::regex& reference_re() {
    static const std::regex re(std::string("^") + kNumber + R"((?:\s*/\s*)" + kNumber + ")?\\s*" + kUnit + "?$",
                               std::regex::ECMAScript | std::regex::icase);
    return re;
}

std::optional<Unit> unit_from_token(std::string_view tok) {
    auto t = text::to_lower(tok);
    if (t == "ppb" || t == "µg/kg" || t == "μg/kg" || t == "ug/kg") return Unit::ppb;
    if (t == "ppm" || t == "mg/kg") return Unit::ppm;
    return std::nullopt;
}

std::string prepare(std::string_view cell) {
    std::string s = text::strip_footnotes(cell);
    // en dash / em dash as range separator
    for (const char* dash : {"\xE2\x80\x93", "\xE2\x80\x94"}) {
        std::size_t pos;
        while ((pos = s.find(dash)) != std::string::npos) s.replace(pos, 3, "-");
    }
    return text::normalize_space(s);
}

bool has_digit(std::string_view s) {
    return s.find_first_of("0123456789") != std::string_view::npos;
}

double number_or_throw(const std::string& tok, std::string_view raw) {
    auto v = text::parse_decimal(tok);
    if (!v)
        throw ValueError(ValueError::Reason::malformed, std::string(raw),
                         fmt::format("cannot read number '{}' in '{}'", tok, raw));
    return *v;
}

bool same_reference(const ReferenceLimit& a, const ReferenceLimit& b) {
    if (a.none_stated || b.none_stated) return a.none_stated == b.none_stated;
    auto scale = [](const ReferenceLimit& r) { return r.unit == Unit::ppm ? kPpbPerPpm : 1.0; };
    std::optional<double> sa, sb;
    if (a.secondary) sa = *a.secondary * scale(a);
    if (b.secondary) sb = *b.secondary * scale(b);
    return a.value_ppb() == b.value_ppb() && sa == sb;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(fmt::format("cannot open {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string_view to_string(Unit u) {
    return u == Unit::ppm ? "ppm" : "ppb";
}

bool same_value(const SensitivityValue& a, const SensitivityValue& b) {
    return a.low_ppb() == b.low_ppb() && a.high_ppb() == b.high_ppb();
}

SensitivityValue parse_sensitivity(std::string_view cell, std::optional<Unit> column_unit_hint) {
    std::string raw(text::trim(cell));
    std::string s = prepare(cell);
    std::smatch m;
    if (!std::regex_match(s, m, sensitivity_re())) {
        if (!has_digit(s))
            throw ValueError(ValueError::Reason::no_number, raw, fmt::format("no number in '{}'", raw));
        throw ValueError(ValueError::Reason::malformed, raw, fmt::format("unrecognized value form '{}'", raw));
    }
    SensitivityValue v;
    v.raw = raw;
    v.low = number_or_throw(m[1].str(), raw);
    v.high = m[2].matched ? number_or_throw(m[2].str(), raw) : v.low;
    std::optional<Unit> unit = m[3].matched ? unit_from_token(m[3].str()) : column_unit_hint;
    if (!unit)
        throw ValueError(ValueError::Reason::unit_unresolved, raw,
                         fmt::format("no unit in '{}' or its column heading", raw));
    v.unit = *unit;
    if (v.low <= 0)
        throw ValueError(ValueError::Reason::non_positive, raw, fmt::format("non-positive value '{}'", raw));
    if (v.low > v.high)
        throw ValueError(ValueError::Reason::range_order, raw, fmt::format("range bounds reversed in '{}'", raw));
    return v;
}

std::string format_sensitivity(const SensitivityValue& v) {
    if (v.is_scalar()) return fmt::format("{} {}", text::format_number(v.low), to_string(v.unit));
    return fmt::format("{} to {} {}", text::format_number(v.low), text::format_number(v.high), to_string(v.unit));
}

std::optional<Unit> unit_hint(std::string_view header_cell) {
    auto s = text::to_lower(text::strip_footnotes(header_cell));
    static const std::regex re(R"((?:^|[^a-z0-9_])(ppb|ppm|µg/kg|μg/kg|ug/kg|mg/kg)(?=[^a-z0-9_]|$))");
    std::smatch m;
    if (std::regex_search(s, m, re)) return unit_from_token(m[1].str());
    return std::nullopt;
}

ReferenceLimit parse_reference(std::string_view cell, std::optional<Unit> column_unit_hint) {
    std::string raw(text::trim(cell));
    std::string s = prepare(cell);
    ReferenceLimit r;
    r.raw = raw;
    if (text::iequals(s, "none") || text::iequals(s, "n/a")) {
        r.none_stated = true;
        return r;
    }
    std::smatch m;
    if (!std::regex_match(s, m, reference_re())) {
        if (!has_digit(s))
            throw ValueError(ValueError::Reason::no_number, raw, fmt::format("no number in '{}'", raw));
        throw ValueError(ValueError::Reason::malformed, raw, fmt::format("unrecognized reference form '{}'", raw));
    }
    r.value = number_or_throw(m[1].str(), raw);
    if (m[2].matched) r.secondary = number_or_throw(m[2].str(), raw);
    std::optional<Unit> unit = m[3].matched ? unit_from_token(m[3].str()) : column_unit_hint;
    if (!unit)
        throw ValueError(ValueError::Reason::unit_unresolved, raw,
                         fmt::format("no unit in '{}' or its column heading", raw));
    r.unit = *unit;
    return r;
}

std::string format_reference(const ReferenceLimit& r) {
    if (r.none_stated) return "None";
    if (r.secondary)
        return fmt::format("{}/{} {}", text::format_number(r.value), text::format_number(*r.secondary),
                           to_string(r.unit));
    return fmt::format("{} {}", text::format_number(r.value), to_string(r.unit));
}

IdentityKey AssayRecord::key() const {
    return {drug, test, matrix, type ? std::string(canon::to_string(*type)) : std::string()};
}

std::vector<std::string> to_csv_fields(const AssayRecord& r) {
    return {r.drug,
            format_sensitivity(r.sensitivity),
            r.matrix,
            r.test,
            r.type ? std::string(canon::to_string(*r.type)) : std::string(),
            r.tolerance ? format_reference(*r.tolerance) : std::string(),
            r.mrl ? format_reference(*r.mrl) : std::string(),
            r.species.value_or(""),
            r.manufacturer.value_or(""),
            r.source_url};
}

AssayRecord from_csv_fields(const std::vector<std::string>& f, std::size_t line) {
    if (f.size() != kCsvHeader.size())
        throw ValidationError(fmt::format("line {}: expected {} fields, found {}", line, kCsvHeader.size(), f.size()),
                              line);
    auto required = [&](std::size_t i) -> const std::string& {
        if (text::trim(f[i]).empty())
            throw ValidationError(fmt::format("line {}: {} is empty", line, kCsvHeader[i]), line);
        return f[i];
    };
    AssayRecord r;
    r.drug = required(0);
    try {
        r.sensitivity = parse_sensitivity(required(1), std::nullopt);
        if (!f[5].empty()) r.tolerance = parse_reference(f[5], std::nullopt);
        if (!f[6].empty()) r.mrl = parse_reference(f[6], std::nullopt);
    } catch (const ValueError& e) {
        throw ValidationError(fmt::format("line {}: {}", line, e.what()), line);
    }
    r.matrix = required(2);
    r.test = required(3);
    if (!f[4].empty()) {
        r.type = canon::method_from_string(f[4]);
        if (!r.type) throw ValidationError(fmt::format("line {}: unknown Type '{}'", line, f[4]), line);
    }
    if (!f[7].empty()) r.species = f[7];
    if (!f[8].empty()) r.manufacturer = f[8];
    r.source_url = required(9);
    return r;
}

std::string write_csv(const std::vector<AssayRecord>& records) {
    std::string out = csv::format_row(kCsvHeader);
    for (const auto& r : records) out += csv::format_row(to_csv_fields(r));
    return out;
}

std::vector<AssayRecord> read_csv(std::string_view content) {
    auto rows = csv::parse(content);
    if (rows.empty()) throw ValidationError("empty record file: missing header", 1);
    if (rows.front().fields != kCsvHeader)
        throw ValidationError(fmt::format("line 1: header must be {}", text::join(kCsvHeader, ",")), 1);
    std::vector<AssayRecord> out;
    for (std::size_t i = 1; i < rows.size(); ++i) out.push_back(from_csv_fields(rows[i].fields, rows[i].line));
    return out;
}

ToleranceTable ToleranceTable::parse(std::string_view content) {
    ToleranceTable t;
    std::set<std::tuple<std::string, std::string, std::string>> seen;
    std::size_t line_no = 0;
    for (const auto& raw : text::split(content, '\n')) {
        ++line_no;
        auto line = raw;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty() || text::trim(line).front() == '#') continue;
        auto f = text::split(line, '\t');
        if (f.size() < 5)
            throw ValidationError(fmt::format("line {}: expected drug, species, matrix, value, unit, citation",
                                              line_no),
                                  line_no);
        for (auto& x : f) x = text::normalize_space(x);
        ToleranceRow row;
        row.drug = f[0];
        row.species = f[1];
        row.matrix = f[2];
        if (row.drug.empty()) throw ValidationError(fmt::format("line {}: empty drug", line_no), line_no);
        try {
            auto unit = unit_from_token(f[4]);
            if (!unit) throw ValidationError(fmt::format("line {}: unknown unit '{}'", line_no, f[4]), line_no);
            row.value = parse_reference(f[3], unit);
        } catch (const ValueError& e) {
            throw ValidationError(fmt::format("line {}: {}", line_no, e.what()), line_no);
        }
        row.citation = f.size() > 5 ? f[5] : "";
        auto key = std::make_tuple(text::to_lower(row.drug), text::to_lower(row.species), text::to_lower(row.matrix));
        if (!seen.insert(key).second)
            throw ValidationError(fmt::format("line {}: duplicate tolerance row for ({}, {}, {})", line_no, row.drug,
                                              row.species, row.matrix),
                                  line_no);
        t.rows.push_back(std::move(row));
    }
    return t;
}

ToleranceTable ToleranceTable::load(const std::filesystem::path& path) {
    return parse(read_file(path));
}

const ToleranceRow* ToleranceTable::lookup(const std::string& drug, const std::string& species,
                                           const std::string& matrix) const {
    const ToleranceRow* best = nullptr;
    int best_score = -1;
    bool tie = false;
    for (const auto& row : rows) {
        if (!text::iequals(row.drug, drug)) continue;
        int score = 0;
        bool reject = false;
        auto consider = [&](const std::string& want, const std::string& have) {
            if (want.empty() || have.empty()) return;
            if (text::iequals(want, have)) {
                ++score;
            } else {
                reject = true;
            }
        };
        consider(row.species, species);
        consider(row.matrix, matrix);
        if (reject) continue;
        if (score > best_score) {
            best = &row;
            best_score = score;
            tie = false;
        } else if (score == best_score) {
            tie = true;
        }
    }
    return tie ? nullptr : best;
}

Annotation annotate_tolerance(const AssayRecord& r, const ToleranceTable& tol) {
    Annotation out{r, std::nullopt};
    const auto* row = tol.lookup(r.drug, r.species.value_or(""), r.matrix);
    if (!row) return out;
    if (r.tolerance && !same_reference(*r.tolerance, row->value))
        out.conflict = ToleranceConflict{r.key(), *r.tolerance, row->value, row->citation};
    out.record.tolerance = row->value;
    return out;
}

std::optional<bool> below_tolerance(const AssayRecord& r) {
    if (!r.tolerance || r.tolerance->none_stated) return std::nullopt;
    return r.sensitivity.high_ppb() <= r.tolerance->value_ppb();
}

BuildResult build_records(const RawTable& t, const fieldmap::TableSchema& schema, const DocumentContext& ctx,
                          const Lexicons& lex) {
    using fieldmap::Field;
    if (!schema.relevant) throw ValidationError("table schema is not relevant (needs Drug and Sensitivity)");
    BuildResult out;
    std::size_t first_data = t.header_row_index ? *t.header_row_index + 1 : 0;
    const std::vector<std::string>* header =
        t.header_row_index ? &t.cells[*t.header_row_index] : nullptr;
    auto hint_for = [&](std::optional<std::size_t> col) -> std::optional<Unit> {
        if (!col || !header) return std::nullopt;
        return unit_hint((*header)[*col]);
    };
    auto drug_col = *schema.column_of(Field::Drug);
    auto sens_col = *schema.column_of(Field::Sensitivity);
    auto test_col = schema.column_of(Field::Test);
    auto matrix_col = schema.column_of(Field::Matrix);
    auto tol_col = schema.column_of(Field::Tolerance);
    auto mrl_col = schema.column_of(Field::MRL);
    auto sens_hint = hint_for(sens_col);

    auto note_unknown = [&](canon::NameKind kind, const canon::Canonical& c) {
        if (c.matched || c.name.empty()) return;
        UnknownName u{kind, c.name};
        if (std::find(out.unknown_names.begin(), out.unknown_names.end(), u) == out.unknown_names.end())
            out.unknown_names.push_back(std::move(u));
    };

    for (std::size_t r = first_data; r < t.rows(); ++r) {
        const auto& row = t.cells[r];
        auto drug_split = canon::split_method_qualifier(text::strip_footnotes(row[drug_col]));
        if (drug_split.name.empty()) {
            out.skipped.push_back({r, "empty drug cell"});
            continue;
        }
        AssayRecord rec;
        try {
            rec.sensitivity = parse_sensitivity(row[sens_col], sens_hint);
        } catch (const ValueError& e) {
            out.skipped.push_back({r, fmt::format("sensitivity: {}", e.what())});
            continue;
        }
        auto drug = lex.drugs.canonicalize(drug_split.name);
        note_unknown(canon::NameKind::drug, drug);
        rec.drug = drug.name;
        rec.type = drug_split.type;

        std::string test_raw = test_col ? text::strip_footnotes(row[*test_col]) : std::string();
        if (test_raw.empty()) test_raw = ctx.test;
        auto test_split = canon::split_method_qualifier(test_raw);
        if (!rec.type) rec.type = test_split.type;
        if (!rec.type) rec.type = ctx.type;
        if (test_split.name.empty()) {
            out.skipped.push_back({r, "no test name in column or document context"});
            continue;
        }
        auto test = lex.tests.canonicalize(test_split.name);
        note_unknown(canon::NameKind::test, test);
        rec.test = test.name;

        std::string matrix_raw = matrix_col ? text::strip_footnotes(row[*matrix_col]) : std::string();
        if (matrix_raw.empty()) matrix_raw = ctx.matrix;
        if (matrix_raw.empty()) {
            out.skipped.push_back({r, "no matrix in column or document context"});
            continue;
        }
        auto matrix = lex.matrices.canonicalize(matrix_raw);
        note_unknown(canon::NameKind::matrix, matrix);
        rec.matrix = matrix.name;

        auto reference = [&](std::optional<std::size_t> col, const char* what) -> std::optional<ReferenceLimit> {
            if (!col || text::trim(row[*col]).empty()) return std::nullopt;
            try {
                return parse_reference(row[*col], hint_for(col));
            } catch (const ValueError& e) {
                out.warnings.push_back(fmt::format("row {}: {} ignored: {}", r, what, e.what()));
                return std::nullopt;
            }
        };
        rec.tolerance = reference(tol_col, "tolerance");
        rec.mrl = reference(mrl_col, "MRL");
        rec.species = ctx.species;
        rec.manufacturer = ctx.manufacturer;
        rec.source_url = ctx.source_url.empty() ? t.source.url : ctx.source_url;
        if (rec.source_url.empty()) {
            out.skipped.push_back({r, "no source URL"});
            continue;
        }
        out.records.push_back(std::move(rec));
    }
    return out;
}

}  // namespace harvest::records
