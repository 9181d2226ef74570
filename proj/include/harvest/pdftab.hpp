#pragma once

#include <optional>
#include <string>
#include <vector>

#include "harvest/fieldmap.hpp"
#include "harvest/pdf.hpp"
#include "harvest/types.hpp"

namespace harvest::pdftab {

using pdf::TextSpan;

struct Band {
    double lo = 0;
    double hi = 0;

    bool contains(double v) const { return v >= lo && v <= hi; }
    double distance(double v) const { return v < lo ? lo - v : (v > hi ? v - hi : 0.0); }
    bool operator==(const Band&) const = default;
};

struct GridModel {
    std::vector<Band> row_bands;
    std::vector<Band> col_bands;

    bool operator==(const GridModel&) const = default;
};

struct Tolerances {
    double row_tol = 0;
    double col_gap = 0;
};

// Median spacing between consecutive distinct baselines.
double line_pitch(const std::vector<TextSpan>& spans);

// row_tol = 0.4 x line pitch. col_gap = 1.5 x the median gap between
// neighbouring spans of a row that are closer than a line pitch (word gaps
// inside one cell), but never less than half a line pitch.
Tolerances default_tolerances(const std::vector<TextSpan>& spans);

struct Placement {
    std::size_t row = 0;
    std::size_t col = 0;
};

struct Reconstruction {
    std::optional<RawTable> table;  // absent: not a table
    GridModel grid;
    std::vector<Placement> placement;  // per input span (empty when not a table)

    bool is_table() const { return table.has_value(); }
};

// Rows: spans sorted by y, a new row whenever the next baseline is more than
// row_tol below the previous one. Columns: x-extents of spans from rows with
// at least two spans, merged while the horizontal gap is below col_gap. A span
// goes to the band holding its midpoint, else the nearest band.
Reconstruction reconstruct_table(const std::vector<TextSpan>& spans, double row_tol, double col_gap);
Reconstruction reconstruct_table(const std::vector<TextSpan>& spans);

// Removes rows above the header, non-header rows without any positive number,
// and ribbon rows holding a single non-empty cell.
RawTable drop_class_title_rows(const RawTable& t);

// Splits a header whose field sequence repeats k >= 2 times into k blocks and
// stacks them, left block first; all-empty rows are dropped. Throws
// StructuralError when the blocks differ in width.
RawTable fold_repeated_columns(const RawTable& t, const fieldmap::HeaderSynonymTable& syn);

enum class GapSeverity { row_suspected, unknown };

std::string_view to_string(GapSeverity s);

struct ExtractionGap {
    std::string table_id;
    std::vector<std::string> missing_terms;
    GapSeverity severity = GapSeverity::row_suspected;
    std::vector<TextSpan> evidence;  // spans sharing a baseline with the terms

    bool operator==(const ExtractionGap&) const = default;
};

// Every lexicon name found (word-guarded, case-insensitive) in the span text
// but in no cell of `t`. Names inside a longer found name are ignored. Terms
// found on the same baseline are reported as one gap.
std::vector<ExtractionGap> audit_completeness(const RawTable& t, const std::vector<TextSpan>& page_spans,
                                              const std::vector<std::string>& lexicon,
                                              const std::string& table_id = {});

// Candidate row built from a gap's evidence spans, placed into the grid's
// column bands (folded tables wrap modulo the table width).
std::vector<std::string> propose_repair(const RawTable& t, const GridModel& grid, const ExtractionGap& gap);

// Appends a confirmed row; throws ValidationError on a width mismatch.
RawTable apply_repair(const RawTable& t, const std::vector<std::string>& row);

}  // namespace harvest::pdftab
