#include "harvest/pdftab.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include <fmt/format.h>

#include "harvest/text.hpp"

namespace harvest::pdftab {

namespace {

double upper_median(std::vector<double> v) {
    if (v.empty()) return 0;
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

std::vector<std::size_t> order_by_y(const std::vector<TextSpan>& spans) {
    std::vector<std::size_t> idx(spans.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(spans[a].y, spans[a].x, spans[a].text, spans[a].width) <
               std::tie(spans[b].y, spans[b].x, spans[b].text, spans[b].width);
    });
    return idx;
}

// Single-linkage clustering of baselines.
std::vector<std::vector<std::size_t>> cluster_rows(const std::vector<TextSpan>& spans, double row_tol) {
    std::vector<std::vector<std::size_t>> rows;
    double prev = 0;
    for (std::size_t i : order_by_y(spans)) {
        if (rows.empty() || spans[i].y - prev > row_tol) rows.emplace_back();
        rows.back().push_back(i);
        prev = spans[i].y;
    }
    for (auto& r : rows) {
        std::sort(r.begin(), r.end(), [&](std::size_t a, std::size_t b) {
            return std::tie(spans[a].x, spans[a].text, spans[a].width) <
                   std::tie(spans[b].x, spans[b].text, spans[b].width);
        });
    }
    return rows;
}

std::size_t band_for(const std::vector<Band>& bands, double v) {
    std::size_t best = 0;
    double best_d = -1;
    for (std::size_t i = 0; i < bands.size(); ++i) {
        if (bands[i].contains(v)) return i;
        double d = bands[i].distance(v);
        if (best_d < 0 || d < best_d) {
            best = i;
            best_d = d;
        }
    }
    return best;
}

bool row_empty(const std::vector<std::string>& row) {
    return std::all_of(row.begin(), row.end(), [](const std::string& c) { return c.empty(); });
}

std::optional<fieldmap::Field> safe_map(const std::string& cell, const fieldmap::HeaderSynonymTable& syn) {
    try {
        return fieldmap::map_header(cell, syn);
    } catch (const fieldmap::AmbiguousHeader&) {
        return std::nullopt;
    }
}

}  // namespace

double line_pitch(const std::vector<TextSpan>& spans) {
    std::vector<double> ys;
    ys.reserve(spans.size());
    for (const auto& s : spans) ys.push_back(s.y);
    std::sort(ys.begin(), ys.end());
    std::vector<double> gaps;
    for (std::size_t i = 1; i < ys.size(); ++i) {
        double d = ys[i] - ys[i - 1];
        if (d > 1e-6) gaps.push_back(d);
    }
    return upper_median(std::move(gaps));
}

Tolerances default_tolerances(const std::vector<TextSpan>& spans) {
    double pitch = line_pitch(spans);
    if (pitch <= 0) return {1.0, 1.0};
    Tolerances t;
    t.row_tol = 0.4 * pitch;
    std::vector<double> word_gaps;
    for (const auto& row : cluster_rows(spans, t.row_tol)) {
        for (std::size_t k = 1; k < row.size(); ++k) {
            const auto& a = spans[row[k - 1]];
            const auto& b = spans[row[k]];
            double gap = b.x - (a.x + a.width);
            if (gap > 0 && gap < pitch) word_gaps.push_back(gap);
        }
    }
    t.col_gap = std::max(1.5 * upper_median(std::move(word_gaps)), 0.5 * pitch);
    return t;
}

Reconstruction reconstruct_table(const std::vector<TextSpan>& spans, double row_tol, double col_gap) {
    if (!(row_tol > 0) || !(col_gap > 0)) throw ValidationError("row_tol and col_gap must be positive");
    Reconstruction out;
    if (spans.empty()) return out;
    for (const auto& s : spans) {
        if (s.page != spans.front().page) throw ValidationError("reconstruct_table: spans from more than one page");
    }
    auto rows = cluster_rows(spans, row_tol);

    std::vector<Band> intervals;
    for (const auto& r : rows) {
        if (r.size() < 2) continue;
        for (std::size_t i : r) intervals.push_back({spans[i].x, spans[i].x + spans[i].width});
    }
    std::sort(intervals.begin(), intervals.end(),
              [](const Band& a, const Band& b) { return std::tie(a.lo, a.hi) < std::tie(b.lo, b.hi); });
    std::vector<Band> cols;
    for (const auto& iv : intervals) {
        if (!cols.empty() && iv.lo - cols.back().hi < col_gap) {
            cols.back().hi = std::max(cols.back().hi, iv.hi);
        } else {
            cols.push_back(iv);
        }
    }
    if (rows.size() < 2 || cols.size() < 2) return out;

    std::vector<Band> row_bands;
    std::vector<std::vector<std::string>> cells(rows.size(), std::vector<std::string>(cols.size()));
    out.placement.resize(spans.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        Band band{spans[rows[r].front()].y, spans[rows[r].front()].y};
        for (std::size_t i : rows[r]) {
            band.lo = std::min(band.lo, spans[i].y);
            band.hi = std::max(band.hi, spans[i].y);
            std::size_t c = band_for(cols, spans[i].x + spans[i].width / 2);
            auto& cell = cells[r][c];
            if (!cell.empty()) cell.push_back(' ');
            cell += spans[i].text;
            out.placement[i] = {r, c};
        }
        row_bands.push_back(band);
    }
    auto t = RawTable::from_rows(std::move(cells));
    t.page_number = spans.front().page;
    out.table = std::move(t);
    out.grid = GridModel{std::move(row_bands), std::move(cols)};
    return out;
}

Reconstruction reconstruct_table(const std::vector<TextSpan>& spans) {
    auto tol = default_tolerances(spans);
    return reconstruct_table(spans, tol.row_tol, tol.col_gap);
}

RawTable drop_class_title_rows(const RawTable& t) {
    RawTable out = t;
    out.cells.clear();
    out.header_row_index.reset();
    for (std::size_t i = 0; i < t.rows(); ++i) {
        const auto& row = t.cells[i];
        if (t.header_row_index) {
            if (i == *t.header_row_index) {
                out.header_row_index = out.cells.size();
                out.cells.push_back(row);
                continue;
            }
            if (i < *t.header_row_index) continue;
        }
        auto filled = std::count_if(row.begin(), row.end(), [](const std::string& c) { return !c.empty(); });
        if (filled == 0) continue;
        if (filled == 1 && t.cols() > 1) continue;
        bool numeric = std::any_of(row.begin(), row.end(),
                                   [](const std::string& c) { return text::contains_positive_number(c); });
        if (!numeric) continue;
        out.cells.push_back(row);
    }
    return out;
}

RawTable fold_repeated_columns(const RawTable& t, const fieldmap::HeaderSynonymTable& syn) {
    if (!t.header_row_index || t.cols() == 0) return t;
    const auto& header = t.cells[*t.header_row_index];
    std::vector<std::optional<fieldmap::Field>> fields;
    for (const auto& cell : header) fields.push_back(safe_map(cell, syn));
    if (!fields[0]) return t;
    std::vector<std::size_t> starts;
    for (std::size_t c = 0; c < fields.size(); ++c) {
        if (fields[c] == fields[0]) starts.push_back(c);
    }
    if (starts.size() < 2) return t;
    std::size_t width = starts[1] - starts[0];
    for (std::size_t b = 0; b < starts.size(); ++b) {
        std::size_t end = b + 1 < starts.size() ? starts[b + 1] : t.cols();
        if (end - starts[b] != width)
            throw StructuralError(fmt::format("repeated column block {} (columns {}..{}) has width {}, expected {}",
                                              b + 1, starts[b], end - 1, end - starts[b], width));
    }
    for (std::size_t b = 1; b < starts.size(); ++b) {
        for (std::size_t k = 0; k < width; ++k) {
            if (fields[starts[b] + k] != fields[k]) return t;
        }
    }
    RawTable out = t;
    out.cells.clear();
    std::size_t h = *t.header_row_index;
    for (std::size_t i = 0; i < h; ++i) {
        std::vector<std::string> row(t.cells[i].begin(), t.cells[i].begin() + static_cast<long>(width));
        for (std::size_t c = width; c < t.cols(); ++c) {
            if (t.cells[i][c].empty()) continue;
            auto& dst = row[c % width];
            dst = dst.empty() ? t.cells[i][c] : dst + " " + t.cells[i][c];
        }
        out.cells.push_back(std::move(row));
    }
    out.header_row_index = out.cells.size();
    out.cells.emplace_back(header.begin(), header.begin() + static_cast<long>(width));
    for (std::size_t b = 0; b < starts.size(); ++b) {
        for (std::size_t i = h + 1; i < t.rows(); ++i) {
            auto first = t.cells[i].begin() + static_cast<long>(starts[b]);
            std::vector<std::string> row(first, first + static_cast<long>(width));
            if (!row_empty(row)) out.cells.push_back(std::move(row));
        }
    }
    return out;
}

std::string_view to_string(GapSeverity s) {
    return s == GapSeverity::row_suspected ? "row_suspected" : "unknown";
}

std::vector<ExtractionGap> audit_completeness(const RawTable& t, const std::vector<TextSpan>& page_spans,
                                              const std::vector<std::string>& lexicon, const std::string& table_id) {
    struct Hit {
        std::size_t span;
        std::size_t pos;
        std::size_t len;
        std::string text;
    };
    std::vector<std::string> names;
    for (const auto& n : lexicon) {
        auto norm = text::normalize_space(n);
        if (norm.empty()) continue;
        bool dup = std::any_of(names.begin(), names.end(), [&](const std::string& m) { return text::iequals(m, norm); });
        if (!dup) names.push_back(std::move(norm));
    }

    std::vector<std::string> stripped;
    stripped.reserve(page_spans.size());
    for (const auto& s : page_spans) stripped.push_back(text::strip_footnotes(s.text));

    std::vector<Hit> hits;
    for (std::size_t si = 0; si < page_spans.size(); ++si) {
        std::vector<Hit> local;
        for (const auto& name : names) {
            for (auto pos : text::find_word(stripped[si], name))
                local.push_back({si, pos, name.size(), stripped[si].substr(pos, name.size())});
        }
        for (const auto& h : local) {
            bool inside_longer = std::any_of(local.begin(), local.end(), [&](const Hit& o) {
                return o.len > h.len && o.pos <= h.pos && h.pos + h.len <= o.pos + o.len;
            });
            if (!inside_longer) hits.push_back(h);
        }
    }

    std::vector<std::string> cells;
    for (const auto& row : t.cells) {
        for (const auto& c : row) {
            if (!c.empty()) cells.push_back(text::strip_footnotes(c));
        }
    }
    auto in_cells = [&](const std::string& term) {
        return std::any_of(cells.begin(), cells.end(),
                           [&](const std::string& c) { return !text::find_word(c, term).empty(); });
    };

    std::sort(hits.begin(), hits.end(), [&](const Hit& a, const Hit& b) {
        const auto& sa = page_spans[a.span];
        const auto& sb = page_spans[b.span];
        return std::tie(sa.y, sa.x, a.pos) < std::tie(sb.y, sb.x, b.pos);
    });

    double tol = 0.4 * line_pitch(page_spans);
    std::vector<ExtractionGap> gaps;
    std::vector<double> gap_y;
    std::vector<std::string> reported;
    for (const auto& h : hits) {
        bool seen = std::any_of(reported.begin(), reported.end(), [&](const std::string& r) { return text::iequals(r, h.text); });
        if (seen || in_cells(h.text)) continue;
        reported.push_back(h.text);
        double y = page_spans[h.span].y;
        std::size_t g = 0;
        while (g < gaps.size() && std::abs(gap_y[g] - y) > tol) ++g;
        if (g == gaps.size()) {
            ExtractionGap gap;
            gap.table_id = table_id;
            gap.severity = GapSeverity::row_suspected;
            for (const auto& s : page_spans) {
                if (std::abs(s.y - y) <= tol) gap.evidence.push_back(s);
            }
            std::sort(gap.evidence.begin(), gap.evidence.end(),
                      [](const TextSpan& a, const TextSpan& b) { return std::tie(a.x, a.y) < std::tie(b.x, b.y); });
            gaps.push_back(std::move(gap));
            gap_y.push_back(y);
        }
        gaps[g].missing_terms.push_back(h.text);
    }
    return gaps;
}

std::vector<std::string> propose_repair(const RawTable& t, const GridModel& grid, const ExtractionGap& gap) {
    std::size_t width = t.cols();
    std::vector<std::string> row(width);
    if (width == 0 || grid.col_bands.empty()) return row;
    std::size_t blocks = std::max<std::size_t>(1, grid.col_bands.size() / width);
    std::optional<std::size_t> block;
    if (blocks > 1) {
        for (const auto& s : gap.evidence) {
            bool has_term = std::any_of(gap.missing_terms.begin(), gap.missing_terms.end(), [&](const std::string& m) {
                return !text::find_word(text::strip_footnotes(s.text), m).empty();
            });
            if (has_term) {
                block = band_for(grid.col_bands, s.x + s.width / 2) / width;
                break;
            }
        }
    }
    for (const auto& s : gap.evidence) {
        std::size_t c = band_for(grid.col_bands, s.x + s.width / 2);
        if (block && c / width != *block) continue;
        auto& cell = row[c % width];
        if (!cell.empty()) cell.push_back(' ');
        cell += s.text;
    }
    return row;
}

RawTable apply_repair(const RawTable& t, const std::vector<std::string>& row) {
    if (row.size() != t.cols())
        throw ValidationError(fmt::format("repair row has {} cells, table has {} columns", row.size(), t.cols()));
    RawTable out = t;
    std::vector<std::string> trimmed;
    for (const auto& c : row) trimmed.push_back(text::normalize_space(c));
    out.cells.push_back(std::move(trimmed));
    return out;
}

}  // namespace harvest::pdftab
