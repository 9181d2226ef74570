#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "harvest/pdftab.hpp"
#include "harvest/text.hpp"
#include "testkit.hpp"

using namespace harvest;
using pdftab::TextSpan;

namespace {

TextSpan span(double x, double y, const std::string& t) {
    return TextSpan{1, x, y, 6.0 * static_cast<double>(t.size()), t};
}

const fieldmap::HeaderSynonymTable& syn() { return testkit::config().fields; }

RawTable with_header(std::vector<std::vector<std::string>> rows, std::size_t header = 0) {
    auto t = RawTable::from_rows(std::move(rows));
    t.header_row_index = header;
    return t;
}

}  // namespace

TEST(PdfTab, TwoByTwo) {
    std::vector<TextSpan> s = {span(10, 10, "a"), span(100, 10, "b"), span(10, 22, "c"), span(100, 22, "d")};
    auto r = pdftab::reconstruct_table(s);
    ASSERT_TRUE(r.is_table());
    EXPECT_EQ(r.table->cells, (std::vector<std::vector<std::string>>{{"a", "b"}, {"c", "d"}}));
    EXPECT_EQ(r.grid.row_bands.size(), 2u);
    EXPECT_EQ(r.grid.col_bands.size(), 2u);
    ASSERT_EQ(r.placement.size(), 4u);
    EXPECT_EQ(r.placement[3].row, 1u);
    EXPECT_EQ(r.placement[3].col, 1u);
}

TEST(PdfTab, BaselineJitterStaysInRow) {
    // Jitter of row_tol / 2 on the second row.
    std::vector<TextSpan> s = {span(10, 10, "a"), span(100, 10, "b"), span(10, 22, "c"), span(100, 24.4, "d")};
    auto r = pdftab::reconstruct_table(s, 4.8, 12.0);
    ASSERT_TRUE(r.is_table());
    EXPECT_EQ(r.table->cells, (std::vector<std::vector<std::string>>{{"a", "b"}, {"c", "d"}}));
}

TEST(PdfTab, SingleColumnIsNotATable) {
    auto r = pdftab::reconstruct_table({span(10, 10, "alpha"), span(10, 22, "beta")});
    EXPECT_FALSE(r.is_table());
    EXPECT_TRUE(r.placement.empty());
}

TEST(PdfTab, DefaultTolerances) {
    std::vector<TextSpan> s = {span(10, 10, "a"), span(100, 10, "b"), span(10, 22, "c"), span(100, 22, "d")};
    EXPECT_DOUBLE_EQ(pdftab::line_pitch(s), 12.0);
    auto tol = pdftab::default_tolerances(s);
    EXPECT_DOUBLE_EQ(tol.row_tol, 4.8);
    EXPECT_GE(tol.col_gap, 6.0);
}

TEST(PdfTab, TranslationAndPermutationInvariant) {
    std::mt19937 rng(5);
    for (const auto& f : testkit::figures()) {
        auto spans = testkit::figure_spans(f);
        auto base = pdftab::reconstruct_table(spans);
        ASSERT_TRUE(base.is_table()) << f.name;
        for (int trial = 0; trial < 5; ++trial) {
            auto moved = spans;
            double dx = static_cast<double>(rng() % 400) - 200;
            double dy = static_cast<double>(rng() % 400) - 100;
            for (auto& s : moved) {
                s.x += dx;
                s.y += dy;
            }
            std::shuffle(moved.begin(), moved.end(), rng);
            auto again = pdftab::reconstruct_table(moved);
            ASSERT_TRUE(again.is_table()) << f.name;
            EXPECT_EQ(again.table->cells, base.table->cells) << f.name;
        }
    }
}

TEST(PdfTab, PlacementMatchesCells) {
    auto spans = testkit::figure_spans(testkit::figure("fig4"));
    auto r = pdftab::reconstruct_table(spans);
    ASSERT_TRUE(r.is_table());
    ASSERT_EQ(r.placement.size(), spans.size());
    for (std::size_t i = 0; i < spans.size(); ++i) {
        const auto& cell = r.table->cells[r.placement[i].row][r.placement[i].col];
        EXPECT_NE(cell.find(spans[i].text), std::string::npos) << spans[i].text;
    }
}

TEST(PdfTab, DropClassTitleRows) {
    auto t = with_header({{"Sensitivity of beta-lactams", "", ""},
                          {"Drug", "Sensitivity (ppb)", "Tolerance (ppb)"},
                          {"Penicillins", "", ""},
                          {"Amoxicillin", "3 to 4", "10"},
                          {"Tetracycline Drug", "Detection", "MRL"},
                          {"Notes", "see footnote", ""},
                          {"Tetracycline", "10 to 30", "300"}},
                         1);
    auto d = pdftab::drop_class_title_rows(t);
    EXPECT_EQ(d.header_row_index, 0u);
    EXPECT_EQ(d.cells, (std::vector<std::vector<std::string>>{{"Drug", "Sensitivity (ppb)", "Tolerance (ppb)"},
                                                              {"Amoxicillin", "3 to 4", "10"},
                                                              {"Tetracycline", "10 to 30", "300"}}));
    EXPECT_EQ(pdftab::drop_class_title_rows(d), d);
}

TEST(PdfTab, FoldThreeBlocks) {
    auto t = with_header({{"Drug", "Sensitivity", "Drug", "Sensitivity", "Drug", "Sensitivity"},
                          {"A", "1", "C", "3", "E", "5"},
                          {"B", "2", "D", "4", "", ""}});
    auto f = pdftab::fold_repeated_columns(t, syn());
    EXPECT_EQ(f.cols(), 2u);
    EXPECT_EQ(f.header_row_index, 0u);
    EXPECT_EQ(f.cells, (std::vector<std::vector<std::string>>{
                           {"Drug", "Sensitivity"}, {"A", "1"}, {"B", "2"}, {"C", "3"}, {"D", "4"}, {"E", "5"}}));
    EXPECT_EQ(pdftab::fold_repeated_columns(f, syn()), f);
}

TEST(PdfTab, FoldKeepsRowsAboveHeader) {
    auto t = with_header({{"Title", "", "", "more"}, {"Drug", "Sensitivity", "Drug", "Sensitivity"}, {"A", "1", "B", "2"}},
                         1);
    auto f = pdftab::fold_repeated_columns(t, syn());
    EXPECT_EQ(f.header_row_index, 1u);
    EXPECT_EQ(f.cells[0], (std::vector<std::string>{"Title", "more"}));
    EXPECT_EQ(f.rows(), 4u);
}

TEST(PdfTab, FoldRejectsUnequalBlocks) {
    auto t = with_header({{"Drug", "Sensitivity", "Tolerance", "Drug", "Sensitivity"}, {"A", "1", "2", "B", "3"}});
    EXPECT_THROW(pdftab::fold_repeated_columns(t, syn()), StructuralError);
}

TEST(PdfTab, FoldLeavesPlainTablesAlone) {
    auto t = with_header({{"Drug", "Sensitivity", "Tolerance"}, {"A", "1", "2"}});
    EXPECT_EQ(pdftab::fold_repeated_columns(t, syn()), t);
    auto no_header = RawTable::from_rows({{"Drug", "Sensitivity", "Drug", "Sensitivity"}});
    EXPECT_EQ(pdftab::fold_repeated_columns(no_header, syn()), no_header);
}

TEST(PdfTab, FoldPreservesNonEmptyDataRows) {
    std::mt19937 rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t k = 2 + rng() % 3;
        std::size_t n = 1 + rng() % 6;
        std::vector<std::vector<std::string>> rows(1);
        for (std::size_t b = 0; b < k; ++b) {
            rows[0].push_back("Drug");
            rows[0].push_back("Sensitivity");
        }
        std::size_t expected = 0;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<std::string> row;
            for (std::size_t b = 0; b < k; ++b) {
                bool filled = rng() % 4 != 0;
                expected += filled;
                row.push_back(filled ? "d" + std::to_string(i) : "");
                row.push_back(filled ? std::to_string(i + 1) : "");
            }
            rows.push_back(row);
        }
        auto f = pdftab::fold_repeated_columns(with_header(rows), syn());
        EXPECT_EQ(f.rows() - 1, expected);
    }
}

TEST(PdfTab, AuditGroupsTermsOnOneBaseline) {
    auto t = with_header({{"Drug", "Sensitivity"}, {"Amoxicillin", "4"}});
    std::vector<TextSpan> page = {span(10, 10, "Drug"), span(100, 10, "Sensitivity"), span(10, 22, "Amoxicillin"),
                                  span(100, 22, "4"), span(10, 34, "Ampicillin or Cloxacillin"), span(100, 34, "5"),
                                  span(10, 46, "Tetracycline Drug")};
    auto gaps = pdftab::audit_completeness(t, page, testkit::config().lex.drugs.all_names(), "t1");
    ASSERT_EQ(gaps.size(), 2u);
    EXPECT_EQ(gaps[0].missing_terms, (std::vector<std::string>{"Ampicillin", "Cloxacillin"}));
    EXPECT_EQ(gaps[0].table_id, "t1");
    EXPECT_EQ(gaps[0].evidence.size(), 2u);
    EXPECT_EQ(gaps[1].missing_terms, (std::vector<std::string>{"Tetracycline"}));
}

TEST(PdfTab, ApplyRepairChecksWidth) {
    auto t = with_header({{"Drug", "Sensitivity"}, {"Amoxicillin", "4"}});
    auto r = pdftab::apply_repair(t, {"Ampicillin", "5"});
    EXPECT_EQ(r.rows(), 3u);
    EXPECT_EQ(r.cells.back()[0], "Ampicillin");
    EXPECT_THROW(pdftab::apply_repair(t, {"x"}), ValidationError);
}
