#include <gtest/gtest.h>

#include "criteria.hpp"
#include "harvest/fieldmap.hpp"
#include "harvest/text.hpp"
#include "testkit.hpp"

using namespace harvest;
using fieldmap::Field;
using fieldmap::KeywordCategory;

namespace {

const fieldmap::HeaderSynonymTable& syn() { return testkit::config().fields; }
const fieldmap::KeywordDictionary& kw() { return testkit::config().keywords; }

const std::vector<std::string> kFixtureHeaders = {
    "Beta-lactam drug", "Detection level (ppb)", "FDA tolerance/safe level (ppb)", "Beta-lactam Drug",
    "Charm 3 SL3 Sensitivity (ppb ^A)", "Safe Level/Tolerance (ppb ^A)", "Antibiotics and Veterinary Drugs",
    "Sensitivity in Milk (ppb ^a)", "FDA Safe Level/Tolerance (ppb ^a)", "Detection Range (ppb ^A)",
    "EU/CODEX MRL (ppb ^A)", "Tetracycline Drug", "Detection Ranges (ppb ^A)", "Antimicrobial Drug ^a",
    "Concentration ^b (ppb ^c)", "US Safe Level/ Tolerance (ppb ^c)", "EU/CODEX MRL ^d (\xC2\xB5g/kg)", "Specimen",
    "Flavor"};

}  // namespace

TEST(Fieldmap, RegexGuardCriterion) {
    auto out = criteria::regex_guards();
    for (const auto& f : out.failures) ADD_FAILURE() << f;
}

TEST(Fieldmap, HeaderMappingCriterion) {
    auto out = criteria::header_mapping();
    for (const auto& f : out.failures) ADD_FAILURE() << f;
}

TEST(Fieldmap, KeywordScanFigureHeading) {
    auto m = fieldmap::keyword_scan("Sensitivity in Milk (ppb)", kw(), KeywordCategory::matrix);
    ASSERT_EQ(m.size(), 1u);
    EXPECT_EQ(m[0].matched, "Milk");
    auto u = fieldmap::keyword_scan("Sensitivity in Milk (ppb)", kw(), KeywordCategory::unit);
    ASSERT_EQ(u.size(), 1u);
    EXPECT_EQ(u[0].keyword, "ppb");
}

TEST(Fieldmap, KeywordScanOrdersByPosition) {
    auto hits = fieldmap::keyword_scan("honey, then milk, then sera and milk", kw(), KeywordCategory::matrix);
    ASSERT_EQ(hits.size(), 4u);
    for (std::size_t i = 1; i < hits.size(); ++i) EXPECT_LT(hits[i - 1].position, hits[i].position);
    EXPECT_EQ(hits[2].matched, "sera");
}

TEST(Fieldmap, StringEdgesCountAsNonWord) {
    fieldmap::GuardedPattern p("milk");
    EXPECT_EQ(p.find_all("milk").size(), 1u);
    EXPECT_EQ(p.find_all("milk milk").size(), 2u);
    EXPECT_TRUE(p.find_all("buttermilk").empty());
}

TEST(Fieldmap, SpecExamples) {
    EXPECT_EQ(fieldmap::map_header("Antimicrobial Drug", syn()), Field::Drug);
    EXPECT_EQ(fieldmap::map_header("Specimen", syn()), Field::Matrix);
    EXPECT_EQ(fieldmap::map_header("US Safe Level/ Tolerance (ppb)", syn()), Field::Tolerance);
    EXPECT_EQ(fieldmap::map_header("EU/CODEX MRL (\xC2\xB5g/kg)", syn()), Field::MRL);
    EXPECT_EQ(fieldmap::map_header("Flavor", syn()), std::nullopt);
}

TEST(Fieldmap, LongerMatchShadowsShorterOfOtherField) {
    // "Test" alone is the Test field, inside "Test Sensitivity" it is not.
    EXPECT_EQ(fieldmap::map_header("Test Sensitivity", syn()), Field::Sensitivity);
}

TEST(Fieldmap, AmbiguityIsAnError) {
    try {
        fieldmap::map_header("Test Matrix", syn());
        FAIL() << "no ambiguity raised";
    } catch (const fieldmap::AmbiguousHeader& e) {
        EXPECT_EQ(e.first(), Field::Test);
        EXPECT_EQ(e.second(), Field::Matrix);
    }
}

TEST(Fieldmap, CaseInsensitiveOnFixtureHeaders) {
    for (const auto& h : kFixtureHeaders) {
        EXPECT_EQ(fieldmap::map_header(h, syn()), fieldmap::map_header(text::to_upper(h), syn())) << h;
    }
}

TEST(Fieldmap, DictionaryRoundTrip) {
    auto syn2 = fieldmap::HeaderSynonymTable::parse(syn().serialize());
    auto kw2 = fieldmap::KeywordDictionary::parse(kw().serialize());
    EXPECT_EQ(syn2.serialize(), syn().serialize());
    for (const auto& h : kFixtureHeaders) EXPECT_EQ(fieldmap::map_header(h, syn2), fieldmap::map_header(h, syn())) << h;
    for (auto cat : {KeywordCategory::matrix, KeywordCategory::field, KeywordCategory::unit}) {
        for (const auto& h : kFixtureHeaders) {
            EXPECT_EQ(fieldmap::keyword_scan(h, kw2, cat), fieldmap::keyword_scan(h, kw(), cat)) << h;
        }
    }
}

TEST(Fieldmap, ParseRejectsUnknownFieldAndBadRegex) {
    EXPECT_THROW(fieldmap::HeaderSynonymTable::parse("Flavor\tTaste\n"), ValidationError);
    EXPECT_THROW(fieldmap::HeaderSynonymTable::parse("Drug\t(unclosed\n"), ValidationError);
    EXPECT_THROW(fieldmap::KeywordDictionary::parse("colour\tred\n"), ValidationError);
}

TEST(Fieldmap, SchemaFigure4) {
    auto t = RawTable::from_rows({{"Beta-lactam Drug", "Charm 3 SL3 Sensitivity (ppb)", "Safe Level/Tolerance (ppb)"},
                                  {"Amoxicillin", "8.4 ppb", "10 ppb"}});
    t.header_row_index = 0;
    auto s = fieldmap::map_table_schema(t, syn());
    EXPECT_EQ(s.columns, (std::map<std::size_t, Field>{{0, Field::Drug}, {1, Field::Sensitivity}, {2, Field::Tolerance}}));
    EXPECT_TRUE(s.relevant);
}

TEST(Fieldmap, SchemaFigure6) {
    auto t = RawTable::from_rows({{"Beta-lactam Drug", "Detection Range (ppb)", "EU/CODEX MRL (ppb)"}});
    t.header_row_index = 0;
    auto s = fieldmap::map_table_schema(t, syn());
    EXPECT_EQ(s.columns, (std::map<std::size_t, Field>{{0, Field::Drug}, {1, Field::Sensitivity}, {2, Field::MRL}}));
}

TEST(Fieldmap, SchemaWithoutDrugIsIrrelevant) {
    auto t = RawTable::from_rows({{"Flavor", "Sensitivity"}, {"x", "1"}});
    t.header_row_index = 0;
    EXPECT_FALSE(fieldmap::map_table_schema(t, syn()).relevant);
}

TEST(Fieldmap, SchemaErrors) {
    auto t = RawTable::from_rows({{"Drug", "Antimicrobial drug", "Sensitivity"}});
    t.header_row_index = 0;
    EXPECT_THROW(fieldmap::map_table_schema(t, syn()), StructuralError);
    t.header_row_index.reset();
    EXPECT_THROW(fieldmap::map_table_schema(t, syn()), ValidationError);
}

TEST(Fieldmap, DetectHeaderRow) {
    auto t = RawTable::from_rows({{"Sensitivity and Selectivity", "", ""},
                                  {"Antimicrobial Drug", "Concentration (ppb)", "Tolerance"},
                                  {"Amoxicillin", "3 to 4", "10"}});
    EXPECT_EQ(fieldmap::detect_header_row(t, syn(), 5), 1u);
    EXPECT_EQ(fieldmap::detect_header_row(t, syn(), 1), std::nullopt);
    auto data = RawTable::from_rows({{"Amoxicillin", "3 to 4"}, {"Ampicillin", "3 to 4"}});
    EXPECT_EQ(fieldmap::detect_header_row(data, syn(), 5), std::nullopt);
}

TEST(Fieldmap, LintOnShippedDictionaryIsClean) {
    EXPECT_TRUE(fieldmap::lint(syn(), kFixtureHeaders).empty());
}

TEST(Fieldmap, LintFindsDuplicateVariantAcrossFields) {
    auto dict = syn().serialize();
    auto pos = dict.find("MRL\t");
    dict.insert(dict.find('\n', pos), "\tSafe level");
    auto issues = fieldmap::lint(fieldmap::HeaderSynonymTable::parse(dict));
    EXPECT_FALSE(issues.empty());
}
