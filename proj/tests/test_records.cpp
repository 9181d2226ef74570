#include <gtest/gtest.h>

#include <random>

#include "criteria.hpp"
#include "harvest/records.hpp"
#include "harvest/text.hpp"
#include "testkit.hpp"

using namespace harvest;
using records::AssayRecord;
using records::ReferenceLimit;
using records::Unit;

namespace {

AssayRecord sample(std::string drug, double sens) {
    AssayRecord r;
    r.drug = std::move(drug);
    r.sensitivity = records::parse_sensitivity(text::format_number(sens) + " ppb", std::nullopt);
    r.matrix = "Milk";
    r.test = "Charm SL";
    r.source_url = "https://example.org/a.pdf";
    return r;
}

records::DocumentContext ctx() {
    records::DocumentContext c;
    c.test = "Charm 3 SL3";
    c.matrix = "Milk";
    c.source_url = "https://example.org/fig.pdf";
    return c;
}

}  // namespace

TEST(Records, SensitivityCriterion) {
    auto out = criteria::sensitivity_parsing();
    for (const auto& f : out.failures) ADD_FAILURE() << f;
}

TEST(Records, ReferenceForms) {
    auto none = records::parse_reference("None", Unit::ppb);
    EXPECT_TRUE(none.none_stated);
    EXPECT_EQ(records::format_reference(none), "None");
    auto pair = records::parse_reference("100 / 200", Unit::ppb);
    EXPECT_EQ(pair.value, 100);
    EXPECT_EQ(pair.secondary, 200);
    EXPECT_EQ(records::format_reference(pair), "100/200 ppb");
    EXPECT_EQ(records::parse_reference(records::format_reference(pair), std::nullopt), pair);
    auto ppm = records::parse_reference("0.1 ppm", Unit::ppb);
    EXPECT_EQ(ppm.value_ppb(), 100);
    EXPECT_THROW(records::parse_reference("10", std::nullopt), records::ValueError);
}

TEST(Records, UnitHintFromHeading) {
    EXPECT_EQ(records::unit_hint("Detection level (ppb)"), Unit::ppb);
    EXPECT_EQ(records::unit_hint("EU/CODEX MRL ^d (\xC2\xB5g/kg)"), Unit::ppb);
    EXPECT_EQ(records::unit_hint("Tolerance (ppm)"), Unit::ppm);
    EXPECT_EQ(records::unit_hint("Sensitivity"), std::nullopt);
}

TEST(Records, CsvRoundTripKeepsEveryField) {
    auto a = sample("Amoxicillin", 8.4);
    a.type = canon::MethodType::Sequential;
    a.tolerance = records::parse_reference("10 ppb", std::nullopt);
    a.mrl = records::parse_reference("4 / 8 ppb", std::nullopt);
    a.species = "Cattle";
    a.manufacturer = "Charm Sciences";
    auto b = sample("Drug, with \"comma\"", 3);
    b.sensitivity = records::parse_sensitivity("2 to 4 ppm", std::nullopt);
    std::vector<AssayRecord> recs{a, b};
    auto csv = records::write_csv(recs);
    EXPECT_EQ(records::read_csv(csv), recs);
    EXPECT_EQ(records::write_csv(records::read_csv(csv)), csv);
}

TEST(Records, CsvRejectsBadRowsWithLine) {
    auto good = records::write_csv({sample("Amoxicillin", 8)});
    try {
        records::read_csv(good + "Ampicillin,,Milk,Charm SL,,,,,,https://x\n");
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    EXPECT_THROW(records::read_csv(good + "Ampicillin,3 ppb,Milk,Charm SL,Fast,,,,,https://x\n"), ValidationError);
    EXPECT_THROW(records::read_csv("Drug,Sensitivity\n"), ValidationError);
    EXPECT_THROW(records::read_csv(""), ValidationError);
}

TEST(Records, ToleranceAnnotationAndConflict) {
    auto tol = records::ToleranceTable::load(testkit::config_dir() / "tolerances.sample.tsv");
    auto r = sample("Amoxicillin", 8.4);
    r.species = "Cattle";
    auto plain = records::annotate_tolerance(r, tol);
    EXPECT_FALSE(plain.conflict);
    ASSERT_TRUE(plain.record.tolerance);
    EXPECT_EQ(plain.record.tolerance->value, 10);
    EXPECT_EQ(records::below_tolerance(plain.record), true);

    r.tolerance = records::parse_reference("12 ppb", std::nullopt);
    auto clash = records::annotate_tolerance(r, tol);
    ASSERT_TRUE(clash.conflict);
    EXPECT_EQ(clash.conflict->table_value.value, 12);
    EXPECT_EQ(clash.conflict->curated_value.value, 10);
    EXPECT_EQ(clash.record.tolerance->value, 10);

    auto other = sample("Amoxicillin", 8.4);
    other.species = "Goat";
    EXPECT_FALSE(records::annotate_tolerance(other, tol).record.tolerance);
}

TEST(Records, ToleranceLookupSpecificityAndTies) {
    auto tol = records::ToleranceTable::parse("X\t\t\t1\tppb\ta\nX\tCattle\t\t2\tppb\tb\nY\tCattle\t\t1\tppb\tc\n"
                                              "Y\t\tMilk\t2\tppb\td\n");
    EXPECT_EQ(tol.lookup("X", "Cattle", "Milk")->citation, "b");
    EXPECT_EQ(tol.lookup("x", "Goat", "Milk")->citation, "a");
    EXPECT_EQ(tol.lookup("Y", "Cattle", "Milk"), nullptr);
    EXPECT_THROW(records::ToleranceTable::parse("X\t\t\t1\tppb\na\nX\t\t\t2\tppb\n"), ValidationError);
    EXPECT_THROW(records::ToleranceTable::parse("X\t\t\t1\tkg\n"), ValidationError);
}

TEST(Records, BuildConservesRows) {
    auto t = RawTable::from_rows({{"Drug", "Sensitivity (ppb)", "Tolerance (ppb)"},
                                  {"Amoxicillin", "8.4", "10"},
                                  {"Sequential, Ampicillin", "2 to 3", "None"},
                                  {"", "5", ""},
                                  {"Cloxacillin", "n/a", ""},
                                  {"Frobnicillin", "4", "bogus"}});
    t.header_row_index = 0;
    auto schema = fieldmap::map_table_schema(t, testkit::config().fields);
    auto res = records::build_records(t, schema, ctx(), testkit::config().lex);
    EXPECT_EQ(res.records.size() + res.skipped.size(), t.rows() - 1);
    ASSERT_EQ(res.records.size(), 3u);
    EXPECT_EQ(res.records[1].type, canon::MethodType::Sequential);
    EXPECT_EQ(res.records[1].drug, "Ampicillin");
    EXPECT_TRUE(res.records[1].tolerance->none_stated);
    EXPECT_FALSE(res.records[2].tolerance);
    EXPECT_EQ(res.warnings.size(), 1u);
    EXPECT_EQ(res.unknown_names, (std::vector<records::UnknownName>{{canon::NameKind::drug, "Frobnicillin"}}));
    for (const auto& r : res.records) EXPECT_EQ(r.source_url, "https://example.org/fig.pdf");
}

TEST(Records, BuildOnHeaderOnlyTableIsEmpty) {
    auto t = RawTable::from_rows({{"Drug", "Sensitivity (ppb)"}});
    t.header_row_index = 0;
    auto schema = fieldmap::map_table_schema(t, testkit::config().fields);
    auto res = records::build_records(t, schema, ctx(), testkit::config().lex);
    EXPECT_TRUE(res.records.empty());
    EXPECT_TRUE(res.skipped.empty());
}

TEST(Records, BuildRejectsIrrelevantSchema) {
    auto t = RawTable::from_rows({{"Flavor", "Colour"}, {"a", "b"}});
    t.header_row_index = 0;
    auto schema = fieldmap::map_table_schema(t, testkit::config().fields);
    EXPECT_THROW(records::build_records(t, schema, ctx(), testkit::config().lex), ValidationError);
}

TEST(Records, SameValueAcrossUnits) {
    auto a = records::parse_sensitivity("0.1 ppm", std::nullopt);
    auto b = records::parse_sensitivity("100 ppb", std::nullopt);
    EXPECT_TRUE(records::same_value(a, b));
    EXPECT_FALSE(a == b);
}

TEST(Records, RandomScalarsRoundTripThroughText) {
    std::mt19937 rng(11);
    std::uniform_int_distribution<int> num(1, 99999);
    for (int i = 0; i < 500; ++i) {
        double lo = num(rng) / 100.0;
        double hi = lo + num(rng) % 50;
        records::SensitivityValue v{lo, hi, i % 3 ? Unit::ppb : Unit::ppm, ""};
        EXPECT_EQ(records::parse_sensitivity(records::format_sensitivity(v), std::nullopt), v);
    }
}
