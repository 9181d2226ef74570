#include <gtest/gtest.h>

#include "criteria.hpp"
#include "harvest/consolidate.hpp"
#include "harvest/text.hpp"
#include "testkit.hpp"

using namespace harvest;
using consolidate::Action;
using records::AssayRecord;

namespace {

Timestamp at(long s) { return Timestamp(std::chrono::seconds(1590969600 + s)); }

AssayRecord rec(const std::string& drug, const std::string& sens, const std::string& test = "Charm 3 SL3") {
    AssayRecord r;
    r.drug = drug;
    r.sensitivity = records::parse_sensitivity(sens, std::nullopt);
    r.matrix = "Milk";
    r.test = test;
    r.source_url = "https://example.org/" + drug + ".pdf";
    return r;
}

}  // namespace

TEST(Consolidate, MergeCriterion) {
    auto out = criteria::merge_properties();
    for (const auto& f : out.failures) ADD_FAILURE() << f;
}

TEST(Consolidate, InsertUpdateUnchanged) {
    consolidate::MasterDataset ds;
    auto first = consolidate::merge_into(ds, {rec("Amoxicillin", "8.0 ppb")}, at(0));
    ASSERT_EQ(first.size(), 1u);
    EXPECT_EQ(first[0].action, Action::inserted);

    auto second = consolidate::merge_into(ds, {rec("Amoxicillin", "8.4 ppb")}, at(1));
    ASSERT_EQ(second.size(), 1u);
    EXPECT_EQ(second[0].action, Action::updated);
    EXPECT_EQ(second[0].old_sensitivity->low, 8.0);
    EXPECT_EQ(second[0].new_sensitivity->low, 8.4);
    EXPECT_EQ(ds.find(rec("Amoxicillin", "1 ppb").key())->sensitivity.low, 8.4);

    auto third = consolidate::merge_into(ds, {rec("Amoxicillin", "0.0084 ppm")}, at(2));
    EXPECT_EQ(third[0].action, Action::unchanged);
    EXPECT_EQ(ds.history.size(), 2u);
}

TEST(Consolidate, RepeatedKeyInBatchKeepsLast) {
    consolidate::MasterDataset ds;
    auto out = consolidate::merge_into(ds, {rec("Amoxicillin", "3 ppb"), rec("Amoxicillin", "4 ppb")}, at(0));
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(ds.size(), 1u);
    EXPECT_EQ(ds.records.begin()->second.sensitivity.low, 4);
}

TEST(Consolidate, InvalidBatchLeavesDatasetAlone) {
    consolidate::MasterDataset ds;
    consolidate::merge_into(ds, {rec("Amoxicillin", "3 ppb")}, at(0));
    auto before = ds;
    auto bad = rec("Ampicillin", "2 ppb");
    bad.matrix.clear();
    EXPECT_THROW(consolidate::merge_into(ds, {rec("Cloxacillin", "10 ppb"), bad}, at(1)), ValidationError);
    EXPECT_EQ(ds, before);
}

TEST(Consolidate, TypeSeparatesKeys) {
    consolidate::MasterDataset ds;
    auto a = rec("Amoxicillin", "3 ppb");
    auto b = a;
    b.type = canon::MethodType::Sequential;
    consolidate::merge_into(ds, {a, b}, at(0));
    EXPECT_EQ(ds.size(), 2u);
}

TEST(Consolidate, ExportIsSortedByKey) {
    consolidate::MasterDataset ds;
    consolidate::merge_into(ds, {rec("Penicillin G", "2 ppb"), rec("Amoxicillin", "3 ppb"), rec("Amoxicillin", "5 ppb", "Charm II")},
                            at(0));
    auto lines = text::split(consolidate::export_csv(ds), '\n');
    ASSERT_GE(lines.size(), 4u);
    EXPECT_EQ(lines[0], "Drug,Sensitivity,Matrix,Test,Type,Tolerance,MRL,Species,Manufacturer,URL");
    // Same drug: ordered by test name, byte-wise.
    EXPECT_EQ(lines[1].substr(0, 17), "Amoxicillin,3 ppb");
    EXPECT_NE(lines[1].find("Charm 3 SL3"), std::string::npos);
    EXPECT_NE(lines[2].find("Charm II"), std::string::npos);
    EXPECT_EQ(lines[3].substr(0, 12), "Penicillin G");
}

TEST(Consolidate, DuplicateKeyLineRejected) {
    consolidate::MasterDataset ds;
    consolidate::merge_into(ds, {rec("Amoxicillin", "3 ppb")}, at(0));
    auto csv = consolidate::export_csv(ds);
    auto line = text::split(csv, '\n')[1];
    try {
        consolidate::load_csv(csv + line + "\n");
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(Consolidate, WithdrawAndHistoryRoundTrip) {
    testkit::TempDir dir;
    consolidate::MasterDataset ds;
    consolidate::merge_into(ds, {rec("Amoxicillin", "3 ppb"), rec("Ampicillin", "2 ppb")}, at(0));
    EXPECT_TRUE(consolidate::withdraw(ds, rec("Ampicillin", "1 ppb").key(), at(5), "sheet retracted"));
    EXPECT_FALSE(consolidate::withdraw(ds, rec("Ampicillin", "1 ppb").key(), at(6), "again"));
    EXPECT_EQ(ds.size(), 1u);
    EXPECT_EQ(ds.history.back().action, Action::withdrawn);

    auto csv = dir / "master.csv";
    consolidate::save(ds, csv, consolidate::default_history_path(csv));
    auto loaded = consolidate::load(csv, consolidate::default_history_path(csv));
    EXPECT_EQ(loaded, ds);
    EXPECT_EQ(consolidate::export_history(loaded), consolidate::export_history(ds));
}

TEST(Consolidate, ActionNamesRoundTrip) {
    for (auto a : {Action::inserted, Action::updated, Action::unchanged, Action::withdrawn}) {
        EXPECT_EQ(consolidate::action_from_string(consolidate::to_string(a)), a);
    }
    EXPECT_EQ(consolidate::action_from_string("deleted"), std::nullopt);
}
