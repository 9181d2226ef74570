#include <gtest/gtest.h>

#include <httplib.h>
#include <json.hpp>

#include "criteria.hpp"
#include "harvest/consolidate.hpp"
#include "harvest/queryapi.hpp"
#include "testkit.hpp"

using namespace harvest;
using nlohmann::json;
using Params = std::multimap<std::string, std::string>;

namespace {

Timestamp at0() { return Timestamp(std::chrono::seconds(1590969600)); }

std::filesystem::path write_master(const testkit::TempDir& dir) {
    consolidate::MasterDataset ds;
    auto recs = testkit::fixture_dataset();
    for (auto& r : recs) {
        if (r.drug == "Amoxicillin") r.species = "Cattle";
    }
    consolidate::merge_into(ds, recs, at0());
    auto path = dir / "master.csv";
    consolidate::save(ds, path, std::nullopt);
    return path;
}

}  // namespace

TEST(QueryApi, ServiceCriterion) {
    auto out = criteria::query_service();
    for (const auto& f : out.failures) ADD_FAILURE() << f;
}

TEST(QueryApi, ParseFilter) {
    auto f = queryapi::parse_filter({{"drug", " amox "}, {"limit", "5"}, {"below_tolerance_only", "TRUE"}});
    EXPECT_EQ(f.drug, "amox");
    EXPECT_EQ(f.limit, 5u);
    EXPECT_EQ(f.below_tolerance_only, true);
    EXPECT_EQ(queryapi::parse_filter({}), queryapi::QueryFilter{});
}

TEST(QueryApi, ParseFilterErrorsNameTheField) {
    const std::vector<std::pair<Params, std::string>> cases = {
        {{{"colour", "red"}}, "colour"},
        {{{"drug", "a"}, {"drug", "b"}}, "drug"},
        {{{"matrix", "  "}}, "matrix"},
        {{{"limit", "-1"}}, "limit"},
        {{{"limit", "10001"}}, "limit"},
        {{{"offset", "1x"}}, "offset"},
        {{{"below_tolerance_only", "maybe"}}, "below_tolerance_only"},
    };
    for (const auto& [params, field] : cases) {
        try {
            queryapi::parse_filter(params);
            ADD_FAILURE() << field;
        } catch (const queryapi::InvalidParameter& e) {
            EXPECT_EQ(e.field(), field);
        }
    }
}

TEST(QueryApi, HandleRoutes) {
    testkit::TempDir dir;
    queryapi::QueryService svc(write_master(dir), testkit::config().lex.drugs.groups());

    auto bad = svc.handle("/records", {{"limit", "abc"}});
    EXPECT_EQ(bad.status, 400);
    EXPECT_EQ(json::parse(bad.body)["field"], "limit");

    auto res = svc.handle("/records", {{"drug", "amoxicillin"}, {"species", "cat"}});
    ASSERT_EQ(res.status, 200);
    auto body = json::parse(res.body);
    EXPECT_GT(body["total"].get<std::size_t>(), 0u);
    for (const auto& row : body["rows"]) {
        EXPECT_EQ(row["drug"], "Amoxicillin");
        EXPECT_EQ(row["species"], "Cattle");
    }
    EXPECT_EQ(body["applied_filters"]["drug"], "amoxicillin");

    auto csv = svc.handle("/records.csv", {{"drug", "amoxicillin"}});
    EXPECT_EQ(csv.content_type.rfind("text/csv", 0), 0u);

    auto dict = json::parse(svc.handle("/dictionaries", {}).body);
    auto drugs = dict["drugs"].get<std::vector<std::string>>();
    EXPECT_TRUE(std::is_sorted(drugs.begin(), drugs.end()));
    EXPECT_NE(std::find(drugs.begin(), drugs.end(), "Penicillin G"), drugs.end());
    EXPECT_NE(std::find(drugs.begin(), drugs.end(), "Tylosin"), drugs.end());

    EXPECT_EQ(json::parse(svc.handle("/health", {}).body)["status"], "ok");
    EXPECT_EQ(svc.handle("/nowhere", {}).status, 404);
    EXPECT_EQ(svc.handle("/health", {{"x", "1"}}).status, 400);
}

TEST(QueryApi, Pagination) {
    testkit::TempDir dir;
    queryapi::QueryService svc(write_master(dir));
    auto snap = svc.snapshot();
    queryapi::QueryFilter all;
    all.limit = queryapi::kMaxLimit;
    auto everything = queryapi::run_query(*snap, all);
    std::vector<const records::AssayRecord*> paged;
    for (std::size_t off = 0; off < everything.total; off += 7) {
        queryapi::QueryFilter f;
        f.limit = 7;
        f.offset = off;
        auto page = queryapi::run_query(*snap, f);
        EXPECT_EQ(page.total, everything.total);
        for (const auto& r : page.rows) paged.push_back(r.record);
    }
    ASSERT_EQ(paged.size(), everything.rows.size());
    for (std::size_t i = 0; i < paged.size(); ++i) EXPECT_EQ(paged[i], everything.rows[i].record);
}

TEST(QueryApi, ParseBind) {
    EXPECT_EQ(queryapi::parse_bind("0.0.0.0:9000"), (std::pair<std::string, int>{"0.0.0.0", 9000}));
    EXPECT_EQ(queryapi::parse_bind(":81"), (std::pair<std::string, int>{"127.0.0.1", 81}));
    EXPECT_EQ(queryapi::parse_bind("8080"), (std::pair<std::string, int>{"127.0.0.1", 8080}));
    EXPECT_THROW(queryapi::parse_bind("host:port"), ValidationError);
    EXPECT_THROW(queryapi::parse_bind("70000"), ValidationError);
}

TEST(QueryApi, LiveHttp) {
    testkit::TempDir dir;
    queryapi::QueryService svc(write_master(dir));
    queryapi::ServeOptions opts;
    opts.poll_ms = 0;
    queryapi::Server server(svc, opts);
    int port = server.start_background();
    ASSERT_GT(port, 0);
    httplib::Client cli("127.0.0.1", port);
    auto res = cli.Get("/records?drug=penicillin&limit=2");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    auto body = json::parse(res->body);
    EXPECT_LE(body["rows"].size(), 2u);
    EXPECT_GT(body["total"].get<std::size_t>(), 0u);
    auto bad = cli.Get("/records?limit=x");
    ASSERT_TRUE(bad);
    EXPECT_EQ(bad->status, 400);
    server.stop();
}
