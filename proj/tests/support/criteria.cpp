#include "criteria.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <random>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "harvest/canon.hpp"
#include "harvest/consolidate.hpp"
#include "harvest/csv.hpp"
#include "harvest/fieldmap.hpp"
#include "harvest/pdftab.hpp"
#include "harvest/queryapi.hpp"
#include "harvest/records.hpp"
#include "harvest/text.hpp"
#include "testkit.hpp"

namespace criteria {

using namespace harvest;
using records::AssayRecord;

namespace {

// Collects failures without aborting the check on the first one.
struct Checker {
    Outcome out;

    void expect(bool cond, const std::string& what) {
        if (!cond) out.failures.push_back(what);
    }

    template <typename Fn>
    void guard(const std::string& what, Fn&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            out.failures.push_back(fmt::format("{}: unexpected exception: {}", what, e.what()));
        }
    }
};

bool has_row(const std::vector<AssayRecord>& recs, const std::string& drug, const std::string& sens) {
    auto want = records::format_sensitivity(records::parse_sensitivity(sens, records::Unit::ppb));
    return std::any_of(recs.begin(), recs.end(), [&](const AssayRecord& r) {
        return r.drug == drug && records::format_sensitivity(r.sensitivity) == want;
    });
}

}  // namespace

Outcome figure_goldens() {
    Checker c;
    auto start = std::chrono::steady_clock::now();
    std::vector<std::string> counts;
    for (const auto* name : {"fig4", "fig5", "fig6"}) {
        c.guard(name, [&] {
            const auto& fig = testkit::figure(name);
            auto t = testkit::extract_figure(fig);
            auto recs = pipeline::build(t, testkit::config()).records;
            auto diff = testkit::compare_golden(recs, testkit::load_golden(name));
            c.expect(diff.empty(), fmt::format("{} differs from golden:\n{}", name, testkit::describe(diff)));
            c.expect(t.gaps.empty(), fmt::format("{}: {} unexpected gap(s)", name, t.gaps.size()));
            counts.push_back(fmt::format("{}={}", name, recs.size()));
            auto built = pipeline::build(t, testkit::config());
            c.expect(built.records.size() + built.skipped.size() + t.class_rows_dropped == t.data_rows_in,
                     fmt::format("{}: row count not conserved", name));
            bool title_left = std::any_of(t.table.cells.begin(), t.table.cells.end(),
                                          [](const auto& row) { return row[0] == "Tetracycline Drug"; });
            c.expect(!title_left, fmt::format("{}: class-title row survived cleaning", name));
        });
    }
    c.guard("fig6 tetracycline gap", [&] {
        const auto& fig = testkit::figure("fig6");
        auto page = testkit::figure_spans(fig);
        SourceRef ref{fig.url, SourceKind::pdf, std::nullopt, fig.name};
        auto t = pipeline::extract_pdf_page(page, testkit::without_row(page, "Tetracycline"), ref, testkit::config(),
                                            "fig6-p1");
        bool one = t.gaps.size() == 1 && t.gaps[0].missing_terms == std::vector<std::string>{"Tetracycline"};
        c.expect(one, "fig6 without the Tetracycline row: expected one gap naming Tetracycline");
        auto n = pipeline::build(t, testkit::config()).records.size();
        c.expect(n == 15, fmt::format("fig6 without the Tetracycline row: {} records, expected 15", n));
    });
    c.guard("fig7", [&] {
        auto recs = testkit::figure_records(testkit::figure("fig7"));
        auto diff = testkit::compare_golden(recs, testkit::load_golden("fig7"));
        c.expect(diff.missing.empty(), "fig7 golden rows missing:\n" + testkit::describe(diff));
        c.expect(recs.size() >= 32, fmt::format("fig7: {} records, expected >= 32", recs.size()));
        c.expect(has_row(recs, "Amoxicillin", "3 to 4"), "fig7: left-block Amoxicillin 3 to 4 missing");
        c.expect(has_row(recs, "Gentamicin", "75 to 150"), "fig7: right-block Gentamicin 75 to 150 missing");
        counts.push_back(fmt::format("fig7={}", recs.size()));
    });
    c.guard("fig2", [&] {
        SourceDocument doc;
        doc.ref = SourceRef{"https://www.idexx.com/en/milk/snap-nbl-test/", SourceKind::html, std::nullopt, ""};
        doc.bytes = testkit::slurp(testkit::fixture("html/snap_nbl.html"));
        auto tables = pipeline::extract_html(doc, testkit::config());
        c.expect(tables.size() == 1, fmt::format("fig2: {} tables", tables.size()));
        std::set<std::string> drugs;
        for (const auto& t : tables) {
            for (const auto& r : pipeline::build(t, testkit::config()).records) {
                drugs.insert(r.drug);
                c.expect(r.test == "SNAP NBL" && r.matrix == "Milk" && r.source_url == doc.ref.url,
                         fmt::format("fig2: record {} has test '{}' matrix '{}'", r.drug, r.test, r.matrix));
            }
        }
        std::set<std::string> want{"Amoxicillin", "Ampicillin", "Cephapirin", "Ceftiofur", "Cloxacillin", "Penicillin G"};
        c.expect(drugs == want, "fig2: drug set differs");
        counts.push_back(fmt::format("fig2={}", drugs.size()));
    });
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.expect(secs < 5.0, fmt::format("runtime {:.2f}s exceeds 5s", secs));
    c.out.summary = fmt::format("{} in {:.3f}s", text::join(counts, ", "), secs);
    return c.out;
}

Outcome gap_audit() {
    Checker c;
    c.guard("fig5", [&] {
        const auto& cfg = testkit::config();
        const auto& fig = testkit::figure("fig5");
        auto page = testkit::figure_spans(fig);
        SourceRef ref{fig.url, SourceKind::pdf, std::nullopt, fig.name};
        auto t = pipeline::extract_pdf_page(page, testkit::without_row(page, "Penicillin G"), ref, cfg, "fig5-p1");
        c.expect(t.status == pipeline::TableStatus::ok, "fig5 truncated: table status not ok");
        bool one = t.gaps.size() == 1 && t.gaps[0].missing_terms == std::vector<std::string>{"Penicillin G"};
        c.expect(one, fmt::format("fig5 truncated: expected exactly one gap naming Penicillin G, got {}", t.gaps.size()));
        if (!one || !t.grid) return;
        auto terms = text::join(t.gaps[0].missing_terms, ", ");
        auto row = pdftab::propose_repair(t.table, *t.grid, t.gaps[0]);
        t.table = pdftab::apply_repair(t.table, row);
        t.gaps.clear();
        pipeline::refresh_schema(t, cfg);
        bool filled = std::any_of(t.table.cells.begin(), t.table.cells.end(),
                                  [](const auto& r) { return r[0] == "Penicillin G"; });
        c.expect(filled, "fig5 repaired: Penicillin G row not in the table");
        // The repaired fixture: the same page with the row handed to the reconstructor.
        auto regaps = pipeline::extract_pdf_page(page, ref, cfg, "fig5-p1").gaps;
        std::vector<std::string> left;
        for (const auto& g : regaps) left.push_back(text::join(g.missing_terms, "+"));
        c.expect(regaps.empty(), fmt::format("fig5 repaired: gap(s) remain: {}", text::join(left, ", ")));
        auto recs = pipeline::build(t, cfg).records;
        c.expect(recs.size() == 6, fmt::format("fig5 repaired: {} records, expected 6", recs.size()));
        auto diff = testkit::compare_golden(recs, testkit::load_golden("fig5"));
        c.expect(diff.empty(), "fig5 repaired differs from golden:\n" + testkit::describe(diff));
        c.out.summary = fmt::format("gap [{}], proposed row [{}], {} gaps and {} records after repair", terms,
                                    text::join(row, " | "), regaps.size(), recs.size());
    });
    return c.out;
}

Outcome regex_guards() {
    Checker c;
    const auto& kw = testkit::config().keywords;
    using fieldmap::KeywordCategory;
    c.expect(kw.matrix_keywords.size() == 8 && kw.field_keywords.size() == 9 && kw.unit_keywords.size() == 2,
             "keyword dictionary does not hold the 8/9/2 keyword ensembles");
    const std::vector<std::pair<std::string, std::string>> embed = {
        {"a", "b"}, {"x1", "_"}, {"9", "z"}, {"inter", "d"}, {"_", "s"}, {"P", "es"}};
    const std::vector<std::pair<std::string, std::string>> delimit = {
        {"", ""}, {" ", " "}, {"(", ")"}, {"\n", "."}, {"-", ","}, {"/", "/"}, {"in ", " samples"}};
    std::size_t cases = 0;
    for (auto cat : {KeywordCategory::matrix, KeywordCategory::field, KeywordCategory::unit}) {
        for (const auto& p : kw.of(cat)) {
            for (const auto& sample : p.samples()) {
                for (const auto& variant : {sample, text::to_upper(sample)}) {
                    for (const auto& [w1, w2] : embed) {
                        auto s = w1 + variant + w2;
                        ++cases;
                        c.expect(p.find_all(s).empty(), fmt::format("'{}' matched inside '{}'", p.source(), s));
                    }
                    for (const auto& [d1, d2] : delimit) {
                        auto s = d1 + variant + d2;
                        ++cases;
                        auto hits = fieldmap::keyword_scan(s, kw, cat);
                        auto own = std::count_if(hits.begin(), hits.end(),
                                                 [&](const fieldmap::KeywordHit& h) { return h.keyword == p.source(); });
                        c.expect(own == 1 && p.find_all(s).size() == 1,
                                 fmt::format("'{}' matched {} times in '{}'", p.source(), own, s));
                    }
                }
            }
        }
    }
    auto matrix_hits = [&](const std::string& s) { return fieldmap::keyword_scan(s, kw, KeywordCategory::matrix); };
    c.expect(matrix_hits("purines").empty(), "'purines' yields a matrix hit");
    c.expect(matrix_hits("intertissued").empty(), "'intertissued' yields a matrix hit");
    auto pu = matrix_hits("purines in urine samples");
    c.expect(pu.size() == 1 && pu[0].matched == "urine" && pu[0].position == 11,
             "'purines in urine samples' should yield one urine hit at 11");
    auto ti = matrix_hits("intertissued tissue");
    c.expect(ti.size() == 1 && ti[0].position == 13, "'intertissued tissue' should yield one tissue hit at 13");
    cases += 4;
    c.out.summary = fmt::format("{} cases", cases);
    return c.out;
}

Outcome header_mapping() {
    Checker c;
    using fieldmap::Field;
    const auto& syn = testkit::config().fields;
    // Plain realizations of every dictionary variant.
    const std::vector<std::pair<std::string, Field>> variants = {
        {"Active ingredient", Field::Drug},
        {"Active ingredients", Field::Drug},
        {"Activeingredient", Field::Drug},
        {"Residues detected", Field::Drug},
        {"Detected residues", Field::Drug},
        {"Antimicrobial drug", Field::Drug},
        {"Antimicrobial-drug", Field::Drug},
        {"Antimicrobial agent", Field::Drug},
        {"Antimicrobial agents", Field::Drug},
        {"Beta lactam drug", Field::Drug},
        {"Beta-lactam drugs", Field::Drug},
        {"Beta lactams", Field::Drug},
        {"Tetracycline", Field::Drug},
        {"Tetracyclines", Field::Drug},
        {"Quinolone drug", Field::Drug},
        {"Quinolone drugs", Field::Drug},
        {"Concentration for positive ppb", Field::Sensitivity},
        {"Charm SL", Field::Sensitivity},
        {"Charm-SL", Field::Sensitivity},
        {"Test Sensitivity", Field::Sensitivity},
        {"Concentration", Field::Sensitivity},
        {"Positive Concentration", Field::Sensitivity},
        {"Detection level", Field::Sensitivity},
        {"Detection range", Field::Sensitivity},
        {"Detection range ppb", Field::Sensitivity},
        {"Test", Field::Test},
        {"Test Name", Field::Test},
        {"Matrix", Field::Matrix},
        {"Specimen", Field::Matrix},
        {"CODEX", Field::MRL},
        {"Technical Regulation", Field::MRL},
        {"MRPL", Field::MRL},
        {"Federation", Field::MRL},
        {"Regulation", Field::MRL},
        {"Import Regulation", Field::MRL},
        {"MRL ppb", Field::MRL},
        {"MRL-ppb", Field::MRL},
        {"Action Level", Field::Tolerance},
        {"Safe level", Field::Tolerance},
        {"Safety level", Field::Tolerance},
    };
    // Header cells of the figure tables, as printed.
    const std::vector<std::pair<std::string, Field>> figure_headers = {
        {"Beta-lactam drug", Field::Drug},
        {"Detection level (ppb)", Field::Sensitivity},
        {"FDA tolerance/safe level (ppb)", Field::Tolerance},
        {"Beta-lactam Drug", Field::Drug},
        {"Charm 3 SL3 Sensitivity (ppb ^A)", Field::Sensitivity},
        {"Safe Level/Tolerance (ppb ^A)", Field::Tolerance},
        {"Antibiotics and Veterinary Drugs", Field::Drug},
        {"Sensitivity in Milk (ppb ^a)", Field::Sensitivity},
        {"FDA Safe Level/Tolerance (ppb ^a)", Field::Tolerance},
        {"Detection Range (ppb ^A)", Field::Sensitivity},
        {"EU/CODEX MRL (ppb ^A)", Field::MRL},
        {"Tetracycline Drug", Field::Drug},
        {"Detection Ranges (ppb ^A)", Field::Sensitivity},
        {"Antimicrobial Drug ^a", Field::Drug},
        {"Concentration ^b (ppb ^c)", Field::Sensitivity},
        {"US Safe Level/ Tolerance (ppb ^c)", Field::Tolerance},
        {"EU/CODEX MRL ^d (\xC2\xB5g/kg)", Field::MRL},
        {"Specimen", Field::Matrix},
    };
    std::size_t checked = 0;
    for (const auto* list : {&variants, &figure_headers}) {
        for (const auto& [cell, want] : *list) {
            for (const auto& probe : {cell, text::to_upper(cell), text::to_lower(cell)}) {
                ++checked;
                c.guard(probe, [&] {
                    auto got = fieldmap::map_header(probe, syn);
                    c.expect(got == want, fmt::format("'{}' maps to {}, expected {}", probe,
                                                      got ? fieldmap::to_string(*got) : "nothing",
                                                      fieldmap::to_string(want)));
                });
            }
        }
    }
    c.guard("Flavor", [&] { c.expect(!fieldmap::map_header("Flavor", syn), "'Flavor' maps to a field"); });

    std::vector<std::string> headers;
    for (const auto& [cell, f] : figure_headers) headers.push_back(cell);
    auto clean = fieldmap::lint(syn, headers);
    c.expect(clean.empty(), fmt::format("shipped dictionary has {} lint issue(s)", clean.size()));

    auto injected_text = testkit::slurp(testkit::config_dir() / "fields.tsv");
    auto pos = injected_text.find("Tolerance\t");
    auto eol = injected_text.find('\n', pos);
    injected_text.insert(eol, "\tDetection.?level");
    auto injected = fieldmap::HeaderSynonymTable::parse(injected_text);
    auto issues = fieldmap::lint(injected, headers);
    c.expect(!issues.empty(), "lint missed the injected Detection level overlap");
    c.out.summary = fmt::format("{} header probes, injected overlap -> {} lint issue(s)", checked, issues.size());
    return c.out;
}

namespace {

struct Pools {
    std::vector<std::string> drugs{"Amoxicillin", "Ampicillin", "Ceftiofur", "Penicillin G", "Tetracycline",
                                   "5-hydroxyflunixin Non-steroidal, Anti-inflammatory"};
    std::vector<std::string> tests{"Charm 3 SL3 Beta-Lactam", "SNAP NBL", "Charm \"MRL\" Beta-Lactam"};
    std::vector<std::string> matrices{"Milk", "Serum"};
    std::vector<std::optional<canon::MethodType>> types{std::nullopt, canon::MethodType::Sequential,
                                                       canon::MethodType::Quantitative};
    std::vector<std::string> sens{"8 ppb", "8.0 ppb", "0.008 ppm", "8.4 ppb", "2.5 to 4 ppb", "10 to 20 ppb", "1 ppm"};
    std::vector<std::string> urls{"https://example.org/a.pdf", "https://example.org/b,c.pdf"};
};

AssayRecord random_record(std::mt19937& rng, const Pools& p) {
    auto pick = [&](const auto& v) -> const auto& { return v[rng() % v.size()]; };
    AssayRecord r;
    r.drug = pick(p.drugs);
    r.test = pick(p.tests);
    r.matrix = pick(p.matrices);
    r.type = pick(p.types);
    r.sensitivity = records::parse_sensitivity(pick(p.sens), std::nullopt);
    r.source_url = pick(p.urls);
    if (rng() % 2) r.tolerance = records::parse_reference("10 ppb", std::nullopt);
    if (rng() % 3 == 0) r.species = "Cattle";
    return r;
}

// Brute-force merge oracle: the last record per key in a batch is applied;
// insert, update on a value change in ppb, else leave the stored record alone.
struct MergeOracle {
    std::vector<std::pair<records::IdentityKey, AssayRecord>> rows;

    std::vector<consolidate::Action> apply(const std::vector<AssayRecord>& batch) {
        std::vector<consolidate::Action> acts;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const auto& r = batch[i];
            auto k = r.key();
            bool later = std::any_of(batch.begin() + static_cast<long>(i) + 1, batch.end(),
                                     [&](const AssayRecord& o) { return o.key() == k; });
            if (later) continue;
            auto it = std::find_if(rows.begin(), rows.end(), [&](const auto& e) { return e.first == k; });
            if (it == rows.end()) {
                rows.emplace_back(k, r);
                acts.push_back(consolidate::Action::inserted);
                continue;
            }
            double a_lo = it->second.sensitivity.low_ppb();
            double a_hi = it->second.sensitivity.high_ppb();
            if (a_lo != r.sensitivity.low_ppb() || a_hi != r.sensitivity.high_ppb()) {
                it->second = r;
                acts.push_back(consolidate::Action::updated);
            } else {
                acts.push_back(consolidate::Action::unchanged);
            }
        }
        return acts;
    }
};

}  // namespace

Outcome merge_properties() {
    Checker c;
    c.guard("merge", [&] {
        std::mt19937 rng(20200601);
        Pools pools;
        consolidate::MasterDataset ds;
        MergeOracle oracle;
        auto t0 = parse_rfc3339("2020-06-01T00:00:00Z");
        std::size_t batches = 1000;
        std::size_t idem_fail = 0;
        std::size_t oracle_fail = 0;
        std::size_t unique_fail = 0;
        for (std::size_t b = 0; b < batches; ++b) {
            std::vector<AssayRecord> batch(1 + rng() % 8);
            for (auto& r : batch) r = random_record(rng, pools);
            auto at = t0 + std::chrono::seconds(b);
            auto outcomes = consolidate::merge_into(ds, batch, at);
            auto want = oracle.apply(batch);
            bool same = outcomes.size() == want.size();
            for (std::size_t i = 0; same && i < want.size(); ++i) same = outcomes[i].action == want[i];
            same = same && ds.records.size() == oracle.rows.size();
            for (const auto& [k, r] : oracle.rows) {
                const auto* got = ds.find(k);
                same = same && got && *got == r && got->source_url == r.source_url;
            }
            oracle_fail += !same;

            std::set<records::IdentityKey> keys;
            for (const auto& [k, r] : ds.records) {
                if (!(r.key() == k) || !keys.insert(k).second) ++unique_fail;
            }

            auto [again, second] = consolidate::merge(ds, batch, at + std::chrono::seconds(1));
            bool idem = again == ds && std::all_of(second.begin(), second.end(), [](const auto& o) {
                            return o.action == consolidate::Action::unchanged;
                        });
            idem_fail += !idem;
        }
        c.expect(oracle_fail == 0, fmt::format("{} batches disagree with the merge oracle", oracle_fail));
        c.expect(unique_fail == 0, fmt::format("{} duplicate or misfiled keys", unique_fail));
        c.expect(idem_fail == 0, fmt::format("{} batches not idempotent", idem_fail));

        testkit::TempDir dir;
        auto csv_path = dir / "master.csv";
        auto hist_path = dir / "history.tsv";
        consolidate::save(ds, csv_path, hist_path);
        auto loaded = consolidate::load(csv_path, hist_path);
        c.expect(loaded == ds, "loaded dataset differs from the saved one");
        auto csv1 = testkit::slurp(csv_path);
        auto hist1 = testkit::slurp(hist_path);
        consolidate::save(loaded, dir / "again.csv", dir / "again.tsv");
        c.expect(testkit::slurp(dir / "again.csv") == csv1, "CSV export is not byte-stable across load");
        c.expect(testkit::slurp(dir / "again.tsv") == hist1, "history export is not byte-stable across load");
        c.out.summary = fmt::format("{} batches, {} keys, {} history lines, export {} bytes", batches, ds.size(),
                                    ds.history.size(), csv1.size());
    });
    return c.out;
}

namespace {

using Corpus = std::vector<std::set<std::string>>;

std::vector<Corpus> toy_corpora() {
    std::vector<Corpus> out;
    // Eight contexts: x and y always together in four of them.
    out.push_back({{"x", "y"}, {"x", "y"}, {"x", "y"}, {"x", "y"}, {"z"}, {"z"}, {"w"}, {"w", "z"}});
    // x in two of eight contexts.
    out.push_back({{"x"}, {"x", "a"}, {"a"}, {"b"}, {"b"}, {"c"}, {"c"}, {"a", "b"}});
    // Independent: c(x)=c(y)=2, c(x,y)=1, N=4.
    out.push_back({{"x", "y"}, {"x"}, {"y"}, {"q"}});
    out.push_back({{"charm", "kis", "kidney", "inhibition", "swab"},
                   {"kidney", "kis", "tissue"},
                   {"delvotest", "p", "milk"},
                   {"kis", "swab"},
                   {"delvotest", "milk", "ampicillin"},
                   {"kidney", "charm"}});
    std::mt19937 rng(1234);
    const std::vector<std::string> vocab = {"a", "b", "c", "d", "e", "f"};
    for (int k = 0; k < 12; ++k) {
        Corpus corpus(1 + rng() % 10);
        for (auto& ctx : corpus) {
            for (const auto& v : vocab) {
                if (rng() % 3 == 0) ctx.insert(v);
            }
        }
        out.push_back(std::move(corpus));
    }
    return out;
}

std::vector<std::string> ranking(const std::string& unknown, const std::vector<canon::SynonymGroup>& groups,
                                 const canon::CooccurrenceStats& stats) {
    std::vector<std::string> out;
    for (const auto& cand : canon::rank_synonym_candidates(unknown, groups, stats)) out.push_back(cand.canonical);
    return out;
}

}  // namespace

Outcome pmi_oracle() {
    Checker c;
    std::size_t pairs = 0;
    double worst = 0;
    c.guard("pmi", [&] {
        for (const auto& corpus : toy_corpora()) {
            auto stats = canon::build_stats(corpus);
            std::set<std::string> vocab;
            for (const auto& ctx : corpus) vocab.insert(ctx.begin(), ctx.end());
            for (const auto& x : vocab) {
                for (const auto& y : vocab) {
                    ++pairs;
                    auto got = canon::pmi(x, y, stats);
                    auto rev = canon::pmi(y, x, stats);
                    auto want = testkit::brute_pmi(corpus, x, y);
                    c.expect(got.never_cooccurs() == !want.has_value(), fmt::format("pmi({},{}) co-occurrence", x, y));
                    c.expect(got.never_cooccurs() == rev.never_cooccurs(), fmt::format("pmi({},{}) asymmetric", x, y));
                    if (!want || got.never_cooccurs()) continue;
                    double err = std::abs(got.bits() - *want);
                    worst = std::max(worst, err);
                    c.expect(err <= 1e-9, fmt::format("pmi({},{}) = {} vs {}", x, y, got.bits(), *want));
                    c.expect(!rev.never_cooccurs() && got.bits() == rev.bits(),
                             fmt::format("pmi({},{}) not exactly symmetric", x, y));
                }
            }
        }
        auto corpora = toy_corpora();
        auto s0 = canon::build_stats(corpora[0]);
        c.expect(std::abs(canon::pmi("x", "y", s0).bits() - 1.0) < 1e-12, "c(x)=c(y)=c(x,y)=4, N=8 should give 1");
        auto s1 = canon::build_stats(corpora[1]);
        c.expect(std::abs(canon::pmi("x", "x", s1).bits() - 2.0) < 1e-12, "pmi(x,x) with c(x)=2, N=8 should give 2");
        auto s2 = canon::build_stats(corpora[2]);
        c.expect(std::abs(canon::pmi("x", "y", s2).bits()) < 1e-12, "independent tokens should give 0");
        bool threw = false;
        try {
            canon::pmi("x", "absent", s0);
        } catch (const canon::DomainError&) {
            threw = true;
        }
        c.expect(threw, "zero unigram count should raise a domain error");

        std::vector<canon::SynonymGroup> groups = {
            {"Charm KIS", {"Charm KIS", "KIS"}, canon::NameKind::test},
            {"Delvotest P", {"Delvotest P"}, canon::NameKind::test},
            {"Charm MRL", {"Charm MRL", "Charm MRL Beta-Lactam"}, canon::NameKind::test},
        };
        auto first = ranking("Kidney Inhibition Swab", groups, canon::build_stats(corpora[3]));
        c.expect(!first.empty() && first.front() == "Charm KIS", "Kidney Inhibition Swab should rank Charm KIS first");
        for (const auto& corpus : corpora) {
            auto base = canon::build_stats(corpus);
            for (std::size_t k : {2u, 3u, 5u}) {
                Corpus dup;
                for (std::size_t i = 0; i < k; ++i) dup.insert(dup.end(), corpus.begin(), corpus.end());
                auto scaled = canon::build_stats(dup);
                for (const auto* unknown : {"Kidney Inhibition Swab", "a b", "c", "milk kis", "zzz"}) {
                    c.expect(ranking(unknown, groups, base) == ranking(unknown, groups, scaled),
                             fmt::format("ranking for '{}' changes under {}x duplication", unknown, k));
                }
            }
        }
    });
    c.out.summary = fmt::format("{} pairs, max |error| {:.3g}", pairs, worst);
    return c.out;
}

Outcome sensitivity_parsing() {
    Checker c;
    using records::Unit;
    using records::ValueError;
    auto value = [&](const std::string& cell, std::optional<Unit> hint, double lo, double hi, Unit u) {
        c.guard(cell, [&] {
            auto v = records::parse_sensitivity(cell, hint);
            c.expect(v.low == lo && v.high == hi && v.unit == u,
                     fmt::format("'{}' parsed as {} to {}", cell, v.low, v.high));
            auto again = records::parse_sensitivity(records::format_sensitivity(v), std::nullopt);
            c.expect(again == v, fmt::format("'{}' does not survive format/parse", cell));
        });
    };
    auto error = [&](const std::string& cell, std::optional<Unit> hint, ValueError::Reason why) {
        try {
            records::parse_sensitivity(cell, hint);
            c.expect(false, fmt::format("'{}' parsed but should fail", cell));
        } catch (const ValueError& e) {
            c.expect(e.reason() == why && e.raw() == cell, fmt::format("'{}' failed for the wrong reason", cell));
        } catch (const std::exception& e) {
            c.expect(false, fmt::format("'{}' raised an unexpected error: {}", cell, e.what()));
        }
    };
    value("8.4 ppb", std::nullopt, 8.4, 8.4, Unit::ppb);
    value("8.0 ppb", std::nullopt, 8.0, 8.0, Unit::ppb);
    value("2.5 to 4", Unit::ppb, 2.5, 4, Unit::ppb);
    value("5.9", Unit::ppb, 5.9, 5.9, Unit::ppb);
    value("75 to 150", Unit::ppb, 75, 150, Unit::ppb);
    value("10 to 20 ^B", Unit::ppb, 10, 20, Unit::ppb);
    value("2 to 3 ppbA", std::nullopt, 2, 3, Unit::ppb);
    value("0.1 ppm", std::nullopt, 0.1, 0.1, Unit::ppm);
    error("None", Unit::ppb, ValueError::Reason::no_number);
    error("none", Unit::ppb, ValueError::Reason::no_number);
    error("5.9", std::nullopt, ValueError::Reason::unit_unresolved);
    error("4 to 2.5", Unit::ppb, ValueError::Reason::range_order);
    error("0", Unit::ppb, ValueError::Reason::non_positive);

    // Every sensitivity cell of the figure fixtures parses.
    std::size_t cells = 0;
    for (const auto& fig : testkit::figures()) {
        c.guard(fig.name, [&] {
            auto t = testkit::extract_figure(fig);
            auto col = t.schema ? t.schema->column_of(fieldmap::Field::Sensitivity) : std::nullopt;
            c.expect(col.has_value(), fig.name + ": no sensitivity column");
            if (!col) return;
            auto hint = records::unit_hint(t.table.cells[*t.table.header_row_index][*col]);
            for (std::size_t r = *t.table.header_row_index + 1; r < t.table.rows(); ++r) {
                ++cells;
                const auto& cell = t.table.cells[r][*col];
                c.guard(fig.name + " '" + cell + "'", [&] { records::parse_sensitivity(cell, hint); });
            }
        });
    }

    auto rec = [](const std::string& sens, const std::string& tol) {
        AssayRecord r;
        r.sensitivity = records::parse_sensitivity(sens, std::nullopt);
        r.tolerance = records::parse_reference(tol, std::nullopt);
        return r;
    };
    c.expect(records::below_tolerance(rec("8.4 ppb", "10 ppb")) == true, "below_tolerance(8.4 ppb, 10 ppb) != true");
    c.expect(records::below_tolerance(rec("25 to 35 ppb", "30 ppb")) == false,
             "below_tolerance(25 to 35 ppb, 30 ppb) != false");
    c.expect(records::below_tolerance(rec("0.0084 ppm", "0.01 ppm")) == true, "ppm form of 8.4 vs 10 differs");
    c.expect(records::below_tolerance(rec("0.025 to 0.035 ppm", "0.03 ppm")) == false, "ppm form of 25-35 vs 30 differs");
    c.expect(!records::below_tolerance(rec("8.4 ppb", "None")).has_value(), "None tolerance should give no answer");
    AssayRecord bare;
    bare.sensitivity = records::parse_sensitivity("8.4 ppb", std::nullopt);
    c.expect(!records::below_tolerance(bare).has_value(), "missing tolerance should give no answer");
    c.out.summary = fmt::format("{} figure sensitivity cells parsed", cells);
    return c.out;
}

namespace {

// Independent filter: lowercase substring on each supplied term.
bool oracle_match(const AssayRecord& r, const queryapi::QueryFilter& f) {
    auto has = [](const std::string& hay, const std::optional<std::string>& term) {
        if (!term) return true;
        std::string h = hay;
        std::string t = *term;
        std::transform(h.begin(), h.end(), h.begin(), [](unsigned char ch) { return std::tolower(ch); });
        std::transform(t.begin(), t.end(), t.begin(), [](unsigned char ch) { return std::tolower(ch); });
        return h.find(t) != std::string::npos;
    };
    auto opt = [&](const std::optional<std::string>& v, const std::optional<std::string>& term) {
        return !term || (v && has(*v, term));
    };
    if (f.below_tolerance_only == true) {
        if (!r.tolerance || r.tolerance->none_stated) return false;
        if (!(r.sensitivity.high_ppb() <= r.tolerance->value_ppb())) return false;
    }
    return has(r.drug, f.drug) && has(r.matrix, f.matrix) && has(r.test, f.test) && opt(r.species, f.species) &&
           opt(r.manufacturer, f.manufacturer);
}

std::string random_term(std::mt19937& rng, const std::vector<std::string>& values) {
    if (rng() % 6 == 0) return "zz" + std::to_string(rng() % 100);
    const auto& v = values[rng() % values.size()];
    if (v.empty()) return "a";
    std::size_t a = rng() % v.size();
    std::size_t len = 1 + rng() % (v.size() - a);
    std::string s = v.substr(a, len);
    for (auto& ch : s) {
        if (rng() % 2) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    }
    s = text::trim(s);
    return s.empty() ? "a" : s;
}

}  // namespace

Outcome query_service() {
    Checker c;
    c.guard("query", [&] {
        testkit::TempDir dir;
        auto master = dir / "master.csv";
        consolidate::MasterDataset ds;
        auto recs = testkit::fixture_dataset();
        for (auto& r : recs) {
            if (r.drug == "Amoxicillin") r.species = "Cattle";
        }
        consolidate::merge_into(ds, recs, parse_rfc3339("2020-06-01T00:00:00Z"));
        consolidate::save(ds, master, std::nullopt);
        queryapi::QueryService svc(master);
        auto all = ds.sorted_records();
        c.expect(svc.snapshot()->records.size() == all.size(), "snapshot size differs from the dataset");

        std::vector<std::string> drugs, matrices, tests, species, makers;
        for (const auto& r : all) {
            drugs.push_back(r.drug);
            matrices.push_back(r.matrix);
            tests.push_back(r.test);
            if (r.species) species.push_back(*r.species);
            if (r.manufacturer) makers.push_back(*r.manufacturer);
        }
        if (species.empty()) species.push_back("Cattle");
        if (makers.empty()) makers.push_back("Charm");

        std::mt19937 rng(42);
        std::size_t iterations = 500;
        std::size_t nonempty = 0;
        for (std::size_t it = 0; it < iterations; ++it) {
            std::multimap<std::string, std::string> params;
            if (rng() % 2) params.emplace("drug", random_term(rng, drugs));
            if (rng() % 3 == 0) params.emplace("matrix", random_term(rng, matrices));
            if (rng() % 3 == 0) params.emplace("test", random_term(rng, tests));
            if (rng() % 5 == 0) params.emplace("species", random_term(rng, species));
            if (rng() % 6 == 0) params.emplace("manufacturer", random_term(rng, makers));
            if (rng() % 4 == 0) params.emplace("below_tolerance_only", rng() % 2 ? "true" : "false");
            params.emplace("limit", std::to_string(queryapi::kMaxLimit));
            auto f = queryapi::parse_filter(params);
            auto result = queryapi::run_query(*svc.snapshot(), f);

            std::vector<records::IdentityKey> want;
            for (const auto& r : all) {
                if (oracle_match(r, f)) want.push_back(r.key());
            }
            std::vector<records::IdentityKey> got;
            for (const auto& row : result.rows) got.push_back(row.record->key());
            std::sort(got.begin(), got.end());
            c.expect(got == want && result.total == want.size(),
                     fmt::format("filter {} returned {} rows, oracle {}", queryapi::to_json(f).dump(), got.size(),
                                 want.size()));
            nonempty += !want.empty();

            auto json_resp = svc.handle("/records", params);
            auto csv_resp = svc.handle("/records.csv", params);
            auto body = nlohmann::json::parse(json_resp.body);
            auto csv_rows = csv::parse(csv_resp.body);
            bool parity = json_resp.status == 200 && csv_resp.status == 200 &&
                          body["rows"].size() + 1 == csv_rows.size() && body["total"] == want.size();
            for (std::size_t i = 0; parity && i < body["rows"].size(); ++i)
                parity = body["rows"][i]["drug"] == csv_rows[i + 1].fields[0] &&
                         body["rows"][i]["test"] == csv_rows[i + 1].fields[3];
            c.expect(parity, "JSON and CSV endpoints disagree for " + queryapi::to_json(f).dump());
        }

        // Reload atomicity: corrupt files never replace the served snapshot.
        auto before = svc.snapshot();
        auto good = testkit::slurp(master);
        auto dup_line = good.substr(good.find('\n') + 1);
        dup_line = dup_line.substr(0, dup_line.find('\n') + 1);
        const std::vector<std::string> corrupt = {good + dup_line, good + "Amoxicillin,\"unterminated\n",
                                                  "Drug,Sensitivity\nx,y\n", good.substr(0, good.size() / 2) + "\"",
                                                  ""};
        std::atomic<bool> stop{false};
        std::atomic<std::size_t> bad_reads{0};
        std::atomic<std::size_t> reads{0};
        std::vector<std::thread> readers;
        for (int k = 0; k < 3; ++k) {
            readers.emplace_back([&] {
                queryapi::QueryFilter f;
                f.limit = queryapi::kMaxLimit;
                while (!stop.load()) {
                    auto resp = svc.handle("/records", {{"limit", std::to_string(queryapi::kMaxLimit)}});
                    auto j = nlohmann::json::parse(resp.body);
                    if (resp.status != 200 || j["total"] != all.size()) ++bad_reads;
                    ++reads;
                }
            });
        }
        std::size_t rejected = 0;
        for (int round = 0; round < 20; ++round) {
            testkit::spit(master, corrupt[round % corrupt.size()]);
            rejected += !svc.reload();
            c.expect(svc.health().stale, "health not stale after a corrupt reload");
            testkit::spit(master, good);
            c.expect(svc.reload(), "reload of the good file failed");
        }
        testkit::spit(master, corrupt[0]);
        svc.reload();
        stop = true;
        for (auto& t : readers) t.join();
        c.expect(rejected == 20, fmt::format("{} of 20 corrupt reloads rejected", rejected));
        c.expect(bad_reads == 0, fmt::format("{} of {} reads saw a disturbed dataset", bad_reads.load(), reads.load()));
        auto h = nlohmann::json::parse(svc.handle("/health", {}).body);
        c.expect(h["status"] == "stale" && h.contains("last_error"), "/health does not report the failed reload");
        c.expect(svc.snapshot()->records == all, "served records changed after corrupt reloads");

        // A valid change is picked up.
        auto changed = ds;
        auto first = changed.records.begin();
        first->second.sensitivity = records::parse_sensitivity("123 ppb", std::nullopt);
        consolidate::save(changed, master, std::nullopt);
        c.expect(svc.reload() && !svc.health().stale, "valid reload rejected");
        c.expect(svc.snapshot()->records == changed.sorted_records(), "reload did not publish the new file");
        c.expect(before->records == all, "a pinned snapshot changed under reload");
        c.out.summary = fmt::format("{} random filters ({} non-empty), {} concurrent reads over {} corrupt reloads",
                                    iterations, nonempty, reads.load(), rejected);
    });
    return c.out;
}

const std::vector<Criterion>& all() {
    static const std::vector<Criterion> list = {
        {"figure-goldens", figure_goldens},   {"gap-audit", gap_audit},
        {"regex-guards", regex_guards},       {"header-mapping", header_mapping},
        {"merge-properties", merge_properties}, {"pmi-oracle", pmi_oracle},
        {"sensitivity-parsing", sensitivity_parsing}, {"query-service", query_service},
    };
    return list;
}

}  // namespace criteria
