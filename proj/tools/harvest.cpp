#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "harvest/consolidate.hpp"
#include "harvest/corpus.hpp"
#include "harvest/kernels.hpp"
#include "harvest/pdf.hpp"
#include "harvest/pipeline.hpp"
#include "harvest/queryapi.hpp"
#include "harvest/text.hpp"

namespace fs = std::filesystem;
using namespace harvest;

namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kInvalid = 2;

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(fmt::format("cannot open {}", p.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& s) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << s;
    if (!out) throw Error(fmt::format("cannot write {}", p.string()));
}

std::vector<fs::path> csv_files(const fs::path& p) {
    if (!fs::is_directory(p)) return {p};
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

void write_tables(const std::vector<pipeline::ExtractedTable>& tables, const fs::path& out) {
    fs::create_directories(out);
    for (const auto& t : tables) {
        pipeline::write_table(t, out);
        std::cout << fmt::format("{}\t{}\t{} rows{}\n", t.table_id, pipeline::to_string(t.status), t.table.rows(),
                                 t.detail.empty() ? "" : "\t" + t.detail);
    }
}

queryapi::Server* g_server = nullptr;

extern "C" void on_signal(int sig) {
    if (!g_server) return;
    if (sig == SIGHUP) {
        g_server->request_reload();
    } else {
        g_server->request_stop();
    }
}

int cmd_crawl(const std::string& root, const std::string& pattern, const std::vector<int>& years, const fs::path& out,
              std::size_t parallel) {
    corpus::Store store(out);
    corpus::DefaultTransport transport;
    auto report = corpus::crawl(root, pattern, std::set<int>(years.begin(), years.end()), store, transport,
                                corpus::system_now, parallel);
    for (const auto& d : report.fetched) std::cout << fmt::format("{}\t{}\n", d.content_hash.substr(0, 12), d.ref.url);
    for (const auto& f : report.failures) std::cerr << fmt::format("failed\t{}\t{}\n", f.ref.url, f.reason);
    std::cout << fmt::format("{} discovered, {} fetched, {} failed\n", report.discovered.size(), report.fetched.size(),
                             report.failures.size());
    return report.failures.empty() ? kOk : kFailure;
}

int cmd_extract_html(const fs::path& corpus_dir, const fs::path& out, const pipeline::Config& cfg) {
    corpus::Store store(corpus_dir);
    std::vector<pipeline::ExtractedTable> all;
    int errors = 0;
    for (const auto& doc : store.documents(SourceKind::html)) {
        try {
            auto tables = pipeline::extract_html(doc, cfg);
            all.insert(all.end(), std::make_move_iterator(tables.begin()), std::make_move_iterator(tables.end()));
        } catch (const ParseError& e) {
            std::cerr << fmt::format("{}: byte {}: {}\n", doc.ref.url, e.offset(), e.what());
            ++errors;
        }
    }
    write_tables(all, out);
    return errors ? kFailure : kOk;
}

std::vector<std::vector<pdf::TextSpan>> group_pages(const std::vector<pdf::TextSpan>& spans) {
    std::map<int, std::vector<pdf::TextSpan>> by_page;
    for (const auto& s : spans) by_page[s.page].push_back(s);
    std::vector<std::vector<pdf::TextSpan>> pages;
    for (auto& [n, v] : by_page) pages.push_back(std::move(v));
    return pages;
}

int cmd_extract_pdf(const std::optional<fs::path>& corpus_dir, const std::vector<fs::path>& span_files,
                    const std::string& url, const fs::path& out, const pipeline::Config& cfg) {
    std::vector<pipeline::ExtractedTable> all;
    int errors = 0;
    auto add = [&](std::vector<pipeline::ExtractedTable> tables) {
        all.insert(all.end(), std::make_move_iterator(tables.begin()), std::make_move_iterator(tables.end()));
    };
    if (corpus_dir) {
        corpus::Store store(*corpus_dir);
        for (const auto& doc : store.documents(SourceKind::pdf)) {
            try {
                add(pipeline::extract_pdf(pdf::scan_pages(doc), doc.ref, cfg));
            } catch (const pdf::NoTextLayerError& e) {
                std::cerr << fmt::format("{}: no text layer: {}\n", doc.ref.url, e.what());
                ++errors;
            } catch (const ParseError& e) {
                std::cerr << fmt::format("{}: byte {}: {}\n", doc.ref.url, e.offset(), e.what());
                ++errors;
            }
        }
    }
    for (const auto& f : span_files) {
        SourceRef ref;
        ref.kind = SourceKind::pdf;
        ref.url = url.empty() ? corpus::to_url(fs::absolute(f).string()) : url;
        add(pipeline::extract_pdf(group_pages(pdf::load_spans(f.string())), ref, cfg));
    }
    write_tables(all, out);
    write_file(out / "gaps.tsv", pipeline::format_gaps(all));
    std::size_t gaps = 0;
    for (const auto& t : all) gaps += t.gaps.size();
    if (gaps) std::cerr << fmt::format("{} extraction gap(s) written to {}\n", gaps, (out / "gaps.tsv").string());
    return errors ? kFailure : kOk;
}

int cmd_records(const fs::path& tables_dir, const std::optional<fs::path>& tolerances, const fs::path& out,
                const fs::path& unknown_out, const pipeline::Config& cfg) {
    auto tables = pipeline::read_tables(tables_dir, cfg);
    std::optional<records::ToleranceTable> tol;
    if (tolerances) tol = records::ToleranceTable::load(*tolerances);
    std::vector<records::AssayRecord> recs;
    std::vector<records::UnknownName> unknown;
    std::vector<std::set<std::string>> contexts;
    for (const auto& t : tables) {
        if (t.status != pipeline::TableStatus::ok) continue;
        contexts.push_back(canon::context_tokens(t.table.cells));
        auto built = pipeline::build(t, cfg);
        for (const auto& s : built.skipped) std::cerr << fmt::format("{}: row {} skipped: {}\n", t.table_id, s.row, s.reason);
        for (const auto& w : built.warnings) std::cerr << fmt::format("{}: {}\n", t.table_id, w);
        for (auto& u : built.unknown_names) {
            if (std::find(unknown.begin(), unknown.end(), u) == unknown.end()) unknown.push_back(u);
        }
        for (auto& r : built.records) {
            if (tol) {
                auto a = records::annotate_tolerance(r, *tol);
                if (a.conflict)
                    std::cerr << fmt::format("{}: tolerance conflict for {}: document {} vs curated {} ({})\n",
                                             t.table_id, r.drug, records::format_reference(a.conflict->table_value),
                                             records::format_reference(a.conflict->curated_value), a.conflict->citation);
                r = std::move(a.record);
            }
            recs.push_back(std::move(r));
        }
    }
    write_file(out, records::write_csv(recs));
    auto stats = kernels::build_stats(contexts);
    write_file(unknown_out, pipeline::curation_report(unknown, cfg, stats));
    std::cout << fmt::format("{} records from {} tables, {} unknown names\n", recs.size(), tables.size(), unknown.size());
    return kOk;
}

int cmd_merge(const fs::path& master, const std::vector<fs::path>& incoming, const std::optional<fs::path>& history,
              const std::vector<std::string>& withdraw_keys, const std::string& reason) {
    consolidate::MasterDataset ds;
    if (fs::exists(master)) ds = consolidate::load(master, history);
    std::vector<records::AssayRecord> batch;
    for (const auto& p : incoming) {
        for (const auto& f : csv_files(p)) {
            auto recs = records::read_csv(read_file(f));
            batch.insert(batch.end(), recs.begin(), recs.end());
        }
    }
    auto now = corpus::system_now();
    auto outcomes = consolidate::merge_into(ds, batch, now);
    if (outcomes.size() < batch.size())
        std::cerr << fmt::format("{} record(s) superseded by a later record with the same key\n",
                                 batch.size() - outcomes.size());
    std::size_t withdrawn = 0;
    for (const auto& k : withdraw_keys) {
        auto parts = text::split(k, '|');
        if (parts.size() < 3 || parts.size() > 4)
            throw ValidationError(fmt::format("--withdraw expects drug|test|matrix[|type], got '{}'", k));
        records::IdentityKey key{parts[0], parts[1], parts[2], parts.size() == 4 ? parts[3] : ""};
        if (consolidate::withdraw(ds, key, now, reason)) {
            ++withdrawn;
        } else {
            std::cerr << fmt::format("no record for key '{}'\n", k);
        }
    }
    consolidate::save(ds, master, history);
    auto s = consolidate::summarize(outcomes);
    std::cout << fmt::format("inserted {}, updated {}, unchanged {}, withdrawn {}, total {}\n", s.inserted, s.updated,
                             s.unchanged, withdrawn, ds.size());
    return kOk;
}

int cmd_serve(const fs::path& master, std::string bind, const std::optional<fs::path>& config_dir,
              const std::optional<fs::path>& static_dir, int poll_ms) {
    if (const char* env = std::getenv("HARVEST_BIND"); env && *env) bind = env;
    auto [host, port] = queryapi::parse_bind(bind);
    std::vector<canon::SynonymGroup> groups;
    if (config_dir) {
        auto cfg = pipeline::Config::load(*config_dir);
        for (const auto* lex : {&cfg.lex.drugs, &cfg.lex.tests, &cfg.lex.matrices})
            groups.insert(groups.end(), lex->groups().begin(), lex->groups().end());
    }
    queryapi::QueryService svc(master, std::move(groups));
    queryapi::Server server(svc, queryapi::ServeOptions{host, port, static_dir, poll_ms});
    g_server = &server;
    std::signal(SIGHUP, on_signal);
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << fmt::format("serving {} records on {}:{}\n", svc.health().records, host, port);
    bool ok = server.run();
    g_server = nullptr;
    if (!ok) {
        std::cerr << fmt::format("cannot bind {}:{}\n", host, port);
        return kFailure;
    }
    return kOk;
}

int cmd_dict_lint(const fs::path& config_dir, const std::vector<std::string>& extra) {
    auto syn = fieldmap::HeaderSynonymTable::load(config_dir / "fields.tsv");
    auto issues = fieldmap::lint(syn, extra);
    for (const auto& i : issues) std::cout << i.message << "\n";
    // The lexicon loaders reject cross-group duplicates themselves.
    pipeline::Config::load(config_dir);
    std::cout << fmt::format("{} issue(s)\n", issues.size());
    return issues.empty() ? kOk : kInvalid;
}

int cmd_repair(const fs::path& tables_dir, bool assume_yes, const pipeline::Config& cfg) {
    auto tables = pipeline::read_tables(tables_dir, cfg);
    std::size_t applied = 0;
    for (auto& t : tables) {
        if (t.gaps.empty()) continue;
        if (!t.grid) {
            std::cerr << fmt::format("{}: gaps but no grid, skipped\n", t.table_id);
            continue;
        }
        std::vector<pdftab::ExtractionGap> open;
        for (const auto& g : t.gaps) {
            auto row = pdftab::propose_repair(t.table, *t.grid, g);
            std::cout << fmt::format("{}: missing {}\n  proposed row: {}\n", t.table_id, text::join(g.missing_terms, ", "),
                                     text::join(row, " | "));
            bool yes = assume_yes;
            if (!yes) {
                std::cout << "  apply? [y/N] " << std::flush;
                std::string answer;
                std::getline(std::cin, answer);
                yes = !answer.empty() && (answer[0] == 'y' || answer[0] == 'Y');
            }
            if (!yes) {
                open.push_back(g);
                continue;
            }
            t.table = pdftab::apply_repair(t.table, row);
            ++applied;
        }
        t.gaps = std::move(open);
        pipeline::refresh_schema(t, cfg);
        pipeline::write_table(t, tables_dir);
    }
    std::cout << fmt::format("{} repair(s) applied\n", applied);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rapid assay table harvester"};
    app.require_subcommand(1);
    std::string config_dir = "config";
    app.add_option("--config", config_dir, "Dictionary directory")->capture_default_str();

    auto* crawl = app.add_subcommand("crawl", "Discover and fetch PDF documents linked from a root page");
    std::string root, pattern = "MRK", corpus_out;
    std::vector<int> years;
    std::size_t parallel = 8;
    crawl->add_option("--root", root, "Root page URL or path")->required();
    crawl->add_option("--pattern", pattern, "Title pattern")->capture_default_str();
    crawl->add_option("--years", years, "Years")->delimiter(',')->required();
    crawl->add_option("--out", corpus_out, "Corpus directory")->required();
    crawl->add_option("--parallel", parallel, "Concurrent fetches")->capture_default_str();

    auto* xhtml = app.add_subcommand("extract-html", "Extract tables from stored HTML pages");
    std::string corpus_in, tables_out;
    xhtml->add_option("corpus", corpus_in, "Corpus directory")->required();
    xhtml->add_option("--out", tables_out, "Table directory")->required();

    auto* xpdf = app.add_subcommand("extract-pdf", "Extract tables from stored PDFs or span fixtures");
    std::string pdf_corpus, span_url;
    std::vector<std::string> span_files;
    xpdf->add_option("corpus", pdf_corpus, "Corpus directory");
    xpdf->add_option("--spans", span_files, "Span fixture files");
    xpdf->add_option("--url", span_url, "Source URL recorded for span fixtures");
    xpdf->add_option("--out", tables_out, "Table directory")->required();

    auto* recs = app.add_subcommand("records", "Build canonical records from extracted tables");
    std::string tables_in, tolerances, records_out, unknown_out = "unknown_names.tsv";
    recs->add_option("--tables", tables_in, "Table directory")->required();
    recs->add_option("--tolerances", tolerances, "Curated tolerance file");
    recs->add_option("--out", records_out, "Record CSV")->required();
    recs->add_option("--unknown", unknown_out, "Curation report")->capture_default_str();

    auto* merge = app.add_subcommand("merge", "Merge record CSVs into the master dataset");
    std::string master, history, reason;
    std::vector<std::string> incoming, withdraw_keys;
    merge->add_option("--master", master, "Master CSV")->required();
    merge->add_option("--incoming", incoming, "Record CSV files or directories");
    merge->add_option("--history", history, "History file (default: <master>.history.tsv)");
    merge->add_option("--withdraw", withdraw_keys, "Remove drug|test|matrix[|type]");
    merge->add_option("--reason", reason, "Reason recorded for withdrawals");

    auto* serve = app.add_subcommand("serve", "Serve the master dataset over HTTP (HARVEST_BIND overrides --bind)");
    std::string bind = "127.0.0.1:8080", static_dir;
    int poll_ms = 1000;
    bool with_dict = false;
    serve->add_option("--master", master, "Master CSV")->required();
    serve->add_option("--bind", bind, "host:port")->capture_default_str();
    serve->add_option("--static-dir", static_dir, "Directory served at /");
    serve->add_option("--poll-ms", poll_ms, "Master file polling period, 0 disables")->capture_default_str();
    serve->add_flag("--dictionaries", with_dict, "Include lexicon names in /dictionaries");

    auto* dict = app.add_subcommand("dict", "Dictionary maintenance");
    auto* lint = dict->add_subcommand("lint", "Check header synonyms for cross-field overlaps");
    dict->require_subcommand(1);
    std::vector<std::string> extra_headers;
    lint->add_option("--header", extra_headers, "Extra header strings to probe");

    auto* repair = app.add_subcommand("repair", "Review and apply proposed rows for extraction gaps");
    bool assume_yes = false;
    repair->add_option("--tables", tables_in, "Table directory")->required();
    repair->add_flag("--yes", assume_yes, "Apply every proposal without asking");

    CLI11_PARSE(app, argc, argv);

    try {
        auto opt_path = [](const std::string& s) { return s.empty() ? std::nullopt : std::optional<fs::path>(s); };
        if (*crawl) return cmd_crawl(root, pattern, years, corpus_out, parallel);
        if (*lint) return cmd_dict_lint(config_dir, extra_headers);
        if (*merge) {
            std::vector<fs::path> in(incoming.begin(), incoming.end());
            return cmd_merge(master, in, opt_path(history), withdraw_keys, reason);
        }
        if (*serve) {
            return cmd_serve(master, bind, with_dict ? opt_path(config_dir) : std::nullopt, opt_path(static_dir), poll_ms);
        }
        auto cfg = pipeline::Config::load(config_dir);
        if (*xhtml) return cmd_extract_html(corpus_in, tables_out, cfg);
        if (*xpdf) {
            if (pdf_corpus.empty() && span_files.empty()) throw ValidationError("give a corpus directory or --spans");
            std::vector<fs::path> spans(span_files.begin(), span_files.end());
            return cmd_extract_pdf(opt_path(pdf_corpus), spans, span_url, tables_out, cfg);
        }
        if (*recs) return cmd_records(tables_in, opt_path(tolerances), records_out, unknown_out, cfg);
        if (*repair) return cmd_repair(tables_in, assume_yes, cfg);
    } catch (const ValidationError& e) {
        std::cerr << "invalid: " << e.what() << "\n";
        return kInvalid;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kOk;
}
