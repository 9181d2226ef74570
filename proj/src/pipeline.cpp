#include "harvest/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "harvest/csv.hpp"
#include "harvest/html.hpp"
#include "harvest/kernels.hpp"
#include "harvest/text.hpp"

namespace harvest::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(fmt::format("cannot open {}", p.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(fmt::format("cannot write {}", p.string()));
}

std::string page_text(const std::vector<pdftab::TextSpan>& spans) {
    std::vector<std::string> parts;
    parts.reserve(spans.size());
    for (const auto& s : spans) parts.push_back(s.text);
    return text::join(parts, "\n");
}

std::size_t data_rows(const RawTable& t) {
    if (!t.header_row_index) return t.rows();
    return t.rows() - *t.header_row_index - 1;
}

// Schema mapping with every failure turned into a status.
void assign_schema(ExtractedTable& out, const Config& cfg) {
    out.schema.reset();
    try {
        out.schema = fieldmap::map_table_schema(out.table, cfg.fields);
        out.status = out.schema->relevant ? TableStatus::ok : TableStatus::irrelevant;
        out.detail = out.schema->relevant ? "" : "no Drug and Sensitivity columns";
    } catch (const StructuralError& e) {
        out.status = TableStatus::structural_error;
        out.detail = e.what();
    } catch (const fieldmap::AmbiguousHeader& e) {
        out.status = TableStatus::structural_error;
        out.detail = e.what();
    } catch (const ValidationError& e) {
        out.status = TableStatus::no_header;
        out.detail = e.what();
    }
}

json gap_to_json(const pdftab::ExtractionGap& g) {
    json ev = json::array();
    for (const auto& s : g.evidence)
        ev.push_back(json{{"page", s.page}, {"x", s.x}, {"y", s.y}, {"width", s.width}, {"text", s.text}});
    return json{{"missing_terms", g.missing_terms}, {"severity", pdftab::to_string(g.severity)}, {"evidence", ev}};
}

pdftab::ExtractionGap gap_from_json(const json& j, const std::string& table_id) {
    pdftab::ExtractionGap g;
    g.table_id = table_id;
    g.missing_terms = j.at("missing_terms").get<std::vector<std::string>>();
    g.severity = j.value("severity", "row_suspected") == "unknown" ? pdftab::GapSeverity::unknown
                                                                   : pdftab::GapSeverity::row_suspected;
    for (const auto& s : j.value("evidence", json::array()))
        g.evidence.push_back({s.at("page").get<int>(), s.at("x").get<double>(), s.at("y").get<double>(),
                              s.at("width").get<double>(), s.at("text").get<std::string>()});
    return g;
}

}  // namespace

Config Config::load(const fs::path& dir) {
    Config c;
    c.fields = fieldmap::HeaderSynonymTable::load(dir / "fields.tsv");
    c.keywords = fieldmap::KeywordDictionary::load(dir / "keywords.tsv");
    c.lex.drugs = canon::SynonymLexicon(canon::load_groups(dir / "drugs.tsv", canon::NameKind::drug), canon::NameKind::drug);
    c.lex.tests = canon::SynonymLexicon(canon::load_groups(dir / "tests.tsv", canon::NameKind::test), canon::NameKind::test);
    c.lex.matrices =
        canon::SynonymLexicon(canon::load_groups(dir / "matrices.tsv", canon::NameKind::matrix), canon::NameKind::matrix);
    if (fs::exists(dir / "manufacturers.tsv"))
        c.manufacturers = canon::SynonymLexicon(canon::load_groups(dir / "manufacturers.tsv", canon::NameKind::manufacturer),
                                                canon::NameKind::manufacturer);
    return c;
}

std::string_view to_string(TableStatus s) {
    switch (s) {
        case TableStatus::ok: return "ok";
        case TableStatus::not_a_table: return "not_a_table";
        case TableStatus::no_header: return "no_header";
        case TableStatus::irrelevant: return "irrelevant";
        case TableStatus::structural_error: return "structural_error";
    }
    return "?";
}

std::optional<TableStatus> table_status_from_string(std::string_view s) {
    for (auto t : {TableStatus::ok, TableStatus::not_a_table, TableStatus::no_header, TableStatus::irrelevant,
                   TableStatus::structural_error}) {
        if (s == to_string(t)) return t;
    }
    return std::nullopt;
}

records::DocumentContext text_context(const std::string& txt, const std::string& source_url, const Config& cfg) {
    records::DocumentContext ctx;
    ctx.source_url = source_url;
    if (auto t = cfg.lex.tests.find_in(txt)) ctx.test = t->name;
    auto hits = fieldmap::keyword_scan(txt, cfg.keywords, fieldmap::KeywordCategory::matrix);
    if (!hits.empty()) ctx.matrix = cfg.lex.matrices.canonicalize(hits.front().term()).name;
    if (auto m = cfg.manufacturers.find_in(txt + "\n" + source_url)) ctx.manufacturer = m->name;
    bool cow = !text::find_word(txt, "cow").empty() || !text::find_word(txt, "cows").empty() ||
               !text::find_word(txt, "bovine").empty() || !text::find_word(txt, "cattle").empty();
    if (cow && text::iequals(ctx.matrix, "Milk")) {
        ctx.species = "Cattle";
        ctx.species_defaulted = true;
    }
    return ctx;
}

ExtractedTable extract_pdf_page(const std::vector<pdftab::TextSpan>& page_spans,
                                const std::vector<pdftab::TextSpan>& table_spans, const SourceRef& ref,
                                const Config& cfg, const std::string& table_id) {
    ExtractedTable out;
    out.table_id = table_id;
    out.context = text_context(page_text(page_spans), ref.url, cfg);
    auto rec = pdftab::reconstruct_table(table_spans);
    if (!rec.is_table()) {
        out.status = TableStatus::not_a_table;
        out.detail = "fewer than two rows or columns";
        out.table.source = ref;
        return out;
    }
    out.grid = rec.grid;
    RawTable t = std::move(*rec.table);
    t.source = ref;
    t.context_text = page_text(page_spans);
    auto header = fieldmap::detect_header_row(t, cfg.fields, t.rows());
    if (!header) {
        out.status = TableStatus::no_header;
        out.detail = "no header row";
        out.table = std::move(t);
        return out;
    }
    t.header_row_index = header;
    RawTable folded;
    try {
        folded = pdftab::fold_repeated_columns(t, cfg.fields);
    } catch (const StructuralError& e) {
        out.status = TableStatus::structural_error;
        out.detail = e.what();
        out.table = std::move(t);
        return out;
    }
    out.data_rows_in = data_rows(folded);
    out.table = pdftab::drop_class_title_rows(folded);
    out.class_rows_dropped = out.data_rows_in - data_rows(out.table);
    assign_schema(out, cfg);
    if (out.status != TableStatus::ok) return out;

    double top = rec.grid.row_bands[*header].lo - 0.4 * pdftab::line_pitch(page_spans);
    // Spans of class-title rows name drug classes, not table entries.
    std::vector<pdftab::TextSpan> titles;
    for (std::size_t i = 0; i < table_spans.size(); ++i) {
        std::size_t r = rec.placement[i].row;
        if (r == *header) continue;
        const auto& row = t.cells[r];
        bool numeric = std::any_of(row.begin(), row.end(),
                                   [](const std::string& c) { return text::contains_positive_number(c); });
        if (!numeric) titles.push_back(table_spans[i]);
    }
    std::vector<pdftab::TextSpan> region;
    for (const auto& s : page_spans) {
        if (s.y >= top && std::find(titles.begin(), titles.end(), s) == titles.end()) region.push_back(s);
    }
    out.gaps = pdftab::audit_completeness(out.table, region, cfg.lex.drugs.all_names(), table_id);
    return out;
}

ExtractedTable extract_pdf_page(const std::vector<pdftab::TextSpan>& page_spans, const SourceRef& ref,
                                const Config& cfg, const std::string& table_id) {
    return extract_pdf_page(page_spans, page_spans, ref, cfg, table_id);
}

std::vector<ExtractedTable> extract_pdf(const std::vector<std::vector<pdftab::TextSpan>>& pages, const SourceRef& ref,
                                        const Config& cfg) {
    std::vector<ExtractedTable> out(pages.size());
    const auto n = static_cast<long long>(pages.size());
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < n; ++i) {
        auto idx = static_cast<std::size_t>(i);
        auto id = table_id_for(ref, fmt::format("p{}", idx + 1));
        out[idx] = extract_pdf_page(pages[idx], ref, cfg, id);
        out[idx].table.page_number = static_cast<int>(idx + 1);
    }
    return out;
}

std::vector<ExtractedTable> extract_html(const SourceDocument& doc, const Config& cfg) {
    auto parsed = html::parse(doc.bytes);
    auto page = htmltab::derive_page_context(parsed, cfg.keywords);
    auto prose = htmltab::page_prose(parsed);
    records::DocumentContext ctx;
    ctx.source_url = doc.ref.url;
    if (!page.test_name.empty()) ctx.test = page.test_name;
    if (!page.matrix_hits.empty()) ctx.matrix = cfg.lex.matrices.canonicalize(page.matrix_hits.front()).name;
    if (auto m = cfg.manufacturers.find_in(page.title + "\n" + prose + "\n" + doc.ref.url)) ctx.manufacturer = m->name;
    auto from_text = text_context(prose, doc.ref.url, cfg);
    ctx.species = from_text.species;
    ctx.species_defaulted = from_text.species_defaulted;

    std::vector<ExtractedTable> out;
    auto tables = htmltab::extract_html_tables(parsed, doc.ref, &cfg.fields);
    for (std::size_t i = 0; i < tables.size(); ++i) {
        ExtractedTable e;
        e.table_id = table_id_for(doc.ref, fmt::format("t{}", i + 1));
        e.context = ctx;
        e.table = std::move(tables[i]);
        e.data_rows_in = data_rows(e.table);
        if (!e.table.header_row_index) {
            e.status = TableStatus::no_header;
            e.detail = "first row does not map to known fields";
        } else {
            assign_schema(e, cfg);
        }
        out.push_back(std::move(e));
    }
    return out;
}

void refresh_schema(ExtractedTable& t, const Config& cfg) {
    if (!t.table.header_row_index) {
        t.status = TableStatus::no_header;
        t.schema.reset();
        return;
    }
    assign_schema(t, cfg);
}

records::BuildResult build(const ExtractedTable& t, const Config& cfg) {
    if (t.status != TableStatus::ok || !t.schema) return {};
    return records::build_records(t.table, *t.schema, t.context, cfg.lex);
}

std::string table_id_for(const SourceRef& ref, const std::string& suffix) {
    std::string path = ref.url;
    if (auto q = path.find_first_of("?#"); q != std::string::npos) path.erase(q);
    std::string file = path.substr(path.rfind('/') + 1);
    std::string stem = file.substr(0, file.rfind('.'));
    if (stem.empty()) stem = "document";
    std::string safe;
    for (char c : stem) safe.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_');
    return safe + "-" + suffix;
}

json context_to_json(const records::DocumentContext& c) {
    json j{{"test", c.test}, {"matrix", c.matrix}, {"source_url", c.source_url}, {"species_defaulted", c.species_defaulted}};
    j["type"] = c.type ? json(std::string(canon::to_string(*c.type))) : json(nullptr);
    j["species"] = c.species ? json(*c.species) : json(nullptr);
    j["manufacturer"] = c.manufacturer ? json(*c.manufacturer) : json(nullptr);
    return j;
}

records::DocumentContext context_from_json(const json& j) {
    records::DocumentContext c;
    c.test = j.value("test", "");
    c.matrix = j.value("matrix", "");
    c.source_url = j.value("source_url", "");
    c.species_defaulted = j.value("species_defaulted", false);
    if (j.contains("type") && j["type"].is_string()) c.type = canon::method_from_string(j["type"].get<std::string>());
    if (j.contains("species") && j["species"].is_string()) c.species = j["species"].get<std::string>();
    if (j.contains("manufacturer") && j["manufacturer"].is_string()) c.manufacturer = j["manufacturer"].get<std::string>();
    return c;
}

void write_table(const ExtractedTable& t, const fs::path& dir) {
    fs::create_directories(dir);
    std::string grid;
    for (const auto& row : t.table.cells) grid += csv::format_row(row);
    write_file(dir / (t.table_id + ".csv"), grid);
    json gaps = json::array();
    for (const auto& g : t.gaps) gaps.push_back(gap_to_json(g));
    json meta{{"table_id", t.table_id},
              {"status", to_string(t.status)},
              {"detail", t.detail},
              {"source_url", t.table.source.url},
              {"kind", to_string(t.table.source.kind)},
              {"title", t.table.source.title},
              {"context", context_to_json(t.context)},
              {"data_rows_in", t.data_rows_in},
              {"class_rows_dropped", t.class_rows_dropped},
              {"padded_cells", t.table.padded_cells},
              {"gaps", gaps}};
    meta["header_row_index"] = t.table.header_row_index ? json(*t.table.header_row_index) : json(nullptr);
    meta["page_number"] = t.table.page_number ? json(*t.table.page_number) : json(nullptr);
    if (t.grid) {
        json rows = json::array();
        json cols = json::array();
        for (const auto& b : t.grid->row_bands) rows.push_back({b.lo, b.hi});
        for (const auto& b : t.grid->col_bands) cols.push_back({b.lo, b.hi});
        meta["grid"] = json{{"row_bands", rows}, {"col_bands", cols}};
    }
    write_file(dir / (t.table_id + ".meta.json"), meta.dump(2) + "\n");
}

ExtractedTable read_table(const fs::path& csv_path, const Config& cfg) {
    ExtractedTable t;
    auto meta_path = csv_path.parent_path() / (csv_path.stem().string() + ".meta.json");
    json meta;
    try {
        meta = json::parse(read_file(meta_path));
    } catch (const json::exception& e) {
        throw ValidationError(fmt::format("{}: {}", meta_path.string(), e.what()));
    }
    t.table_id = meta.value("table_id", csv_path.stem().string());
    std::vector<std::vector<std::string>> rows;
    for (auto& r : csv::parse(read_file(csv_path))) rows.push_back(std::move(r.fields));
    t.table = RawTable::from_rows(std::move(rows));
    t.table.source.url = meta.value("source_url", "");
    t.table.source.kind = source_kind_from_string(meta.value("kind", "html")).value_or(SourceKind::html);
    t.table.source.title = meta.value("title", "");
    if (meta.contains("header_row_index") && meta["header_row_index"].is_number())
        t.table.header_row_index = meta["header_row_index"].get<std::size_t>();
    if (meta.contains("page_number") && meta["page_number"].is_number())
        t.table.page_number = meta["page_number"].get<int>();
    t.table.padded_cells = meta.value("padded_cells", std::size_t{0});
    t.context = context_from_json(meta.value("context", json::object()));
    t.data_rows_in = meta.value("data_rows_in", std::size_t{0});
    t.class_rows_dropped = meta.value("class_rows_dropped", std::size_t{0});
    for (const auto& g : meta.value("gaps", json::array())) t.gaps.push_back(gap_from_json(g, t.table_id));
    if (meta.contains("grid")) {
        pdftab::GridModel grid;
        for (const auto& b : meta["grid"]["row_bands"]) grid.row_bands.push_back({b[0].get<double>(), b[1].get<double>()});
        for (const auto& b : meta["grid"]["col_bands"]) grid.col_bands.push_back({b[0].get<double>(), b[1].get<double>()});
        t.grid = std::move(grid);
    }
    auto status = table_status_from_string(meta.value("status", "ok")).value_or(TableStatus::ok);
    t.detail = meta.value("detail", "");
    if (status == TableStatus::ok || status == TableStatus::irrelevant) {
        refresh_schema(t, cfg);
    } else {
        t.status = status;
    }
    return t;
}

std::vector<ExtractedTable> read_tables(const fs::path& dir, const Config& cfg) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<ExtractedTable> out;
    for (const auto& f : files) out.push_back(read_table(f, cfg));
    return out;
}

std::string format_gaps(const std::vector<ExtractedTable>& tables) {
    std::string out = "table_id\tseverity\tmissing_terms\tevidence\n";
    for (const auto& t : tables) {
        for (const auto& g : t.gaps) {
            std::vector<std::string> ev;
            for (const auto& s : g.evidence) ev.push_back(s.text);
            out += fmt::format("{}\t{}\t{}\t{}\n", g.table_id, pdftab::to_string(g.severity),
                               text::tsv_safe(text::join(g.missing_terms, ";")), text::tsv_safe(text::join(ev, " | ")));
        }
    }
    return out;
}

std::string curation_report(const std::vector<records::UnknownName>& unknown, const Config& cfg,
                            const canon::CooccurrenceStats& stats, std::size_t max_suggestions) {
    std::string out = "kind\tname\tsuggestions\n";
    for (const auto& u : unknown) {
        const canon::SynonymLexicon* lex = u.kind == canon::NameKind::drug   ? &cfg.lex.drugs
                                           : u.kind == canon::NameKind::test ? &cfg.lex.tests
                                                                             : &cfg.lex.matrices;
        auto ranked = canon::rank_synonym_candidates(u.name, lex->groups(), stats);
        std::vector<std::string> parts;
        for (std::size_t i = 0; i < ranked.size() && parts.size() < max_suggestions; ++i) {
            if (ranked[i].score.never_cooccurs()) continue;
            parts.push_back(fmt::format("{}={:.4f}", ranked[i].canonical, ranked[i].score.bits()));
        }
        out += fmt::format("{}\t{}\t{}\n", canon::to_string(u.kind), text::tsv_safe(u.name), text::join(parts, ";"));
    }
    return out;
}

}  // namespace harvest::pipeline
