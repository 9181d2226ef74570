#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "harvest/canon.hpp"
#include "harvest/fieldmap.hpp"
#include "harvest/htmltab.hpp"
#include "harvest/pdftab.hpp"
#include "harvest/records.hpp"

// End-to-end extraction: documents -> cleaned tables with context -> records.
namespace harvest::pipeline {

struct Config {
    fieldmap::HeaderSynonymTable fields;
    fieldmap::KeywordDictionary keywords;
    records::Lexicons lex;
    canon::SynonymLexicon manufacturers;

    // fields.tsv, keywords.tsv, drugs.tsv, tests.tsv, matrices.tsv and an
    // optional manufacturers.tsv.
    static Config load(const std::filesystem::path& dir);
};

enum class TableStatus { ok, not_a_table, no_header, irrelevant, structural_error };

std::string_view to_string(TableStatus s);
std::optional<TableStatus> table_status_from_string(std::string_view s);

// A cleaned table plus everything needed to turn it into records later.
struct ExtractedTable {
    std::string table_id;
    TableStatus status = TableStatus::ok;
    std::string detail;
    RawTable table;
    std::optional<fieldmap::TableSchema> schema;
    records::DocumentContext context;
    std::size_t data_rows_in = 0;          // rows after the header before cleaning
    std::size_t class_rows_dropped = 0;
    std::vector<pdftab::ExtractionGap> gaps;
    std::optional<pdftab::GridModel> grid;  // PDF only
};

// Document-level fields from free text: test (lexicon scan), matrix (first
// matrix keyword), manufacturer (lexicon scan over text and URL), species
// defaulted to Cattle when the text speaks of cow milk.
records::DocumentContext text_context(const std::string& text, const std::string& source_url, const Config& cfg);

// One page. `table_spans` is the part of the page handed to the table
// reconstructor (normally the whole page); the completeness audit always
// runs against `page_spans`.
ExtractedTable extract_pdf_page(const std::vector<pdftab::TextSpan>& page_spans,
                                const std::vector<pdftab::TextSpan>& table_spans, const SourceRef& ref,
                                const Config& cfg, const std::string& table_id);
ExtractedTable extract_pdf_page(const std::vector<pdftab::TextSpan>& page_spans, const SourceRef& ref,
                                const Config& cfg, const std::string& table_id);

// Every page of a PDF document; pages are reconstructed in parallel.
std::vector<ExtractedTable> extract_pdf(const std::vector<std::vector<pdftab::TextSpan>>& pages, const SourceRef& ref,
                                        const Config& cfg);

std::vector<ExtractedTable> extract_html(const SourceDocument& doc, const Config& cfg);

// Re-derives schema and status after a table edit (e.g. an applied repair).
void refresh_schema(ExtractedTable& t, const Config& cfg);

records::BuildResult build(const ExtractedTable& t, const Config& cfg);

// "<file stem>-p<page>" / "<file stem>-t<index>".
std::string table_id_for(const SourceRef& ref, const std::string& suffix);

// Table files: <id>.csv (grid) and <id>.meta.json.
void write_table(const ExtractedTable& t, const std::filesystem::path& dir);
ExtractedTable read_table(const std::filesystem::path& csv_path, const Config& cfg);
std::vector<ExtractedTable> read_tables(const std::filesystem::path& dir, const Config& cfg);

nlohmann::json context_to_json(const records::DocumentContext& c);
records::DocumentContext context_from_json(const nlohmann::json& j);

// gaps.tsv lines: table_id, severity, terms (";"-joined), evidence text.
std::string format_gaps(const std::vector<ExtractedTable>& tables);

// unknown_names.tsv: kind, name, ranked suggestions "canonical=score;...".
std::string curation_report(const std::vector<records::UnknownName>& unknown, const Config& cfg,
                            const canon::CooccurrenceStats& stats, std::size_t max_suggestions = 3);

}  // namespace harvest::pipeline
