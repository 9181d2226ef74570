#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "harvest/pipeline.hpp"
#include "harvest/records.hpp"

// Fixture access, golden tables and brute-force oracles shared by the unit
// tests and the acceptance runner.
namespace testkit {

namespace fs = std::filesystem;

fs::path fixture(const std::string& rel);
fs::path config_dir();
std::string slurp(const fs::path& p);
void spit(const fs::path& p, const std::string& content);

const harvest::pipeline::Config& config();

class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    fs::path path_;
};

// Transcribed extracted-field tables: drug, sensitivity, matrix, test, url.
struct GoldenRow {
    std::string drug;
    std::string sensitivity;
    std::string matrix;
    std::string test;
    std::string url;
};

std::vector<GoldenRow> load_golden(const std::string& figure);

// (drug, sensitivity, matrix, test, url) after canonicalization.
using RowKey = std::tuple<std::string, std::string, std::string, std::string, std::string>;

RowKey golden_key(const GoldenRow& g, const harvest::pipeline::Config& cfg);
RowKey record_key(const harvest::records::AssayRecord& r);

struct GoldenDiff {
    std::vector<RowKey> missing;     // golden rows without a matching record
    std::vector<RowKey> unexpected;  // records not in the golden table
    bool empty() const { return missing.empty() && unexpected.empty(); }
};

GoldenDiff compare_golden(const std::vector<harvest::records::AssayRecord>& recs, const std::vector<GoldenRow>& golden);
std::string describe(const GoldenDiff& d);

struct Figure {
    std::string name;   // fig4, fig5, fig6, fig7
    std::string spans;  // span fixture file under spans/
    std::string url;
};

const std::vector<Figure>& figures();
const Figure& figure(const std::string& name);

std::vector<harvest::pdftab::TextSpan> figure_spans(const Figure& f);

// `spans` minus the row whose first cell reads exactly `drug`.
std::vector<harvest::pdftab::TextSpan> without_row(const std::vector<harvest::pdftab::TextSpan>& spans,
                                                   const std::string& drug);

harvest::pipeline::ExtractedTable extract_figure(const Figure& f);
std::vector<harvest::records::AssayRecord> figure_records(const Figure& f);

// Records from every PDF figure plus the HTML dairy page.
std::vector<harvest::records::AssayRecord> fixture_dataset();

// PMI by recounting contexts directly; nullopt when x and y never co-occur.
std::optional<double> brute_pmi(const std::vector<std::set<std::string>>& contexts, const std::string& x,
                                const std::string& y);

}  // namespace testkit
