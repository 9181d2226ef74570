#include "harvest/consolidate.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "harvest/csv.hpp"
#include "harvest/error.hpp"
#include "harvest/text.hpp"

namespace harvest::consolidate {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kHistoryHeader = "at\taction\tdrug\ttest\tmatrix\ttype\told\tnew\tsource_url";

void validate(const AssayRecord& r, std::size_t index) {
    auto bad = [&](std::string_view what) {
        throw ValidationError(fmt::format("incoming record {} ({}): empty {}", index + 1, r.drug, what));
    };
    if (text::trim(r.drug).empty()) bad("drug");
    if (text::trim(r.test).empty()) bad("test");
    if (text::trim(r.matrix).empty()) bad("matrix");
    if (text::trim(r.source_url).empty()) bad("source URL");
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(fmt::format("cannot open {}", p.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const fs::path& p, const std::string& content) {
    auto tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error(fmt::format("cannot write {}", tmp.string()));
    }
    fs::rename(tmp, p);
}

}  // namespace

std::string_view to_string(Action a) {
    switch (a) {
        case Action::inserted: return "inserted";
        case Action::updated: return "updated";
        case Action::unchanged: return "unchanged";
        case Action::withdrawn: return "withdrawn";
    }
    return "?";
}

std::optional<Action> action_from_string(std::string_view s) {
    for (auto a : {Action::inserted, Action::updated, Action::unchanged, Action::withdrawn}) {
        if (s == to_string(a)) return a;
    }
    return std::nullopt;
}

const AssayRecord* MasterDataset::find(const IdentityKey& key) const {
    auto it = records.find(key);
    return it == records.end() ? nullptr : &it->second;
}

std::vector<AssayRecord> MasterDataset::sorted_records() const {
    std::vector<AssayRecord> out;
    out.reserve(records.size());
    for (const auto& [k, r] : records) out.push_back(r);
    return out;
}

MergeSummary summarize(const std::vector<MergeOutcome>& outcomes) {
    MergeSummary s;
    for (const auto& o : outcomes) {
        if (o.action == Action::inserted) ++s.inserted;
        if (o.action == Action::updated) ++s.updated;
        if (o.action == Action::unchanged) ++s.unchanged;
    }
    return s;
}

std::vector<MergeOutcome> merge_into(MasterDataset& ds, const std::vector<AssayRecord>& incoming, Timestamp at) {
    for (std::size_t i = 0; i < incoming.size(); ++i) validate(incoming[i], i);
    // Last writer wins within a batch: only the final record per key is applied.
    std::map<IdentityKey, std::size_t> last;
    for (std::size_t i = 0; i < incoming.size(); ++i) last[incoming[i].key()] = i;
    std::vector<MergeOutcome> outcomes;
    outcomes.reserve(last.size());
    for (std::size_t i = 0; i < incoming.size(); ++i) {
        const auto& r = incoming[i];
        if (last[r.key()] != i) continue;
        MergeOutcome o;
        o.key = r.key();
        o.source_url = r.source_url;
        o.at = at;
        o.new_sensitivity = r.sensitivity;
        auto it = ds.records.find(o.key);
        if (it == ds.records.end()) {
            o.action = Action::inserted;
            ds.records.emplace(o.key, r);
        } else if (!records::same_value(it->second.sensitivity, r.sensitivity)) {
            o.action = Action::updated;
            o.old_sensitivity = it->second.sensitivity;
            it->second = r;
        } else {
            o.action = Action::unchanged;
            o.old_sensitivity = it->second.sensitivity;
        }
        if (o.action != Action::unchanged) ds.history.push_back(o);
        outcomes.push_back(std::move(o));
    }
    return outcomes;
}

std::pair<MasterDataset, std::vector<MergeOutcome>> merge(const MasterDataset& ds,
                                                          const std::vector<AssayRecord>& incoming, Timestamp at) {
    MasterDataset next = ds;
    auto outcomes = merge_into(next, incoming, at);
    return {std::move(next), std::move(outcomes)};
}

bool withdraw(MasterDataset& ds, const IdentityKey& key, Timestamp at, const std::string& reason) {
    auto it = ds.records.find(key);
    if (it == ds.records.end()) return false;
    MergeOutcome o;
    o.key = key;
    o.action = Action::withdrawn;
    o.old_sensitivity = it->second.sensitivity;
    o.source_url = reason.empty() ? it->second.source_url : reason;
    o.at = at;
    ds.history.push_back(std::move(o));
    ds.records.erase(it);
    return true;
}

std::string export_csv(const MasterDataset& ds) {
    return records::write_csv(ds.sorted_records());
}

std::string export_history(const MasterDataset& ds) {
    std::string out(kHistoryHeader);
    out.push_back('\n');
    auto fmt_value = [](const std::optional<SensitivityValue>& v) {
        return v ? records::format_sensitivity(*v) : std::string();
    };
    for (const auto& h : ds.history) {
        out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", format_rfc3339(h.at), to_string(h.action),
                           text::tsv_safe(h.key.drug), text::tsv_safe(h.key.test), text::tsv_safe(h.key.matrix),
                           h.key.type, fmt_value(h.old_sensitivity), fmt_value(h.new_sensitivity),
                           text::tsv_safe(h.source_url));
    }
    return out;
}

MasterDataset load_csv(std::string_view content) {
    auto rows = csv::parse(content);
    if (rows.empty()) throw ValidationError("line 1: missing header", 1);
    if (rows.front().fields != records::kCsvHeader)
        throw ValidationError(fmt::format("line 1: header must be {}", text::join(records::kCsvHeader, ",")), 1);
    MasterDataset ds;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        auto r = records::from_csv_fields(rows[i].fields, rows[i].line);
        auto key = r.key();
        if (!ds.records.emplace(key, std::move(r)).second)
            throw ValidationError(fmt::format("line {}: duplicate identity key ({}, {}, {}, {})", rows[i].line, key.drug,
                                              key.test, key.matrix, key.type.empty() ? "-" : key.type),
                                  rows[i].line);
    }
    return ds;
}

std::vector<MergeOutcome> load_history(std::string_view content) {
    std::vector<MergeOutcome> out;
    std::size_t line_no = 0;
    for (const auto& raw : text::split(content, '\n')) {
        ++line_no;
        if (raw.empty() || (line_no == 1 && raw == kHistoryHeader)) continue;
        auto f = text::split(raw, '\t');
        if (f.size() != 9) throw ValidationError(fmt::format("history line {}: expected 9 fields", line_no), line_no);
        MergeOutcome o;
        try {
            o.at = parse_rfc3339(f[0]);
        } catch (const ParseError&) {
            throw ValidationError(fmt::format("history line {}: bad timestamp", line_no), line_no);
        }
        auto action = action_from_string(f[1]);
        if (!action) throw ValidationError(fmt::format("history line {}: unknown action '{}'", line_no, f[1]), line_no);
        o.action = *action;
        o.key = IdentityKey{f[2], f[3], f[4], f[5]};
        try {
            if (!f[6].empty()) o.old_sensitivity = records::parse_sensitivity(f[6], std::nullopt);
            if (!f[7].empty()) o.new_sensitivity = records::parse_sensitivity(f[7], std::nullopt);
        } catch (const ParseError& e) {
            throw ValidationError(fmt::format("history line {}: {}", line_no, e.what()), line_no);
        }
        o.source_url = f[8];
        out.push_back(std::move(o));
    }
    return out;
}

fs::path default_history_path(const fs::path& csv_path) {
    auto p = csv_path;
    p += ".history.tsv";
    return p;
}

void save(const MasterDataset& ds, const fs::path& csv_path, const std::optional<fs::path>& history_path) {
    write_file_atomic(csv_path, export_csv(ds));
    write_file_atomic(history_path.value_or(default_history_path(csv_path)), export_history(ds));
}

MasterDataset load(const fs::path& csv_path, const std::optional<fs::path>& history_path) {
    auto ds = load_csv(read_file(csv_path));
    auto hp = history_path.value_or(default_history_path(csv_path));
    if (fs::exists(hp)) ds.history = load_history(read_file(hp));
    return ds;
}

}  // namespace harvest::consolidate
