#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "harvest/records.hpp"
#include "harvest/types.hpp"

// Master dataset keyed by (drug, test, matrix, type) with an append-only
// history of insertions, sensitivity updates and curator withdrawals.
namespace harvest::consolidate {

using records::AssayRecord;
using records::IdentityKey;
using records::SensitivityValue;

enum class Action { inserted, updated, unchanged, withdrawn };

std::string_view to_string(Action a);
std::optional<Action> action_from_string(std::string_view s);

struct MergeOutcome {
    IdentityKey key;
    Action action = Action::unchanged;
    std::optional<SensitivityValue> old_sensitivity;
    std::optional<SensitivityValue> new_sensitivity;
    std::string source_url;
    Timestamp at{};

    bool operator==(const MergeOutcome&) const = default;
};

struct MasterDataset {
    std::map<IdentityKey, AssayRecord> records;
    std::vector<MergeOutcome> history;  // never holds `unchanged`

    std::size_t size() const { return records.size(); }
    const AssayRecord* find(const IdentityKey& key) const;
    std::vector<AssayRecord> sorted_records() const;

    bool operator==(const MasterDataset&) const = default;
};

struct MergeSummary {
    std::size_t inserted = 0;
    std::size_t updated = 0;
    std::size_t unchanged = 0;
};

MergeSummary summarize(const std::vector<MergeOutcome>& outcomes);

// Applies `incoming` in order: absent key -> inserted; present with a
// different sensitivity (compared in ppb) -> updated, the incoming record
// replaces the stored one; otherwise unchanged. When a key repeats within the
// batch only its last record is applied, so there is one outcome per distinct
// key. Throws ValidationError, before touching `ds`, if any incoming record
// has an empty key component or URL.
std::vector<MergeOutcome> merge_into(MasterDataset& ds, const std::vector<AssayRecord>& incoming, Timestamp at);

std::pair<MasterDataset, std::vector<MergeOutcome>> merge(const MasterDataset& ds,
                                                          const std::vector<AssayRecord>& incoming, Timestamp at);

// Curator removal; returns false when the key is absent.
bool withdraw(MasterDataset& ds, const IdentityKey& key, Timestamp at, const std::string& reason);

// Canonical CSV sorted by identity key.
std::string export_csv(const MasterDataset& ds);
std::string export_history(const MasterDataset& ds);

// Throws ValidationError/ParseError carrying the offending line.
MasterDataset load_csv(std::string_view csv);
std::vector<MergeOutcome> load_history(std::string_view content);

void save(const MasterDataset& ds, const std::filesystem::path& csv_path,
          const std::optional<std::filesystem::path>& history_path);
MasterDataset load(const std::filesystem::path& csv_path,
                   const std::optional<std::filesystem::path>& history_path = std::nullopt);

// Sidecar history path used when none is given: "<csv>.history.tsv".
std::filesystem::path default_history_path(const std::filesystem::path& csv_path);

}  // namespace harvest::consolidate
