#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "harvest/error.hpp"

namespace harvest::canon {

enum class NameKind { drug, test, matrix, manufacturer };

std::string_view to_string(NameKind k);

struct SynonymGroup {
    std::string canonical;              // most frequent variant
    std::vector<std::string> variants;  // includes canonical
    NameKind kind = NameKind::drug;

    bool operator==(const SynonymGroup&) const = default;
};

// One group per line: canonical<TAB>variant<TAB>... The canonical is added to
// its own variants. Variants must be unique case-insensitively across groups.
std::vector<SynonymGroup> parse_groups(std::string_view content, NameKind kind);
std::vector<SynonymGroup> load_groups(const std::filesystem::path& path, NameKind kind);

struct Canonical {
    std::string name;
    bool matched = false;

    bool operator==(const Canonical&) const = default;
};

// Case-insensitive, whitespace-normalized lookup. Misses return the input
// (space-normalized) with matched=false.
Canonical canonicalize(std::string_view name, const std::vector<SynonymGroup>& groups, NameKind kind);

// Indexed form of the same lookup for hot paths.
class SynonymLexicon {
public:
    SynonymLexicon() = default;
    SynonymLexicon(std::vector<SynonymGroup> groups, NameKind kind);

    Canonical canonicalize(std::string_view name) const;
    const std::vector<SynonymGroup>& groups() const noexcept { return groups_; }
    NameKind kind() const noexcept { return kind_; }

    // Every canonical and variant spelling.
    std::vector<std::string> all_names() const;

    // Longest word-guarded, case-insensitive occurrence of any spelling in
    // `text`; ties go to the earliest position.
    std::optional<Canonical> find_in(std::string_view text) const;

private:
    std::vector<SynonymGroup> groups_;
    NameKind kind_ = NameKind::drug;
    std::unordered_map<std::string, std::size_t> index_;
};

enum class MethodType { Sequential, Competitive, Quantitative };

std::string_view to_string(MethodType t);
std::optional<MethodType> method_from_string(std::string_view s);

struct MethodSplit {
    std::string name;
    std::optional<MethodType> type;

    bool operator==(const MethodSplit&) const = default;
};

// Pulls an assay-method keyword written as a comma-separated prefix/suffix or
// as the leading token out of a name field.
MethodSplit split_method_qualifier(std::string_view raw_name);

// Document-frequency counts over contexts (one context = one table's token set).
struct CooccurrenceStats {
    std::unordered_map<std::string, std::uint64_t> unigram_counts;
    std::map<std::pair<std::string, std::string>, std::uint64_t> pair_counts;  // first < second
    std::uint64_t total_contexts = 0;

    std::uint64_t unigram(const std::string& x) const;
    std::uint64_t pair(const std::string& x, const std::string& y) const;

    void add_context(const std::set<std::string>& tokens);
    void merge(const CooccurrenceStats& other);

    bool operator==(const CooccurrenceStats&) const = default;
};

// Token set of one table context: every cell tokenized.
std::set<std::string> context_tokens(const std::vector<std::vector<std::string>>& cells);

CooccurrenceStats build_stats(const std::vector<std::set<std::string>>& contexts);

class DomainError : public Error {
public:
    using Error::Error;
};

// Raw PMI in bits, or the explicit never-co-occurs value. Never orders below
// every finite score.
class PmiScore {
public:
    static PmiScore never() { return PmiScore(); }
    static PmiScore of(double bits) { return PmiScore(bits); }

    bool never_cooccurs() const noexcept { return never_; }
    // Throws DomainError for the never-co-occurs value.
    double bits() const;

    std::partial_ordering operator<=>(const PmiScore& o) const;
    bool operator==(const PmiScore& o) const;

private:
    PmiScore() = default;
    explicit PmiScore(double v) : never_(false), value_(v) {}
    bool never_ = true;
    double value_ = 0;
};

// log2(P(x,y) / (P(x) P(y))). Throws DomainError when either unigram count is 0.
PmiScore pmi(const std::string& x, const std::string& y, const CooccurrenceStats& stats);

struct Candidate {
    std::string canonical;
    PmiScore score = PmiScore::never();
};

// Advisory ranking: best token-level PMI between the unknown name and each
// group's spellings, descending, ties by canonical name.
std::vector<Candidate> rank_synonym_candidates(std::string_view unknown, const std::vector<SynonymGroup>& groups,
                                               const CooccurrenceStats& stats);

}  // namespace harvest::canon
