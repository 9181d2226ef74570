#include "harvest/canon.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "harvest/text.hpp"

namespace harvest::canon {

namespace {

std::string key_of(std::string_view name) {
    return text::to_lower(text::normalize_space(name));
}

bool ascii_word(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

}  // namespace

std::string_view to_string(NameKind k) {
    switch (k) {
        case NameKind::drug: return "drug";
        case NameKind::test: return "test";
        case NameKind::matrix: return "matrix";
        case NameKind::manufacturer: return "manufacturer";
    }
    return "?";
}

std::vector<SynonymGroup> parse_groups(std::string_view content, NameKind kind) {
    std::vector<SynonymGroup> groups;
    std::map<std::string, std::size_t> seen;
    std::size_t line_no = 0;
    for (const auto& raw : text::split(content, '\n')) {
        ++line_no;
        auto line = text::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        SynonymGroup g;
        g.kind = kind;
        for (const auto& f : text::split(line, '\t')) {
            auto name = text::normalize_space(f);
            if (name.empty()) continue;
            if (g.canonical.empty()) g.canonical = name;
            auto key = key_of(name);
            auto [it, inserted] = seen.emplace(key, groups.size());
            if (!inserted) {
                if (it->second == groups.size()) continue;  // repeated inside this group
                throw ValidationError(fmt::format("line {}: '{}' already belongs to group '{}'", line_no, name,
                                                  groups[it->second].canonical),
                                      line_no);
            }
            g.variants.push_back(name);
        }
        if (!g.canonical.empty()) groups.push_back(std::move(g));
    }
    return groups;
}

std::vector<SynonymGroup> load_groups(const std::filesystem::path& path, NameKind kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(fmt::format("cannot open {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_groups(ss.str(), kind);
}

Canonical canonicalize(std::string_view name, const std::vector<SynonymGroup>& groups, NameKind kind) {
    auto key = key_of(name);
    for (const auto& g : groups) {
        if (g.kind != kind) continue;
        for (const auto& v : g.variants) {
            if (key_of(v) == key) return {g.canonical, true};
        }
    }
    return {text::normalize_space(name), false};
}

SynonymLexicon::SynonymLexicon(std::vector<SynonymGroup> groups, NameKind kind)
    : groups_(std::move(groups)), kind_(kind) {
    for (std::size_t i = 0; i < groups_.size(); ++i) {
        for (const auto& v : groups_[i].variants) index_.emplace(key_of(v), i);
        index_.emplace(key_of(groups_[i].canonical), i);
    }
}

Canonical SynonymLexicon::canonicalize(std::string_view name) const {
    auto it = index_.find(key_of(name));
    if (it == index_.end()) return {text::normalize_space(name), false};
    return {groups_[it->second].canonical, true};
}

std::vector<std::string> SynonymLexicon::all_names() const {
    std::vector<std::string> out;
    for (const auto& g : groups_) {
        for (const auto& v : g.variants) out.push_back(v);
    }
    return out;
}

std::optional<Canonical> SynonymLexicon::find_in(std::string_view raw) const {
    auto hay = text::to_lower(text::normalize_space(raw));
    std::optional<Canonical> best;
    std::size_t best_len = 0;
    std::size_t best_pos = 0;
    for (const auto& [key, idx] : index_) {
        if (key.empty()) continue;
        std::size_t pos = hay.find(key);
        while (pos != std::string::npos) {
            bool left = pos == 0 || !ascii_word(hay[pos - 1]) || !ascii_word(key.front());
            std::size_t end = pos + key.size();
            bool right = end >= hay.size() || !ascii_word(hay[end]) || !ascii_word(key.back());
            if (left && right) {
                if (!best || key.size() > best_len || (key.size() == best_len && pos < best_pos)) {
                    best = Canonical{groups_[idx].canonical, true};
                    best_len = key.size();
                    best_pos = pos;
                }
                break;
            }
            pos = hay.find(key, pos + 1);
        }
    }
    return best;
}

std::string_view to_string(MethodType t) {
    switch (t) {
        case MethodType::Sequential: return "Sequential";
        case MethodType::Competitive: return "Competitive";
        case MethodType::Quantitative: return "Quantitative";
    }
    return "?";
}

std::optional<MethodType> method_from_string(std::string_view s) {
    auto t = text::trim(s);
    for (auto m : {MethodType::Sequential, MethodType::Competitive, MethodType::Quantitative}) {
        if (text::iequals(t, to_string(m))) return m;
    }
    return std::nullopt;
}

MethodSplit split_method_qualifier(std::string_view raw_name) {
    auto name = text::normalize_space(raw_name);
    auto parts = text::split(name, ',');
    for (auto& p : parts) p = text::trim(p);
    if (parts.size() >= 2) {
        if (auto m = method_from_string(parts.front())) {
            parts.erase(parts.begin());
            return {text::join(parts, ", "), m};
        }
        if (auto m = method_from_string(parts.back())) {
            parts.pop_back();
            return {text::join(parts, ", "), m};
        }
    }
    auto space = name.find(' ');
    if (space != std::string::npos) {
        if (auto m = method_from_string(std::string_view(name).substr(0, space))) {
            return {text::trim(std::string_view(name).substr(space + 1)), m};
        }
    }
    return {name, std::nullopt};
}

std::uint64_t CooccurrenceStats::unigram(const std::string& x) const {
    auto it = unigram_counts.find(x);
    return it == unigram_counts.end() ? 0 : it->second;
}

std::uint64_t CooccurrenceStats::pair(const std::string& x, const std::string& y) const {
    if (x == y) return unigram(x);
    auto key = x < y ? std::make_pair(x, y) : std::make_pair(y, x);
    auto it = pair_counts.find(key);
    return it == pair_counts.end() ? 0 : it->second;
}

void CooccurrenceStats::add_context(const std::set<std::string>& tokens) {
    ++total_contexts;
    for (auto a = tokens.begin(); a != tokens.end(); ++a) {
        ++unigram_counts[*a];
        for (auto b = std::next(a); b != tokens.end(); ++b) ++pair_counts[{*a, *b}];
    }
}

void CooccurrenceStats::merge(const CooccurrenceStats& other) {
    total_contexts += other.total_contexts;
    for (const auto& [k, v] : other.unigram_counts) unigram_counts[k] += v;
    for (const auto& [k, v] : other.pair_counts) pair_counts[k] += v;
}

std::set<std::string> context_tokens(const std::vector<std::vector<std::string>>& cells) {
    std::set<std::string> out;
    for (const auto& row : cells) {
        for (const auto& cell : row) {
            for (auto& t : text::tokenize(cell)) out.insert(std::move(t));
        }
    }
    return out;
}

CooccurrenceStats build_stats(const std::vector<std::set<std::string>>& contexts) {
    CooccurrenceStats stats;
    for (const auto& c : contexts) stats.add_context(c);
    return stats;
}

double PmiScore::bits() const {
    if (never_) throw DomainError("tokens never co-occur");
    return value_;
}

std::partial_ordering PmiScore::operator<=>(const PmiScore& o) const {
    if (never_ && o.never_) return std::partial_ordering::equivalent;
    if (never_) return std::partial_ordering::less;
    if (o.never_) return std::partial_ordering::greater;
    return value_ <=> o.value_;
}

bool PmiScore::operator==(const PmiScore& o) const {
    return never_ == o.never_ && (never_ || value_ == o.value_);
}

PmiScore pmi(const std::string& x, const std::string& y, const CooccurrenceStats& stats) {
    std::uint64_t cx = stats.unigram(x);
    std::uint64_t cy = stats.unigram(y);
    if (cx == 0 || cy == 0)
        throw DomainError(fmt::format("pmi undefined: count({})={}, count({})={}", x, cx, y, cy));
    std::uint64_t cxy = stats.pair(x, y);
    if (cxy == 0) return PmiScore::never();
    // Integer products keep the ratio exact under uniform corpus scaling.
    double num = static_cast<double>(cxy * stats.total_contexts);
    double den = static_cast<double>(cx * cy);
    return PmiScore::of(std::log2(num / den));
}

std::vector<Candidate> rank_synonym_candidates(std::string_view unknown, const std::vector<SynonymGroup>& groups,
                                               const CooccurrenceStats& stats) {
    auto unknown_tokens = text::tokenize(unknown);
    std::vector<Candidate> out;
    for (const auto& g : groups) {
        std::set<std::string> group_tokens;
        for (auto& t : text::tokenize(g.canonical)) group_tokens.insert(std::move(t));
        for (const auto& v : g.variants) {
            for (auto& t : text::tokenize(v)) group_tokens.insert(std::move(t));
        }
        Candidate c{g.canonical, PmiScore::never()};
        for (const auto& x : unknown_tokens) {
            if (stats.unigram(x) == 0) continue;
            for (const auto& y : group_tokens) {
                if (stats.unigram(y) == 0) continue;
                auto s = pmi(x, y, stats);
                if (s > c.score) c.score = s;
            }
        }
        out.push_back(std::move(c));
    }
    std::stable_sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.canonical < b.canonical;
    });
    return out;
}

}  // namespace harvest::canon
