#include "harvest/htmltab.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>

#include "harvest/text.hpp"

namespace harvest::htmltab {

namespace {

using html::Node;

void cell_text(const Node& n, std::string& out) {
    if (n.type == Node::Type::text) {
        out += n.text;
        return;
    }
    if (n.is("sup") || n.is("script") || n.is("style")) return;
    if (n.is("br") || n.is("p") || n.is("div") || n.is("li")) out.push_back(' ');
    for (const auto& c : n.children) cell_text(*c, out);
    if (n.is("p") || n.is("div") || n.is("li")) out.push_back(' ');
}

const Node* owning_table(const Node* n) {
    for (const Node* p = n->parent; p != nullptr; p = p->parent) {
        if (p->is("table")) return p;
    }
    return nullptr;
}

struct Grid {
    std::vector<std::vector<std::string>> rows;
    std::vector<bool> all_th;
};

void collect_rows(const Node& table, const Node& n, Grid& g) {
    for (const auto& c : n.children) {
        if (c->is("table")) continue;
        if (c->is("tr") && owning_table(c.get()) == &table) {
            std::vector<std::string> row;
            bool th = true;
            bool any = false;
            for (const auto& cell : c->children) {
                if (!cell->is("td") && !cell->is("th")) continue;
                any = true;
                th = th && cell->is("th");
                std::string s;
                cell_text(*cell, s);
                row.push_back(text::normalize_space(s));
                int span = 1;
                if (auto cs = cell->attr("colspan")) span = std::clamp(std::atoi(cs->c_str()), 1, 64);
                for (int k = 1; k < span; ++k) row.emplace_back();
            }
            g.rows.push_back(std::move(row));
            g.all_th.push_back(any && th);
            continue;
        }
        collect_rows(table, *c, g);
    }
}

bool data_bearing(const Grid& g) {
    if (g.rows.size() < 2) return false;
    std::size_t non_empty = 0;
    for (const auto& r : g.rows)
        non_empty += static_cast<std::size_t>(std::count_if(r.begin(), r.end(), [](const auto& s) { return !s.empty(); }));
    if (non_empty < 2) return false;
    for (std::size_t i = 1; i < g.rows.size(); ++i) {
        if (std::any_of(g.rows[i].begin(), g.rows[i].end(), [](const auto& s) { return !s.empty(); })) return true;
    }
    return false;
}

bool has_data_descendant(const Node& n, const std::vector<const Node*>& data_tables) {
    for (const auto& c : n.children) {
        if (c->is("table") && std::find(data_tables.begin(), data_tables.end(), c.get()) != data_tables.end())
            return true;
        if (has_data_descendant(*c, data_tables)) return true;
    }
    return false;
}

bool header_by_synonyms(const std::vector<std::string>& row, const fieldmap::HeaderSynonymTable& syn) {
    std::size_t hits = 0;
    for (const auto& cell : row) {
        if (cell.empty()) continue;
        try {
            if (fieldmap::map_header(cell, syn)) ++hits;
        } catch (const fieldmap::AmbiguousHeader&) {
            ++hits;
        }
    }
    return hits > 0 && hits * 2 >= row.size();
}

void prose_text(const Node& n, std::string& out) {
    if (n.type == Node::Type::text) {
        out += n.text;
        return;
    }
    if (n.is("table") || n.is("script") || n.is("style") || n.is("head") || n.is("title")) return;
    bool block = !(n.is("a") || n.is("span") || n.is("b") || n.is("i") || n.is("em") || n.is("strong") ||
                   n.is("sup") || n.is("sub"));
    if (block) out.push_back(' ');
    for (const auto& c : n.children) prose_text(*c, out);
    if (block) out.push_back(' ');
}

}  // namespace

std::vector<RawTable> extract_html_tables(const html::Document& doc, const SourceRef& ref,
                                          const fieldmap::HeaderSynonymTable* syn) {
    auto tables = doc.find_all("table");
    std::vector<Grid> grids(tables.size());
    std::vector<const Node*> data_tables;
    for (std::size_t i = 0; i < tables.size(); ++i) {
        collect_rows(*tables[i], *tables[i], grids[i]);
        if (data_bearing(grids[i])) data_tables.push_back(tables[i]);
    }
    std::string prose = page_prose(doc);
    std::vector<RawTable> out;
    for (std::size_t i = 0; i < tables.size(); ++i) {
        if (std::find(data_tables.begin(), data_tables.end(), tables[i]) == data_tables.end()) continue;
        if (has_data_descendant(*tables[i], data_tables)) continue;
        auto t = RawTable::from_rows(grids[i].rows);
        if (syn != nullptr) {
            if (header_by_synonyms(t.cells.front(), *syn)) t.header_row_index = 0;
        } else if (grids[i].all_th.front()) {
            t.header_row_index = 0;
        }
        t.context_text = prose;
        t.source = ref;
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<RawTable> extract_html_tables(const SourceDocument& doc, const fieldmap::HeaderSynonymTable* syn) {
    return extract_html_tables(html::parse(doc.bytes), doc.ref, syn);
}

std::string page_prose(const html::Document& doc) {
    const Node* body = doc.find_first("body");
    std::string out;
    prose_text(body != nullptr ? *body : *doc.root, out);
    return text::normalize_space(out);
}

std::string test_name_from_title(std::string_view title) {
    std::string t = text::normalize_space(title);
    static constexpr std::array<std::string_view, 5> kSeps = {" | ", " - ", " \xE2\x80\x93 ", " \xE2\x80\x94 ", " : "};
    std::size_t cut = t.size();
    for (auto sep : kSeps) cut = std::min(cut, t.find(sep));
    std::string name = text::trim(std::string_view(t).substr(0, cut));
    static constexpr std::array<std::string_view, 3> kSuffixes = {"tests", "test", "kit"};
    for (auto suf : kSuffixes) {
        if (name.size() > suf.size() + 1 && name[name.size() - suf.size() - 1] == ' ' &&
            text::iequals(std::string_view(name).substr(name.size() - suf.size()), suf)) {
            name = text::trim(std::string_view(name).substr(0, name.size() - suf.size()));
            break;
        }
    }
    return name.empty() ? t : name;
}

PageContext derive_page_context(const html::Document& doc, const fieldmap::KeywordDictionary& kw) {
    PageContext ctx;
    const Node* title = doc.find_first("title");
    if (title != nullptr) ctx.title = title->text_content();
    if (ctx.title.empty()) {
        if (const Node* h1 = doc.find_first("h1")) ctx.title = h1->text_content();
    }
    if (!ctx.title.empty()) ctx.test_name = test_name_from_title(ctx.title);
    for (const auto& hit : fieldmap::keyword_scan(page_prose(doc), kw, fieldmap::KeywordCategory::matrix)) {
        auto m = text::to_lower(hit.term());
        if (std::find(ctx.matrix_hits.begin(), ctx.matrix_hits.end(), m) == ctx.matrix_hits.end())
            ctx.matrix_hits.push_back(std::move(m));
    }
    return ctx;
}

PageContext derive_page_context(const SourceDocument& doc, const fieldmap::KeywordDictionary& kw) {
    return derive_page_context(html::parse(doc.bytes), kw);
}

}  // namespace harvest::htmltab
