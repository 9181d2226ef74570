#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "harvest/fieldmap.hpp"
#include "harvest/html.hpp"
#include "harvest/types.hpp"

namespace harvest::htmltab {

struct PageContext {
    std::string title;
    std::vector<std::string> matrix_hits;  // lowercased, unique, document order
    std::string test_name;

    bool operator==(const PageContext&) const = default;
};

// One RawTable per data-bearing table, document order. Only the innermost
// data-bearing table of a nest is emitted. With `syn`, row 0 becomes the
// header when at least half its cells map to a field; without it, a row of
// <th> cells does.
std::vector<RawTable> extract_html_tables(const SourceDocument& doc,
                                          const fieldmap::HeaderSynonymTable* syn = nullptr);
std::vector<RawTable> extract_html_tables(const html::Document& doc, const SourceRef& ref,
                                          const fieldmap::HeaderSynonymTable* syn = nullptr);

// Text of the page outside tables, scripts and the head.
std::string page_prose(const html::Document& doc);

PageContext derive_page_context(const SourceDocument& doc, const fieldmap::KeywordDictionary& kw);
PageContext derive_page_context(const html::Document& doc, const fieldmap::KeywordDictionary& kw);

// "SNAP NBL Test | IDEXX US" -> "SNAP NBL".
std::string test_name_from_title(std::string_view title);

}  // namespace harvest::htmltab
