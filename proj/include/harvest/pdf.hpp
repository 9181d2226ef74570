#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "harvest/error.hpp"
#include "harvest/types.hpp"

// Minimal text-layer reader for PDF: object scan (including object streams),
// page tree, Flate/ASCIIHex/ASCII85 filters, and a text-showing interpreter
// that turns content streams into positioned spans.
namespace harvest::pdf {

// One run of text on a page, coordinates in page units with y growing
// downward from the top of the media box. Superscript runs are folded into
// the preceding span as "^x" markers.
struct TextSpan {
    int page = 1;
    double x = 0;
    double y = 0;
    double width = 0;
    std::string text;

    bool operator==(const TextSpan&) const = default;
};

// Encrypted or image-only documents.
class NoTextLayerError : public Error {
public:
    using Error::Error;
};

// Spans per page in reading order (top to bottom, then left to right).
// Throws NoTextLayerError when no page carries text, ParseError when the file
// is not a readable PDF.
std::vector<std::vector<TextSpan>> scan_pages(std::string_view bytes);
std::vector<std::vector<TextSpan>> scan_pages(const SourceDocument& doc);

// Span fixture format: page<TAB>x<TAB>y<TAB>width<TAB>text per line.
std::vector<TextSpan> parse_spans(std::string_view content);
std::vector<TextSpan> load_spans(const std::string& path);
std::string format_spans(const std::vector<TextSpan>& spans);

}  // namespace harvest::pdf
