#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// Tolerant HTML tree builder: enough of the HTML5 implicit-close rules for
// tables, lists and paragraphs. Structural breakage that cannot be recovered
// (unterminated tags, comments, quoted attributes) raises ParseError with the
// byte offset of the construct.
namespace harvest::html {

struct Node {
    enum class Type { element, text };

    Type type = Type::element;
    std::string tag;  // lowercase; empty for text nodes and the root
    std::vector<std::pair<std::string, std::string>> attrs;
    std::string text;  // decoded UTF-8, text nodes only
    std::vector<std::unique_ptr<Node>> children;
    Node* parent = nullptr;
    std::size_t offset = 0;

    bool is(std::string_view t) const { return type == Type::element && tag == t; }
    std::optional<std::string> attr(std::string_view name) const;

    // Concatenated descendant text; block boundaries become spaces.
    std::string text_content() const;

    template <typename Fn>
    void visit(Fn&& fn) const {
        fn(*this);
        for (const auto& c : children) c->visit(fn);
    }
};

struct Document {
    std::unique_ptr<Node> root;
    std::string charset;  // as declared, lowercase; empty if undeclared

    const Node* find_first(std::string_view tag) const;
    std::vector<const Node*> find_all(std::string_view tag) const;
};

Document parse(std::string_view bytes);

std::string decode_entities(std::string_view s);

}  // namespace harvest::html
