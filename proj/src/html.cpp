#include "harvest/html.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <regex>

#include <fmt/format.h>

#include "harvest/error.hpp"
#include "harvest/text.hpp"

namespace harvest::html {

namespace {

constexpr std::array kVoid = {"area", "base", "br", "col", "embed", "hr", "img", "input",
                              "link", "meta", "param", "source", "track", "wbr"};
constexpr std::array kRawText = {"script", "style", "textarea", "title"};
constexpr std::array kBlock = {"p",  "div", "table", "tr", "td", "th", "li", "ul", "ol", "h1", "h2", "h3",
                               "h4", "h5",  "h6",    "br", "section", "article", "header", "footer", "caption",
                               "thead", "tbody", "tfoot", "dt", "dd", "dl", "blockquote", "pre", "title"};
constexpr std::array kClosesP = {"p",  "div", "table", "ul", "ol", "h1", "h2", "h3", "h4", "h5",
                                 "h6", "section", "article", "header", "footer", "blockquote", "pre", "dl"};

template <std::size_t N>
bool in(const std::array<const char*, N>& set, std::string_view tag) {
    return std::any_of(set.begin(), set.end(), [&](const char* s) { return tag == s; });
}

bool is_name_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) != 0;
}

bool is_name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '-' || c == '_' || c == ':';
}

void append_cp(std::string& out, unsigned long cp) {
    if (cp == 0 || cp > 0x10FFFF) cp = 0xFFFD;
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

struct Entity {
    const char* name;
    unsigned long cp;
};

constexpr std::array<Entity, 28> kEntities = {{
    {"amp", '&'},        {"lt", '<'},         {"gt", '>'},        {"quot", '"'},     {"apos", '\''},
    {"nbsp", 0xA0},      {"micro", 0xB5},     {"deg", 0xB0},      {"plusmn", 0xB1},  {"mu", 0x3BC},
    {"ndash", 0x2013},   {"mdash", 0x2014},   {"copy", 0xA9},     {"reg", 0xAE},     {"trade", 0x2122},
    {"le", 0x2264},      {"ge", 0x2265},      {"times", 0xD7},    {"middot", 0xB7},  {"rsquo", 0x2019},
    {"lsquo", 0x2018},   {"rdquo", 0x201D},   {"ldquo", 0x201C},  {"hellip", 0x2026}, {"bull", 0x2022},
    {"sup2", 0xB2},      {"eacute", 0xE9},    {"beta", 0x3B2},
}};

class Builder {
public:
    Builder(std::string_view src, bool latin1) : src_(src), latin1_(latin1) {
        root_ = std::make_unique<Node>();
        stack_.push_back(root_.get());
    }

    std::unique_ptr<Node> run() {
        std::size_t text_start = 0;
        while (pos_ < src_.size()) {
            if (src_[pos_] != '<') {
                ++pos_;
                continue;
            }
            std::size_t lt = pos_;
            auto kind = classify(lt);
            if (kind == Kind::text) {
                ++pos_;
                continue;
            }
            flush_text(text_start, lt);
            switch (kind) {
                case Kind::comment: skip_comment(lt); break;
                case Kind::decl: skip_decl(lt); break;
                case Kind::end_tag: end_tag(lt); break;
                case Kind::start_tag: start_tag(lt); break;
                case Kind::text: break;
            }
            text_start = pos_;
        }
        flush_text(text_start, src_.size());
        return std::move(root_);
    }

private:
    enum class Kind { text, comment, decl, end_tag, start_tag };

    Kind classify(std::size_t lt) const {
        if (lt + 1 >= src_.size()) return Kind::text;
        char n = src_[lt + 1];
        if (n == '!') return src_.substr(lt, 4) == "<!--" ? Kind::comment : Kind::decl;
        if (n == '?') return Kind::decl;
        if (n == '/' && lt + 2 < src_.size() && is_name_start(src_[lt + 2])) return Kind::end_tag;
        if (is_name_start(n)) return Kind::start_tag;
        return Kind::text;
    }

    std::string decode(std::string_view raw) const {
        std::string s = latin1_ ? text::cp1252_to_utf8(raw)
                                : (text::is_valid_utf8(raw) ? std::string(raw) : text::cp1252_to_utf8(raw));
        return decode_entities(s);
    }

    void flush_text(std::size_t b, std::size_t e) {
        if (e <= b) return;
        auto node = std::make_unique<Node>();
        node->type = Node::Type::text;
        node->text = decode(src_.substr(b, e - b));
        node->offset = b;
        append(std::move(node));
    }

    void append(std::unique_ptr<Node> node) {
        node->parent = stack_.back();
        stack_.back()->children.push_back(std::move(node));
    }

    void skip_comment(std::size_t lt) {
        auto end = src_.find("-->", lt + 4);
        if (end == std::string_view::npos) throw ParseError(fmt::format("unterminated comment at byte {}", lt), lt);
        pos_ = end + 3;
    }

    void skip_decl(std::size_t lt) {
        auto end = src_.find('>', lt);
        if (end == std::string_view::npos)
            throw ParseError(fmt::format("unterminated declaration at byte {}", lt), lt);
        pos_ = end + 1;
    }

    std::string read_name() {
        std::size_t b = pos_;
        while (pos_ < src_.size() && is_name_char(src_[pos_])) ++pos_;
        return text::to_lower(src_.substr(b, pos_ - b));
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    void end_tag(std::size_t lt) {
        pos_ = lt + 2;
        auto name = read_name();
        auto gt = src_.find('>', pos_);
        if (gt == std::string_view::npos) throw ParseError(fmt::format("unterminated end tag at byte {}", lt), lt);
        pos_ = gt + 1;
        close(name);
    }

    // Pops to the nearest open `name`; ignored if not open.
    void close(std::string_view name) {
        for (std::size_t i = stack_.size(); i-- > 1;) {
            if (stack_[i]->tag == name) {
                stack_.resize(i);
                return;
            }
            // an end tag never escapes the table it appears in
            if (stack_[i]->tag == "table" && name != "table") return;
        }
    }

    bool is_open(std::string_view name, std::string_view boundary) const {
        for (std::size_t i = stack_.size(); i-- > 1;) {
            if (stack_[i]->tag == name) return true;
            if (stack_[i]->tag == boundary) return false;
        }
        return false;
    }

    // Pops open elements in `names` until a boundary element is reached.
    template <std::size_t N, std::size_t M>
    void close_until(const std::array<const char*, N>& names, const std::array<const char*, M>& boundary) {
        while (stack_.size() > 1) {
            const auto& tag = stack_.back()->tag;
            if (in(boundary, tag)) return;
            if (!in(names, tag)) return;
            stack_.pop_back();
        }
    }

    void implicit_closes(const std::string& tag) {
        static constexpr std::array<const char*, 1> kTableB = {"table"};
        static constexpr std::array<const char*, 3> kCells = {"td", "th", "p"};
        static constexpr std::array<const char*, 4> kRowish = {"td", "th", "tr", "p"};
        static constexpr std::array<const char*, 7> kSections = {"td", "th", "tr", "thead", "tbody", "tfoot", "p"};
        static constexpr std::array<const char*, 2> kListB = {"ul", "ol"};
        static constexpr std::array<const char*, 2> kLi = {"li", "p"};
        if (in(kClosesP, tag) && is_open("p", "table")) close("p");
        if (tag == "td" || tag == "th") {
            close_until(kCells, kTableB);
        } else if (tag == "tr") {
            close_until(kRowish, kTableB);
        } else if (tag == "thead" || tag == "tbody" || tag == "tfoot") {
            close_until(kSections, kTableB);
        } else if (tag == "li") {
            if (is_open("li", "ul") || is_open("li", "ol")) close_until(kLi, kListB);
        }
    }

    void start_tag(std::size_t lt) {
        pos_ = lt + 1;
        auto node = std::make_unique<Node>();
        node->tag = read_name();
        node->offset = lt;
        bool self_closing = false;
        while (true) {
            skip_ws();
            if (pos_ >= src_.size())
                throw ParseError(fmt::format("unterminated <{}> tag at byte {}", node->tag, lt), lt);
            char c = src_[pos_];
            if (c == '>') {
                ++pos_;
                break;
            }
            if (c == '/') {
                self_closing = true;
                ++pos_;
                continue;
            }
            if (c == '<') throw ParseError(fmt::format("unterminated <{}> tag at byte {}", node->tag, lt), lt);
            std::size_t name_start = pos_;
            while (pos_ < src_.size() && !std::isspace(static_cast<unsigned char>(src_[pos_])) &&
                   src_[pos_] != '=' && src_[pos_] != '>' && src_[pos_] != '/')
                ++pos_;
            std::string name = text::to_lower(src_.substr(name_start, pos_ - name_start));
            skip_ws();
            std::string value;
            if (pos_ < src_.size() && src_[pos_] == '=') {
                ++pos_;
                skip_ws();
                if (pos_ < src_.size() && (src_[pos_] == '"' || src_[pos_] == '\'')) {
                    char q = src_[pos_];
                    std::size_t qpos = pos_;
                    auto end = src_.find(q, pos_ + 1);
                    if (end == std::string_view::npos)
                        throw ParseError(fmt::format("unterminated attribute value at byte {}", qpos), qpos);
                    value = decode(src_.substr(pos_ + 1, end - pos_ - 1));
                    pos_ = end + 1;
                } else {
                    std::size_t b = pos_;
                    while (pos_ < src_.size() && !std::isspace(static_cast<unsigned char>(src_[pos_])) &&
                           src_[pos_] != '>')
                        ++pos_;
                    value = decode(src_.substr(b, pos_ - b));
                }
            }
            if (!name.empty()) node->attrs.emplace_back(std::move(name), std::move(value));
        }
        implicit_closes(node->tag);
        std::string tag = node->tag;
        Node* raw = node.get();
        append(std::move(node));
        if (in(kVoid, tag) || self_closing) return;
        if (in(kRawText, tag)) {
            std::string close_tag = "</" + tag;
            std::size_t search = pos_;
            std::size_t end = std::string_view::npos;
            while (true) {
                end = src_.find("</", search);
                if (end == std::string_view::npos) break;
                if (text::iequals(src_.substr(end, close_tag.size()), close_tag)) break;
                search = end + 2;
            }
            if (end == std::string_view::npos)
                throw ParseError(fmt::format("unterminated <{}> element at byte {}", tag, lt), lt);
            if (tag == "title" || tag == "textarea") {
                auto t = std::make_unique<Node>();
                t->type = Node::Type::text;
                t->text = decode(src_.substr(pos_, end - pos_));
                t->offset = pos_;
                t->parent = raw;
                raw->children.push_back(std::move(t));
            }
            auto gt = src_.find('>', end);
            if (gt == std::string_view::npos)
                throw ParseError(fmt::format("unterminated end tag at byte {}", end), end);
            pos_ = gt + 1;
            return;
        }
        stack_.push_back(raw);
    }

    std::string_view src_;
    bool latin1_;
    std::size_t pos_ = 0;
    std::unique_ptr<Node> root_;
    std::vector<Node*> stack_;
};

std::string sniff_charset(std::string_view bytes) {
    static const std::regex re(R"(<meta[^>]*charset\s*=\s*["']?\s*([A-Za-z0-9_\-]+))", std::regex::icase);
    std::string head(bytes.substr(0, 4096));
    std::smatch m;
    if (std::regex_search(head, m, re)) return text::to_lower(m[1].str());
    return {};
}

void collect_text(const Node& n, std::string& out) {
    if (n.type == Node::Type::text) {
        out += n.text;
        return;
    }
    if (n.is("script") || n.is("style")) return;
    bool block = in(kBlock, n.tag);
    if (block) out.push_back(' ');
    for (const auto& c : n.children) collect_text(*c, out);
    if (block) out.push_back(' ');
}

}  // namespace

std::optional<std::string> Node::attr(std::string_view name) const {
    for (const auto& [k, v] : attrs) {
        if (k == name) return v;
    }
    return std::nullopt;
}

std::string Node::text_content() const {
    std::string out;
    collect_text(*this, out);
    return text::normalize_space(out);
}

const Node* Document::find_first(std::string_view tag) const {
    const Node* found = nullptr;
    root->visit([&](const Node& n) {
        if (!found && n.is(tag)) found = &n;
    });
    return found;
}

std::vector<const Node*> Document::find_all(std::string_view tag) const {
    std::vector<const Node*> out;
    root->visit([&](const Node& n) {
        if (n.is(tag)) out.push_back(&n);
    });
    return out;
}

std::string decode_entities(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '&') {
            out.push_back(s[i]);
            continue;
        }
        auto semi = s.find(';', i);
        if (semi == std::string_view::npos || semi - i > 10) {
            out.push_back('&');
            continue;
        }
        auto name = s.substr(i + 1, semi - i - 1);
        bool done = false;
        if (!name.empty() && name[0] == '#') {
            unsigned long cp = 0;
            bool ok = name.size() > 1;
            bool hex = name.size() > 1 && (name[1] == 'x' || name[1] == 'X');
            for (std::size_t k = hex ? 2 : 1; ok && k < name.size(); ++k) {
                char c = name[k];
                if (hex && std::isxdigit(static_cast<unsigned char>(c))) {
                    cp = cp * 16 + static_cast<unsigned long>(std::isdigit(static_cast<unsigned char>(c))
                                                                   ? c - '0'
                                                                   : (std::tolower(c) - 'a' + 10));
                } else if (!hex && std::isdigit(static_cast<unsigned char>(c))) {
                    cp = cp * 10 + static_cast<unsigned long>(c - '0');
                } else {
                    ok = false;
                }
                if (cp > 0x10FFFF) ok = false;
            }
            if (ok && (!hex || name.size() > 2)) {
                append_cp(out, cp);
                done = true;
            }
        } else {
            for (const auto& e : kEntities) {
                if (name == e.name) {
                    append_cp(out, e.cp);
                    done = true;
                    break;
                }
            }
        }
        if (done) {
            i = semi;
        } else {
            out.push_back('&');
        }
    }
    return out;
}

Document parse(std::string_view bytes) {
    Document doc;
    doc.charset = sniff_charset(bytes);
    bool latin1 = doc.charset == "iso-8859-1" || doc.charset == "latin1" || doc.charset == "windows-1252" ||
                  doc.charset == "cp1252" || doc.charset == "latin-1";
    doc.root = Builder(bytes, latin1).run();
    return doc;
}

}  // namespace harvest::html
