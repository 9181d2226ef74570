#include "harvest/pdf.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <unordered_map>
#include <variant>

#include <fmt/format.h>
#include <zlib.h>

#include "harvest/text.hpp"

namespace harvest::pdf {

namespace {

// ---- object model -------------------------------------------------------

struct Object;
using Array = std::vector<Object>;
using Dict = std::map<std::string, Object, std::less<>>;

struct Ref {
    int num = 0;
    int gen = 0;
};
struct Name {
    std::string s;
};
struct String {
    std::string bytes;
};
struct Keyword {
    std::string s;
};
struct Stream {
    std::shared_ptr<Dict> dict;
    std::string raw;
};

struct Object {
    std::variant<std::monostate, bool, long long, double, String, Name, std::shared_ptr<Array>,
                 std::shared_ptr<Dict>, Ref, std::shared_ptr<Stream>, Keyword>
        v;

    bool is_null() const { return std::holds_alternative<std::monostate>(v); }
    bool is_number() const { return std::holds_alternative<long long>(v) || std::holds_alternative<double>(v); }
    double num(double fallback = 0) const {
        if (auto* i = std::get_if<long long>(&v)) return static_cast<double>(*i);
        if (auto* d = std::get_if<double>(&v)) return *d;
        return fallback;
    }
    const std::string* name() const {
        auto* n = std::get_if<Name>(&v);
        return n != nullptr ? &n->s : nullptr;
    }
    const std::string* str() const {
        auto* s = std::get_if<String>(&v);
        return s != nullptr ? &s->bytes : nullptr;
    }
    const std::string* keyword() const {
        auto* k = std::get_if<Keyword>(&v);
        return k != nullptr ? &k->s : nullptr;
    }
    const Array* array() const {
        auto* a = std::get_if<std::shared_ptr<Array>>(&v);
        return a != nullptr ? a->get() : nullptr;
    }
    const Dict* dict() const {
        if (auto* d = std::get_if<std::shared_ptr<Dict>>(&v)) return d->get();
        if (auto* s = std::get_if<std::shared_ptr<Stream>>(&v)) return (*s)->dict.get();
        return nullptr;
    }
    const Stream* stream() const {
        auto* s = std::get_if<std::shared_ptr<Stream>>(&v);
        return s != nullptr ? s->get() : nullptr;
    }
    const Ref* ref() const { return std::get_if<Ref>(&v); }
};

const Object kNull{};

const Object& get(const Dict* d, std::string_view key) {
    if (d == nullptr) return kNull;
    auto it = d->find(key);
    return it == d->end() ? kNull : it->second;
}

// ---- lexer / parser -----------------------------------------------------

bool is_ws(char c) {
    return c == ' ' || c == '\n' || c == '\r' || c == '\t' || c == '\f' || c == '\0';
}

bool is_delim(char c) {
    return c == '(' || c == ')' || c == '<' || c == '>' || c == '[' || c == ']' || c == '{' || c == '}' ||
           c == '/' || c == '%';
}

int hex_val(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

class Parser {
public:
    explicit Parser(std::string_view s, std::size_t pos = 0) : s_(s), pos_(pos) {}

    std::size_t pos() const { return pos_; }
    void seek(std::size_t p) { pos_ = p; }
    bool at_end() {
        skip_ws();
        return pos_ >= s_.size();
    }

    void skip_ws() {
        while (pos_ < s_.size()) {
            char c = s_[pos_];
            if (is_ws(c)) {
                ++pos_;
            } else if (c == '%') {
                while (pos_ < s_.size() && s_[pos_] != '\n' && s_[pos_] != '\r') ++pos_;
            } else {
                break;
            }
        }
    }

    // Parses one object. Bare words come back as Keyword objects; "n g R"
    // sequences become references.
    Object parse(int depth = 0) {
        if (depth > 64) throw ParseError("object nesting too deep", pos_);
        skip_ws();
        if (pos_ >= s_.size()) throw ParseError("unexpected end of data", pos_);
        char c = s_[pos_];
        if (c == '/') return Object{parse_name()};
        if (c == '(') return Object{parse_literal()};
        if (c == '<') {
            if (pos_ + 1 < s_.size() && s_[pos_ + 1] == '<') return parse_dict(depth);
            return Object{parse_hex()};
        }
        if (c == '[') {
            ++pos_;
            auto arr = std::make_shared<Array>();
            while (true) {
                skip_ws();
                if (pos_ >= s_.size()) throw ParseError("unterminated array", pos_);
                if (s_[pos_] == ']') {
                    ++pos_;
                    break;
                }
                arr->push_back(parse(depth + 1));
            }
            return Object{arr};
        }
        if (c == ']' || c == '>' || c == ')' || c == '{' || c == '}') {
            ++pos_;
            return Object{Keyword{std::string(1, c)}};
        }
        if (c == '+' || c == '-' || c == '.' || std::isdigit(static_cast<unsigned char>(c))) {
            Object n = parse_number();
            if (std::holds_alternative<long long>(n.v)) {
                std::size_t save = pos_;
                skip_ws();
                std::size_t p2 = pos_;
                if (p2 < s_.size() && std::isdigit(static_cast<unsigned char>(s_[p2]))) {
                    Object g = parse_number();
                    skip_ws();
                    if (std::holds_alternative<long long>(g.v) && pos_ < s_.size() && s_[pos_] == 'R' &&
                        (pos_ + 1 >= s_.size() || is_ws(s_[pos_ + 1]) || is_delim(s_[pos_ + 1]))) {
                        ++pos_;
                        return Object{Ref{static_cast<int>(std::get<long long>(n.v)),
                                          static_cast<int>(std::get<long long>(g.v))}};
                    }
                }
                pos_ = save;
            }
            return n;
        }
        std::size_t b = pos_;
        while (pos_ < s_.size() && !is_ws(s_[pos_]) && !is_delim(s_[pos_])) ++pos_;
        std::string word(s_.substr(b, pos_ - b));
        if (word == "true") return Object{true};
        if (word == "false") return Object{false};
        if (word == "null") return Object{};
        return Object{Keyword{std::move(word)}};
    }

    std::string_view rest() const { return s_.substr(pos_); }
    std::string_view source() const { return s_; }

private:
    Object parse_number() {
        std::size_t b = pos_;
        if (s_[pos_] == '+' || s_[pos_] == '-') ++pos_;
        bool real = false;
        while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) {
            real = real || s_[pos_] == '.';
            ++pos_;
        }
        std::string tok(s_.substr(b, pos_ - b));
        if (tok == "+" || tok == "-" || tok == "." || tok.empty()) return Object{0LL};
        if (!real) {
            long long v = 0;
            auto start = tok.data() + (tok[0] == '+' ? 1 : 0);
            auto [p, ec] = std::from_chars(start, tok.data() + tok.size(), v);
            if (ec == std::errc()) return Object{v};
        }
        return Object{std::strtod(tok.c_str(), nullptr)};
    }

    Name parse_name() {
        ++pos_;
        std::string out;
        while (pos_ < s_.size() && !is_ws(s_[pos_]) && !is_delim(s_[pos_])) {
            char c = s_[pos_];
            if (c == '#' && pos_ + 2 < s_.size() && hex_val(s_[pos_ + 1]) >= 0 && hex_val(s_[pos_ + 2]) >= 0) {
                out.push_back(static_cast<char>(hex_val(s_[pos_ + 1]) * 16 + hex_val(s_[pos_ + 2])));
                pos_ += 3;
            } else {
                out.push_back(c);
                ++pos_;
            }
        }
        return Name{std::move(out)};
    }

    String parse_literal() {
        std::size_t start = pos_;
        ++pos_;
        std::string out;
        int depth = 1;
        while (pos_ < s_.size()) {
            char c = s_[pos_++];
            if (c == '\\') {
                if (pos_ >= s_.size()) break;
                char e = s_[pos_++];
                switch (e) {
                    case 'n': out.push_back('\n'); break;
                    case 'r': out.push_back('\r'); break;
                    case 't': out.push_back('\t'); break;
                    case 'b': out.push_back('\b'); break;
                    case 'f': out.push_back('\f'); break;
                    case '\r':
                        if (pos_ < s_.size() && s_[pos_] == '\n') ++pos_;
                        break;
                    case '\n': break;
                    default:
                        if (e >= '0' && e <= '7') {
                            int v = e - '0';
                            for (int k = 0; k < 2 && pos_ < s_.size() && s_[pos_] >= '0' && s_[pos_] <= '7'; ++k)
                                v = v * 8 + (s_[pos_++] - '0');
                            out.push_back(static_cast<char>(v & 0xFF));
                        } else {
                            out.push_back(e);
                        }
                }
            } else if (c == '(') {
                ++depth;
                out.push_back(c);
            } else if (c == ')') {
                if (--depth == 0) return String{std::move(out)};
                out.push_back(c);
            } else {
                out.push_back(c);
            }
        }
        throw ParseError(fmt::format("unterminated string at byte {}", start), start);
    }

    String parse_hex() {
        std::size_t start = pos_;
        ++pos_;
        std::string out;
        int hi = -1;
        while (pos_ < s_.size() && s_[pos_] != '>') {
            int v = hex_val(s_[pos_++]);
            if (v < 0) continue;
            if (hi < 0) {
                hi = v;
            } else {
                out.push_back(static_cast<char>(hi * 16 + v));
                hi = -1;
            }
        }
        if (pos_ >= s_.size()) throw ParseError(fmt::format("unterminated hex string at byte {}", start), start);
        ++pos_;
        if (hi >= 0) out.push_back(static_cast<char>(hi * 16));
        return String{std::move(out)};
    }

    Object parse_dict(int depth) {
        std::size_t start = pos_;
        pos_ += 2;
        auto d = std::make_shared<Dict>();
        while (true) {
            skip_ws();
            if (pos_ + 1 >= s_.size()) throw ParseError(fmt::format("unterminated dictionary at byte {}", start), start);
            if (s_[pos_] == '>' && s_[pos_ + 1] == '>') {
                pos_ += 2;
                break;
            }
            Object key = parse(depth + 1);
            const std::string* k = key.name();
            if (k == nullptr) continue;
            std::string ks = *k;
            skip_ws();
            if (pos_ + 1 < s_.size() && s_[pos_] == '>' && s_[pos_ + 1] == '>') {
                (*d)[ks] = Object{};
                continue;
            }
            (*d)[ks] = parse(depth + 1);
        }
        return Object{d};
    }

    std::string_view s_;
    std::size_t pos_;
};

// ---- filters ------------------------------------------------------------

std::string inflate(std::string_view in) {
    auto run = [&](int window_bits, std::string& out) {
        z_stream zs{};
        if (inflateInit2(&zs, window_bits) != Z_OK) return false;
        zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
        zs.avail_in = static_cast<uInt>(in.size());
        std::array<char, 16384> buf{};
        int rc = Z_OK;
        while (rc == Z_OK) {
            zs.next_out = reinterpret_cast<Bytef*>(buf.data());
            zs.avail_out = static_cast<uInt>(buf.size());
            rc = inflate(&zs, Z_NO_FLUSH);
            out.append(buf.data(), buf.size() - zs.avail_out);
            if (rc == Z_BUF_ERROR && zs.avail_in == 0) break;
        }
        inflateEnd(&zs);
        return rc == Z_STREAM_END || !out.empty();
    };
    std::string out;
    if (run(15 + 32, out)) return out;
    out.clear();
    if (run(-15, out)) return out;
    throw Error("corrupt Flate stream");
}

std::string ascii_hex(std::string_view in) {
    std::string out;
    int hi = -1;
    for (char c : in) {
        if (c == '>') break;
        int v = hex_val(c);
        if (v < 0) continue;
        if (hi < 0) {
            hi = v;
        } else {
            out.push_back(static_cast<char>(hi * 16 + v));
            hi = -1;
        }
    }
    if (hi >= 0) out.push_back(static_cast<char>(hi * 16));
    return out;
}

std::string ascii85(std::string_view in) {
    std::string out;
    std::uint32_t acc = 0;
    int n = 0;
    auto in_begin = in.substr(0, 2) == "<~" ? 2 : 0;
    for (std::size_t i = in_begin; i < in.size(); ++i) {
        char c = in[i];
        if (c == '~') break;
        if (is_ws(c)) continue;
        if (c == 'z' && n == 0) {
            out.append(4, '\0');
            continue;
        }
        if (c < '!' || c > 'u') throw Error("invalid ASCII85 data");
        acc = acc * 85 + static_cast<std::uint32_t>(c - '!');
        if (++n == 5) {
            for (int k = 3; k >= 0; --k) out.push_back(static_cast<char>((acc >> (8 * k)) & 0xFF));
            acc = 0;
            n = 0;
        }
    }
    if (n > 1) {
        for (int k = n; k < 5; ++k) acc = acc * 85 + 84;
        for (int k = 0; k < n - 1; ++k) out.push_back(static_cast<char>((acc >> (8 * (3 - k))) & 0xFF));
    }
    return out;
}

class UnsupportedFilter : public Error {
public:
    using Error::Error;
};

// ---- document -----------------------------------------------------------

class Document {
public:
    explicit Document(std::string_view bytes) : bytes_(bytes) {
        if (bytes.find("%PDF-") == std::string_view::npos || bytes.find("%PDF-") > 1024)
            throw ParseError("missing %PDF header", 0);
        scan_objects();
        expand_object_streams();
        find_trailer();
    }

    const Object& resolve(const Object& o, int depth = 0) const {
        const Ref* r = o.ref();
        if (r == nullptr) return o;
        if (depth > 32) return kNull;
        auto it = objects_.find(r->num);
        if (it == objects_.end()) return kNull;
        return resolve(it->second, depth + 1);
    }

    const Dict* rdict(const Object& o) const { return resolve(o).dict(); }

    std::string decode(const Stream& s) const {
        const Object& filter = resolve(get(s.dict.get(), "Filter"));
        std::vector<std::string> filters;
        if (const auto* n = filter.name()) {
            filters.push_back(*n);
        } else if (const auto* a = filter.array()) {
            for (const auto& f : *a) {
                if (const auto* n2 = resolve(f).name()) filters.push_back(*n2);
            }
        }
        std::string data = s.raw;
        for (const auto& f : filters) {
            if (f == "FlateDecode" || f == "Fl") {
                data = inflate(data);
            } else if (f == "ASCIIHexDecode" || f == "AHx") {
                data = ascii_hex(data);
            } else if (f == "ASCII85Decode" || f == "A85") {
                data = ascii85(data);
            } else {
                throw UnsupportedFilter("unsupported filter " + f);
            }
        }
        return data;
    }

    const Object& root() const { return root_; }
    bool encrypted() const { return encrypted_; }

private:
    void scan_objects() {
        std::size_t pos = 0;
        while ((pos = bytes_.find("obj", pos)) != std::string_view::npos) {
            std::size_t kw = pos;
            pos += 3;
            if (kw > 0 && !is_ws(bytes_[kw - 1])) continue;
            if (pos < bytes_.size() && !is_ws(bytes_[pos]) && !is_delim(bytes_[pos])) continue;
            // walk back over "<num> <gen> "
            std::size_t p = kw;
            while (p > 0 && is_ws(bytes_[p - 1])) --p;
            std::size_t gen_end = p;
            while (p > 0 && std::isdigit(static_cast<unsigned char>(bytes_[p - 1]))) --p;
            if (p == gen_end) continue;
            std::size_t q = p;
            while (q > 0 && is_ws(bytes_[q - 1])) --q;
            if (q == p) continue;
            std::size_t num_end = q;
            while (q > 0 && std::isdigit(static_cast<unsigned char>(bytes_[q - 1]))) --q;
            if (q == num_end) continue;
            int num = std::atoi(std::string(bytes_.substr(q, num_end - q)).c_str());
            try {
                Parser parser(bytes_, pos);
                Object o = parser.parse();
                std::size_t after = parser.pos();
                parser.skip_ws();
                if (parser.rest().substr(0, 6) == "stream" && o.dict() != nullptr) {
                    std::size_t data = parser.pos() + 6;
                    if (data < bytes_.size() && bytes_[data] == '\r') ++data;
                    if (data < bytes_.size() && bytes_[data] == '\n') ++data;
                    auto st = std::make_shared<Stream>();
                    st->dict = std::get<std::shared_ptr<Dict>>(o.v);
                    const Object& len = get(st->dict.get(), "Length");
                    std::size_t end = std::string_view::npos;
                    if (std::holds_alternative<long long>(len.v)) {
                        auto n = static_cast<std::size_t>(std::max(0LL, std::get<long long>(len.v)));
                        if (data + n <= bytes_.size()) {
                            Parser check(bytes_, data + n);
                            check.skip_ws();
                            if (check.rest().substr(0, 9) == "endstream") end = data + n;
                        }
                    }
                    if (end == std::string_view::npos) {
                        end = bytes_.find("endstream", data);
                        if (end == std::string_view::npos) end = bytes_.size();
                        if (end > data && bytes_[end - 1] == '\n') --end;
                        if (end > data && bytes_[end - 1] == '\r') --end;
                    }
                    st->raw = std::string(bytes_.substr(data, end - data));
                    o = Object{st};
                    pos = end;
                } else {
                    pos = after;
                }
                objects_[num] = std::move(o);
            } catch (const ParseError&) {
                // a damaged object does not invalidate the rest of the file
            }
        }
    }

    void expand_object_streams() {
        std::vector<std::pair<int, Object>> found;
        for (const auto& [num, o] : objects_) {
            const Stream* s = o.stream();
            if (s == nullptr) continue;
            const auto* type = get(s->dict.get(), "Type").name();
            if (type == nullptr || *type != "ObjStm") continue;
            try {
                std::string data = decode(*s);
                auto n = static_cast<std::size_t>(resolve(get(s->dict.get(), "N")).num());
                auto first = static_cast<std::size_t>(resolve(get(s->dict.get(), "First")).num());
                Parser header(data);
                std::vector<std::pair<int, std::size_t>> entries;
                for (std::size_t i = 0; i < n; ++i) {
                    Object on = header.parse();
                    Object off = header.parse();
                    entries.emplace_back(static_cast<int>(on.num()), static_cast<std::size_t>(off.num()));
                }
                for (const auto& [on, off] : entries) {
                    if (first + off >= data.size()) continue;
                    Parser body(data, first + off);
                    found.emplace_back(on, body.parse());
                }
            } catch (const Error&) {
            }
        }
        // direct objects win over compressed copies
        for (auto& [num, o] : found) {
            if (!objects_.count(num)) objects_[num] = std::move(o);
        }
    }

    void find_trailer() {
        const Dict* best = nullptr;
        std::size_t pos = 0;
        std::vector<std::shared_ptr<Dict>> keep;
        while ((pos = bytes_.find("trailer", pos)) != std::string_view::npos) {
            pos += 7;
            try {
                Parser p(bytes_, pos);
                Object o = p.parse();
                if (const Dict* d = o.dict(); d != nullptr && !get(d, "Root").is_null()) {
                    keep.push_back(std::get<std::shared_ptr<Dict>>(o.v));
                    best = keep.back().get();
                }
            } catch (const ParseError&) {
            }
        }
        if (best == nullptr) {
            for (const auto& [num, o] : objects_) {
                const Stream* s = o.stream();
                if (s == nullptr) continue;
                const auto* type = get(s->dict.get(), "Type").name();
                if (type != nullptr && *type == "XRef" && !get(s->dict.get(), "Root").is_null()) best = s->dict.get();
            }
        }
        if (best == nullptr) {
            for (const auto& [num, o] : objects_) {
                const Dict* d = o.dict();
                const auto* type = get(d, "Type").name();
                if (type != nullptr && *type == "Catalog") {
                    root_ = o;
                    return;
                }
            }
            throw ParseError("no document catalog found", 0);
        }
        encrypted_ = !get(best, "Encrypt").is_null();
        root_ = resolve(get(best, "Root"));
    }

    std::string_view bytes_;
    std::unordered_map<int, Object> objects_;
    Object root_;
    bool encrypted_ = false;
};

// ---- fonts --------------------------------------------------------------

constexpr std::array<short, 95> kHelvetica = {
    278, 278, 355, 556, 556, 889, 667, 191, 333, 333, 389, 584, 278, 333, 278, 278, 556, 556, 556, 556,
    556, 556, 556, 556, 556, 556, 278, 278, 584, 584, 584, 556, 1015, 667, 667, 722, 722, 667, 611, 778,
    722, 278, 500, 667, 556, 833, 722, 778, 667, 778, 722, 667, 611, 722, 667, 944, 667, 667, 611, 278,
    278, 278, 469, 556, 333, 556, 556, 500, 556, 556, 278, 556, 556, 222, 222, 500, 222, 833, 556, 556,
    556, 556, 333, 500, 278, 556, 500, 722, 500, 500, 500, 334, 260, 334, 584};

struct GlyphName {
    const char* name;
    char32_t cp;
};

constexpr std::array<GlyphName, 40> kGlyphNames = {{
    {"space", U' '},        {"exclam", U'!'},      {"quotedbl", U'"'},    {"numbersign", U'#'},
    {"dollar", U'$'},       {"percent", U'%'},     {"ampersand", U'&'},   {"quotesingle", U'\''},
    {"parenleft", U'('},    {"parenright", U')'},  {"asterisk", U'*'},    {"plus", U'+'},
    {"comma", U','},        {"hyphen", U'-'},      {"period", U'.'},      {"slash", U'/'},
    {"zero", U'0'},         {"one", U'1'},         {"two", U'2'},         {"three", U'3'},
    {"four", U'4'},         {"five", U'5'},        {"six", U'6'},         {"seven", U'7'},
    {"eight", U'8'},        {"nine", U'9'},        {"colon", U':'},       {"semicolon", U';'},
    {"less", U'<'},         {"equal", U'='},       {"greater", U'>'},     {"mu", U'µ'},
    {"degree", U'°'},  {"endash", U'–'}, {"emdash", U'—'}, {"quoteright", U'’'},
    {"quoteleft", U'‘'}, {"bullet", U'•'}, {"underscore", U'_'}, {"plusminus", U'±'},
}};

std::string utf8(char32_t cp) {
    std::string out;
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
    return out;
}

std::optional<std::string> glyph_to_utf8(const std::string& name) {
    if (name.size() == 1 && std::isalpha(static_cast<unsigned char>(name[0]))) return name;
    if (name.size() == 7 && name.rfind("uni", 0) == 0) {
        unsigned v = 0;
        auto [p, ec] = std::from_chars(name.data() + 3, name.data() + 7, v, 16);
        if (ec == std::errc()) return utf8(static_cast<char32_t>(v));
    }
    for (const auto& g : kGlyphNames) {
        if (name == g.name) return utf8(g.cp);
    }
    return std::nullopt;
}

std::string utf16be_to_utf8(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i + 1 < s.size(); i += 2) {
        char32_t u = (static_cast<unsigned char>(s[i]) << 8) | static_cast<unsigned char>(s[i + 1]);
        if (u >= 0xD800 && u < 0xDC00 && i + 3 < s.size()) {
            char32_t lo = (static_cast<unsigned char>(s[i + 2]) << 8) | static_cast<unsigned char>(s[i + 3]);
            u = 0x10000 + ((u - 0xD800) << 10) + (lo - 0xDC00);
            i += 2;
        }
        out += utf8(u);
    }
    return out;
}

std::uint32_t code_of(std::string_view s) {
    std::uint32_t v = 0;
    for (char c : s) v = (v << 8) | static_cast<unsigned char>(c);
    return v;
}

struct Font {
    int bytes_per_code = 1;
    std::unordered_map<std::uint32_t, double> widths;  // glyph space units
    double default_width = 500;
    bool helvetica_fallback = false;
    bool courier = false;
    std::unordered_map<std::uint32_t, std::string> to_unicode;
    std::unordered_map<std::uint32_t, std::string> differences;

    double width(std::uint32_t code) const {
        if (auto it = widths.find(code); it != widths.end()) return it->second;
        if (courier) return 600;
        if (helvetica_fallback && code >= 32 && code <= 126) return kHelvetica[code - 32];
        if (helvetica_fallback) {
            switch (code) {
                case 0x96: case 0xB5: return 556;  // en dash, micro
                case 0x97: return 1000;
                case 0xB0: return 400;
                case 0xB1: return 584;
                case 0xB2: case 0xB3: return 333;
                default: break;
            }
        }
        return default_width;
    }

    std::string text(std::uint32_t code) const {
        if (auto it = to_unicode.find(code); it != to_unicode.end()) return it->second;
        if (auto it = differences.find(code); it != differences.end()) return it->second;
        if (bytes_per_code == 2) return code < 0x80 ? std::string(1, static_cast<char>(code)) : utf8(code);
        char b = static_cast<char>(code & 0xFF);
        return text::cp1252_to_utf8(std::string_view(&b, 1));
    }
};

void parse_cmap(const std::string& data, Font& f) {
    Parser p(data);
    std::vector<Object> operands;
    try {
        while (!p.at_end()) {
            Object o = p.parse();
            const std::string* kw = o.keyword();
            if (kw == nullptr) {
                operands.push_back(std::move(o));
                continue;
            }
            if (*kw == "endbfchar") {
                for (std::size_t i = 0; i + 1 < operands.size(); i += 2) {
                    const auto* src = operands[i].str();
                    const auto* dst = operands[i + 1].str();
                    if (src == nullptr || dst == nullptr) continue;
                    f.to_unicode[code_of(*src)] = utf16be_to_utf8(*dst);
                    if (src->size() == 2) f.bytes_per_code = 2;
                }
            } else if (*kw == "endbfrange") {
                for (std::size_t i = 0; i + 2 < operands.size(); i += 3) {
                    const auto* lo = operands[i].str();
                    const auto* hi = operands[i + 1].str();
                    if (lo == nullptr || hi == nullptr) continue;
                    std::uint32_t a = code_of(*lo);
                    std::uint32_t b = code_of(*hi);
                    if (b < a || b - a > 0xFFFF) continue;
                    if (lo->size() == 2) f.bytes_per_code = 2;
                    if (const auto* dst = operands[i + 2].str()) {
                        std::string base = *dst;
                        for (std::uint32_t c = a; c <= b; ++c) {
                            f.to_unicode[c] = utf16be_to_utf8(base);
                            if (!base.empty()) base.back() = static_cast<char>(base.back() + 1);
                        }
                    } else if (const auto* arr = operands[i + 2].array()) {
                        for (std::uint32_t c = a; c <= b && c - a < arr->size(); ++c) {
                            if (const auto* s = (*arr)[c - a].str()) f.to_unicode[c] = utf16be_to_utf8(*s);
                        }
                    }
                }
            }
            if (*kw != "beginbfchar" && *kw != "beginbfrange") operands.clear();
            else operands.clear();
        }
    } catch (const ParseError&) {
    }
}

Font load_font(const Document& doc, const Dict* fd) {
    Font f;
    const auto* subtype = doc.resolve(get(fd, "Subtype")).name();
    const auto* base = doc.resolve(get(fd, "BaseFont")).name();
    if (subtype != nullptr && *subtype == "Type0") {
        f.bytes_per_code = 2;
        f.default_width = 1000;
        const Array* desc = doc.resolve(get(fd, "DescendantFonts")).array();
        if (desc != nullptr && !desc->empty()) {
            const Dict* cid = doc.rdict((*desc)[0]);
            f.default_width = doc.resolve(get(cid, "DW")).num(1000);
            if (const Array* w = doc.resolve(get(cid, "W")).array()) {
                for (std::size_t i = 0; i < w->size();) {
                    auto c1 = static_cast<std::uint32_t>(doc.resolve((*w)[i]).num());
                    if (i + 1 >= w->size()) break;
                    const Object& next = doc.resolve((*w)[i + 1]);
                    if (const Array* list = next.array()) {
                        for (std::size_t k = 0; k < list->size(); ++k) f.widths[c1 + k] = doc.resolve((*list)[k]).num();
                        i += 2;
                    } else {
                        if (i + 2 >= w->size()) break;
                        auto c2 = static_cast<std::uint32_t>(next.num());
                        double wv = doc.resolve((*w)[i + 2]).num();
                        for (std::uint32_t c = c1; c <= c2 && c - c1 < 0x10000; ++c) f.widths[c] = wv;
                        i += 3;
                    }
                }
            }
        }
    } else {
        const Array* widths = doc.resolve(get(fd, "Widths")).array();
        if (widths != nullptr) {
            auto first = static_cast<std::uint32_t>(doc.resolve(get(fd, "FirstChar")).num());
            for (std::size_t i = 0; i < widths->size(); ++i)
                f.widths[first + static_cast<std::uint32_t>(i)] = doc.resolve((*widths)[i]).num();
            const Dict* descriptor = doc.rdict(get(fd, "FontDescriptor"));
            f.default_width = doc.resolve(get(descriptor, "MissingWidth")).num(500);
        } else {
            f.courier = base != nullptr && base->find("Courier") != std::string::npos;
            f.helvetica_fallback = true;
        }
        const Object& enc = doc.resolve(get(fd, "Encoding"));
        if (const Dict* ed = enc.dict()) {
            if (const Array* diffs = doc.resolve(get(ed, "Differences")).array()) {
                std::uint32_t code = 0;
                for (const auto& item : *diffs) {
                    const Object& r = doc.resolve(item);
                    if (r.is_number()) {
                        code = static_cast<std::uint32_t>(r.num());
                    } else if (const auto* n = r.name()) {
                        if (auto u = glyph_to_utf8(*n)) f.differences[code] = *u;
                        ++code;
                    }
                }
            }
        }
    }
    if (const Stream* tu = doc.resolve(get(fd, "ToUnicode")).stream()) {
        int bpc = f.bytes_per_code;
        try {
            parse_cmap(doc.decode(*tu), f);
        } catch (const Error&) {
        }
        if (subtype != nullptr && *subtype != "Type0") f.bytes_per_code = bpc;
    }
    return f;
}

// ---- content interpreter -------------------------------------------------

struct Matrix {
    double a = 1, b = 0, c = 0, d = 1, e = 0, f = 0;

    static Matrix translate(double tx, double ty) { return {1, 0, 0, 1, tx, ty}; }
    Matrix then(const Matrix& m) const {
        return {a * m.a + b * m.c, a * m.b + b * m.d, c * m.a + d * m.c,
                c * m.b + d * m.d, e * m.a + f * m.c + m.e, e * m.b + f * m.d + m.f};
    }
    std::pair<double, double> apply(double x, double y) const { return {x * a + y * c + e, x * b + y * d + f}; }
};

struct Fragment {
    double x = 0;
    double y = 0;
    double width = 0;
    double size = 0;
    bool raised = false;
    std::string text;
};

struct TextState {
    double tc = 0, tw = 0, th = 1, tl = 0, ts = 0, fs = 0;
    const Font* font = nullptr;
};

class Interpreter {
public:
    Interpreter(const Document& doc, std::vector<Fragment>& out) : doc_(doc), out_(out) {}

    void run(const std::string& content, const Dict* resources, const Matrix& ctm, int depth = 0) {
        if (depth > 8) return;
        Parser p(content);
        std::vector<Object> ops;
        Matrix cur = ctm;
        std::vector<std::pair<Matrix, TextState>> stack;
        Matrix tm;
        Matrix tlm;
        while (true) {
            Object o;
            try {
                if (p.at_end()) break;
                o = p.parse();
            } catch (const ParseError&) {
                break;
            }
            const std::string* kw = o.keyword();
            if (kw == nullptr) {
                ops.push_back(std::move(o));
                continue;
            }
            const std::string& op = *kw;
            auto n = [&](std::size_t i) { return i < ops.size() ? ops[i].num() : 0.0; };
            if (op == "q") {
                stack.emplace_back(cur, ts_);
            } else if (op == "Q") {
                if (!stack.empty()) {
                    cur = stack.back().first;
                    ts_ = stack.back().second;
                    stack.pop_back();
                }
            } else if (op == "cm" && ops.size() >= 6) {
                cur = Matrix{n(0), n(1), n(2), n(3), n(4), n(5)}.then(cur);
            } else if (op == "BT") {
                tm = tlm = Matrix{};
            } else if (op == "Tf" && ops.size() >= 2) {
                ts_.fs = n(1);
                ts_.font = font(resources, ops[0].name());
            } else if (op == "Tc" && !ops.empty()) {
                ts_.tc = n(0);
            } else if (op == "Tw" && !ops.empty()) {
                ts_.tw = n(0);
            } else if (op == "Tz" && !ops.empty()) {
                ts_.th = n(0) / 100.0;
            } else if (op == "TL" && !ops.empty()) {
                ts_.tl = n(0);
            } else if (op == "Ts" && !ops.empty()) {
                ts_.ts = n(0);
            } else if ((op == "Td" || op == "TD") && ops.size() >= 2) {
                if (op == "TD") ts_.tl = -n(1);
                tlm = Matrix::translate(n(0), n(1)).then(tlm);
                tm = tlm;
            } else if (op == "Tm" && ops.size() >= 6) {
                tlm = tm = Matrix{n(0), n(1), n(2), n(3), n(4), n(5)};
            } else if (op == "T*") {
                tlm = Matrix::translate(0, -ts_.tl).then(tlm);
                tm = tlm;
            } else if (op == "Tj" && !ops.empty()) {
                show(ops[0], tm, cur);
            } else if (op == "'" && !ops.empty()) {
                tlm = Matrix::translate(0, -ts_.tl).then(tlm);
                tm = tlm;
                show(ops[0], tm, cur);
            } else if (op == "\"" && ops.size() >= 3) {
                ts_.tw = n(0);
                ts_.tc = n(1);
                tlm = Matrix::translate(0, -ts_.tl).then(tlm);
                tm = tlm;
                show(ops[2], tm, cur);
            } else if (op == "TJ" && !ops.empty()) {
                if (const Array* arr = ops[0].array()) {
                    for (const auto& item : *arr) {
                        if (item.is_number()) {
                            double adj = -item.num() / 1000.0 * ts_.fs * ts_.th;
                            tm = Matrix::translate(adj, 0).then(tm);
                            if (adj > 0.8 * ts_.fs) break_run_ = true;
                        } else {
                            show(item, tm, cur);
                        }
                    }
                }
            } else if (op == "BI") {
                auto id = p.source().find("ID", p.pos());
                auto ei = id == std::string_view::npos ? id : p.source().find("EI", id + 2);
                while (ei != std::string_view::npos &&
                       !(is_ws(p.source()[ei - 1]) && (ei + 2 >= p.source().size() || is_ws(p.source()[ei + 2]))))
                    ei = p.source().find("EI", ei + 2);
                if (ei == std::string_view::npos) break;
                p.seek(ei + 2);
            } else if (op == "Do" && !ops.empty()) {
                run_xobject(resources, ops[0].name(), cur, depth);
            }
            if (op != "TJ") break_run_ = false;
            ops.clear();
        }
    }

private:
    const Font* font(const Dict* resources, const std::string* name) {
        if (name == nullptr) return nullptr;
        const Dict* fonts = doc_.rdict(get(resources, "Font"));
        const Object& ref = get(fonts, *name);
        const Dict* fd = doc_.rdict(ref);
        if (fd == nullptr) return nullptr;
        auto it = fonts_.find(fd);
        if (it == fonts_.end()) it = fonts_.emplace(fd, std::make_unique<Font>(load_font(doc_, fd))).first;
        return it->second.get();
    }

    void run_xobject(const Dict* resources, const std::string* name, const Matrix& ctm, int depth) {
        if (name == nullptr) return;
        const Dict* xobjects = doc_.rdict(get(resources, "XObject"));
        const Stream* s = doc_.resolve(get(xobjects, *name)).stream();
        if (s == nullptr) return;
        const auto* subtype = get(s->dict.get(), "Subtype").name();
        if (subtype == nullptr || *subtype != "Form") return;
        Matrix m;
        if (const Array* mat = doc_.resolve(get(s->dict.get(), "Matrix")).array(); mat != nullptr && mat->size() == 6)
            m = Matrix{(*mat)[0].num(), (*mat)[1].num(), (*mat)[2].num(),
                       (*mat)[3].num(), (*mat)[4].num(), (*mat)[5].num()};
        const Dict* res = doc_.rdict(get(s->dict.get(), "Resources"));
        std::string content;
        try {
            content = doc_.decode(*s);
        } catch (const Error&) {
            return;
        }
        TextState saved = ts_;
        run(content, res != nullptr ? res : resources, m.then(ctm), depth + 1);
        ts_ = saved;
    }

    void show(const Object& o, Matrix& tm, const Matrix& ctm) {
        const std::string* bytes = o.str();
        if (bytes == nullptr || ts_.font == nullptr) {
            if (bytes != nullptr) show_unknown_font(*bytes, tm, ctm);
            return;
        }
        const Font& f = *ts_.font;
        int bpc = f.bytes_per_code;
        Matrix trm_base = tm.then(ctm);
        double size = ts_.fs * std::hypot(trm_base.c, trm_base.d);
        for (std::size_t i = 0; i + static_cast<std::size_t>(bpc) <= bytes->size(); i += static_cast<std::size_t>(bpc)) {
            std::uint32_t code = code_of(std::string_view(*bytes).substr(i, static_cast<std::size_t>(bpc)));
            double w0 = f.width(code) / 1000.0;
            double tx = (w0 * ts_.fs + ts_.tc + (bpc == 1 && code == 32 ? ts_.tw : 0)) * ts_.th;
            std::string glyph = f.text(code);
            Matrix trm = tm.then(ctm);
            auto [x0, y0] = trm.apply(0, 0);
            auto [x1, y1] = trm.apply(w0 * ts_.fs * ts_.th, 0);
            emit_glyph(glyph, x0, y0, x1 - x0, size);
            tm = Matrix::translate(tx, 0).then(tm);
        }
    }

    void show_unknown_font(const std::string& bytes, Matrix& tm, const Matrix& ctm) {
        Matrix trm_base = tm.then(ctm);
        double size = ts_.fs * std::hypot(trm_base.c, trm_base.d);
        for (char ch : bytes) {
            double w0 = 0.5;
            Matrix trm = tm.then(ctm);
            auto [x0, y0] = trm.apply(0, 0);
            auto [x1, y1] = trm.apply(w0 * ts_.fs * ts_.th, 0);
            emit_glyph(text::cp1252_to_utf8(std::string_view(&ch, 1)), x0, y0, x1 - x0, size);
            tm = Matrix::translate((w0 * ts_.fs + ts_.tc) * ts_.th, 0).then(tm);
        }
    }

    // Glyphs accumulate into the current fragment while they continue it on
    // the same baseline; anything else starts a new fragment.
    void emit_glyph(const std::string& glyph, double x, double y, double w, double size) {
        bool raised = ts_.ts > 0;
        bool blank = glyph.empty() || std::all_of(glyph.begin(), glyph.end(), [](char c) {
                         return c == ' ' || c == '\t' || c == '\n' || c == '\r';
                     });
        if (!out_.empty() && open_) {
            Fragment& cur = out_.back();
            double end = cur.x + cur.width;
            bool same_line = std::abs(cur.y - y) < 0.2 * std::max(size, 1.0);
            double gap = x - end;
            if (same_line && cur.raised == raised && !break_run_ && gap > -0.5 * size && gap < 0.6 * size) {
                if (blank) {
                    pending_space_ = true;
                    return;
                }
                if (pending_space_ || gap > 0.2 * size) cur.text.push_back(' ');
                pending_space_ = false;
                cur.text += glyph;
                cur.width = std::max(cur.width, x + w - cur.x);
                return;
            }
        }
        pending_space_ = false;
        if (blank) {
            open_ = !out_.empty() && open_;
            if (open_) pending_space_ = true;
            return;
        }
        out_.push_back(Fragment{x, y, w, size, raised, glyph});
        open_ = true;
        break_run_ = false;
    }

    const Document& doc_;
    std::vector<Fragment>& out_;
    TextState ts_;
    std::map<const Dict*, std::unique_ptr<Font>> fonts_;
    bool open_ = false;
    bool pending_space_ = false;
    bool break_run_ = false;
};

// Attaches superscript fragments to the neighbouring text on the same line.
std::vector<Fragment> fold_superscripts(std::vector<Fragment> frags) {
    std::vector<Fragment> out;
    for (auto& f : frags) {
        if (!out.empty()) {
            Fragment& prev = out.back();
            double gap = f.x - (prev.x + prev.width);
            double ref = std::max(prev.size, f.size);
            bool near = gap > -0.3 * ref && gap < 0.5 * ref;
            bool same_line = std::abs(prev.y - f.y) < 0.2 * ref;
            bool smaller_and_higher = f.size < 0.85 * prev.size && std::abs(f.y - prev.y) < 0.6 * prev.size;
            if (near && f.raised && !prev.raised && (same_line || smaller_and_higher)) {
                prev.text += "^" + f.text;
                prev.width = std::max(prev.width, f.x + f.width - prev.x);
                prev.raised = false;
                continue;
            }
            // text resuming right after a folded superscript, e.g. ")"
            if (near && !f.raised && same_line && prev.text.find('^') != std::string::npos &&
                prev.text.rfind('^') + 3 >= prev.text.size()) {
                if (gap > 0.15 * f.size) prev.text.push_back(' ');
                prev.text += f.text;
                prev.width = std::max(prev.width, f.x + f.width - prev.x);
                continue;
            }
        }
        if (f.raised) f.text = "^" + f.text;
        f.raised = false;
        out.push_back(std::move(f));
    }
    return out;
}

double round3(double v) {
    double r = std::round(v * 1000.0) / 1000.0;
    return r == 0 ? 0 : r;
}

void collect_pages(const Document& doc, const Object& node, const Object& inherited_resources,
                   const Array* inherited_box, std::vector<std::pair<const Dict*, std::pair<Object, const Array*>>>& out,
                   int depth) {
    if (depth > 32) return;
    const Dict* d = doc.rdict(node);
    if (d == nullptr) return;
    Object resources = get(d, "Resources").is_null() ? inherited_resources : get(d, "Resources");
    const Array* box = doc.resolve(get(d, "MediaBox")).array();
    if (box == nullptr) box = inherited_box;
    const auto* type = doc.resolve(get(d, "Type")).name();
    const Array* kids = doc.resolve(get(d, "Kids")).array();
    if (kids != nullptr && (type == nullptr || *type != "Page")) {
        for (const auto& k : *kids) collect_pages(doc, k, resources, box, out, depth + 1);
        return;
    }
    out.push_back({d, {resources, box}});
}

}  // namespace

std::vector<std::vector<TextSpan>> scan_pages(std::string_view bytes) {
    Document doc(bytes);
    if (doc.encrypted()) throw NoTextLayerError("encrypted document: no readable text layer");
    const Dict* root = doc.root().dict();
    if (root == nullptr) throw ParseError("document catalog is not a dictionary", 0);
    std::vector<std::pair<const Dict*, std::pair<Object, const Array*>>> pages;
    collect_pages(doc, get(root, "Pages"), Object{}, nullptr, pages, 0);
    if (pages.empty()) throw ParseError("document has no pages", 0);

    std::vector<std::vector<TextSpan>> result;
    bool any = false;
    for (std::size_t pi = 0; pi < pages.size(); ++pi) {
        const Dict* page = pages[pi].first;
        const Dict* resources = doc.rdict(pages[pi].second.first);
        const Array* box = pages[pi].second.second;
        double left = 0;
        double top = 792;
        if (box != nullptr && box->size() == 4) {
            left = std::min(doc.resolve((*box)[0]).num(), doc.resolve((*box)[2]).num());
            top = std::max(doc.resolve((*box)[1]).num(), doc.resolve((*box)[3]).num());
        }
        std::string content;
        const Object& contents = doc.resolve(get(page, "Contents"));
        auto add = [&](const Object& o) {
            if (const Stream* s = doc.resolve(o).stream()) {
                try {
                    content += doc.decode(*s);
                    content.push_back('\n');
                } catch (const Error&) {
                }
            }
        };
        if (const Array* arr = contents.array()) {
            for (const auto& c : *arr) add(c);
        } else {
            add(contents);
        }
        std::vector<Fragment> frags;
        Interpreter(doc, frags).run(content, resources, Matrix{});
        frags = fold_superscripts(std::move(frags));
        std::vector<TextSpan> spans;
        for (auto& f : frags) {
            auto t = text::normalize_space(f.text);
            if (t.empty()) continue;
            spans.push_back(TextSpan{static_cast<int>(pi + 1), round3(f.x - left), round3(top - f.y),
                                     round3(std::max(0.0, f.width)), std::move(t)});
        }
        std::stable_sort(spans.begin(), spans.end(),
                         [](const TextSpan& a, const TextSpan& b) { return std::tie(a.y, a.x) < std::tie(b.y, b.x); });
        any = any || !spans.empty();
        result.push_back(std::move(spans));
    }
    if (!any) throw NoTextLayerError("no text layer: every page is empty or image-only");
    return result;
}

std::vector<std::vector<TextSpan>> scan_pages(const SourceDocument& doc) {
    return scan_pages(std::string_view(doc.bytes));
}

std::vector<TextSpan> parse_spans(std::string_view content) {
    std::vector<TextSpan> out;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= content.size()) {
        auto nl = content.find('\n', start);
        auto line = content.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        start = nl == std::string_view::npos ? content.size() + 1 : nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        auto f = text::split(line, '\t');
        if (f.size() != 5) throw ParseError(fmt::format("span line {}: expected 5 fields", line_no), 0, line_no);
        TextSpan s;
        auto num = [&](const std::string& v) {
            auto d = text::parse_decimal(v.size() > 0 && v[0] == '-' ? v.substr(1) : v);
            if (!d) throw ParseError(fmt::format("span line {}: bad number '{}'", line_no, v), 0, line_no);
            return v[0] == '-' ? -*d : *d;
        };
        s.page = static_cast<int>(num(f[0]));
        s.x = num(f[1]);
        s.y = num(f[2]);
        s.width = num(f[3]);
        s.text = text::normalize_space(f[4]);
        if (s.page < 1 || s.width < 0 || s.text.empty())
            throw ParseError(fmt::format("span line {}: invalid span", line_no), 0, line_no);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<TextSpan> load_spans(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open span file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_spans(ss.str());
}

std::string format_spans(const std::vector<TextSpan>& spans) {
    std::string out;
    for (const auto& s : spans) {
        out += fmt::format("{}\t{}\t{}\t{}\t{}\n", s.page, text::format_number(s.x), text::format_number(s.y),
                           text::format_number(s.width), text::tsv_safe(s.text));
    }
    return out;
}

}  // namespace harvest::pdf
