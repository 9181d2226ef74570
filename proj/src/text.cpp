#include "harvest/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>

namespace harvest::text {

namespace {

bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_alnum(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

void append_utf8(std::string& out, std::uint32_t cp) {
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

// 0x80..0x9F of windows-1252; zero marks an undefined slot.
constexpr std::array<std::uint16_t, 32> kCp1252High = {
    0x20AC, 0,      0x201A, 0x0192, 0x201E, 0x2026, 0x2020, 0x2021, 0x02C6, 0x2030, 0x0160,
    0x2039, 0x0152, 0,      0x017D, 0,      0,      0x2018, 0x2019, 0x201C, 0x201D, 0x2022,
    0x2013, 0x2014, 0x02DC, 0x2122, 0x0161, 0x203A, 0x0153, 0,      0x017E, 0x0178};

}  // namespace

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string to_upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

std::string normalize_space(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        auto c = static_cast<unsigned char>(s[i]);
        bool space = is_space(c);
        if (c == 0xC2 && i + 1 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0xA0) {
            space = true;
            ++i;
        }
        if (space) {
            pending = !out.empty();
            continue;
        }
        if (pending) {
            out.push_back(' ');
            pending = false;
        }
        out.push_back(static_cast<char>(c));
    }
    return out;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            break;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    }
    return true;
}

bool is_word_char(char c) {
    auto u = static_cast<unsigned char>(c);
    return u >= 0x80 || std::isalnum(u) != 0 || c == '_';
}

std::string strip_footnotes(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '^') {
            std::size_t j = i + 1;
            while (j < s.size() && j - i <= 2 && is_alnum(s[j])) ++j;
            bool marker = j > i + 1 && (j >= s.size() || !is_alnum(s[j]));
            if (marker) {
                while (!out.empty() && is_space(static_cast<unsigned char>(out.back()))) out.pop_back();
                i = j - 1;
                continue;
            }
        }
        out.push_back(s[i]);
    }
    // Glued unit footnotes: "ppbA" -> "ppb".
    std::string cleaned;
    cleaned.reserve(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        bool word_start = i == 0 || !is_word_char(out[i - 1]);
        if (word_start && i + 4 <= out.size()) {
            std::string_view unit(out.data() + i, 3);
            bool glued = (iequals(unit, "ppb") || iequals(unit, "ppm")) &&
                         std::isalpha(static_cast<unsigned char>(out[i + 3])) &&
                         (i + 4 == out.size() || !is_word_char(out[i + 4]));
            if (glued) {
                cleaned.append(unit);
                i += 3;
                continue;
            }
        }
        cleaned.push_back(out[i]);
    }
    return normalize_space(cleaned);
}

std::string format_number(double v) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) return "nan";
    return std::string(buf.data(), end);
}

std::optional<double> parse_decimal(std::string_view token) {
    if (token.empty()) return std::nullopt;
    std::string digits;
    digits.reserve(token.size());
    bool seen_dot = false;
    bool seen_digit = false;
    std::size_t group = 0;
    bool grouped = false;
    for (std::size_t i = 0; i < token.size(); ++i) {
        char c = token[i];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            seen_digit = true;
            digits.push_back(c);
            ++group;
        } else if (c == '.' && !seen_dot) {
            if (grouped && group != 3) return std::nullopt;
            seen_dot = true;
            digits.push_back(c);
            group = 0;
        } else if (c == ',' && !seen_dot && seen_digit) {
            if ((grouped && group != 3) || (!grouped && group > 3)) return std::nullopt;
            grouped = true;
            group = 0;
        } else {
            return std::nullopt;
        }
    }
    if (!seen_digit || digits.back() == '.') return std::nullopt;
    if (grouped && !seen_dot && group != 3) return std::nullopt;
    double value = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
    return value;
}

bool contains_positive_number(std::string_view s) {
    std::string cleaned = strip_footnotes(s);
    std::size_t i = 0;
    while (i < cleaned.size()) {
        if (std::isdigit(static_cast<unsigned char>(cleaned[i])) || cleaned[i] == '.') {
            std::size_t j = i;
            while (j < cleaned.size() &&
                   (std::isdigit(static_cast<unsigned char>(cleaned[j])) || cleaned[j] == '.' ||
                    cleaned[j] == ','))
                ++j;
            std::size_t end = j;
            while (end > i && (cleaned[end - 1] == '.' || cleaned[end - 1] == ',')) --end;
            bool bounded_left = i == 0 || !is_word_char(cleaned[i - 1]);
            bool bounded_right = j >= cleaned.size() || !is_word_char(cleaned[j]);
            if (bounded_left && bounded_right && end > i) {
                auto v = parse_decimal(std::string_view(cleaned).substr(i, end - i));
                if (v && *v > 0) return true;
            }
            i = j;
        } else {
            ++i;
        }
    }
    return false;
}

std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) return;
        bool numeric = std::all_of(cur.begin(), cur.end(),
                                   [](unsigned char c) { return std::isdigit(c) != 0; });
        if (!numeric) out.push_back(to_lower(cur));
        cur.clear();
    };
    for (char c : s) {
        if (is_word_char(c)) {
            cur.push_back(c);
        } else {
            flush();
        }
    }
    flush();
    return out;
}

std::string cp1252_to_utf8(std::string_view s) {
    std::string out;
    out.reserve(s.size() + s.size() / 4);
    for (char ch : s) {
        auto c = static_cast<unsigned char>(ch);
        if (c < 0x80) {
            out.push_back(ch);
        } else if (c < 0xA0) {
            std::uint16_t cp = kCp1252High[c - 0x80];
            append_utf8(out, cp ? cp : 0xFFFD);
        } else {
            append_utf8(out, c);
        }
    }
    return out;
}

bool is_valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        auto c = static_cast<unsigned char>(s[i]);
        std::size_t n = 0;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
            n = 1;
        } else if ((c & 0xF0) == 0xE0) {
            n = 2;
        } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
            n = 3;
        } else {
            return false;
        }
        for (std::size_t k = 1; k <= n; ++k) {
            if (i + k >= s.size()) return false;
            if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
        }
        i += n + 1;
    }
    return true;
}

std::string tsv_safe(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c == '\t' || c == '\n' || c == '\r') c = ' ';
    }
    return out;
}

std::vector<std::size_t> find_word(std::string_view hay, std::string_view needle) {
    std::vector<std::size_t> out;
    if (needle.empty()) return out;
    auto h = to_lower(hay);
    auto n = to_lower(needle);
    auto ascii_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; };
    for (auto pos = h.find(n); pos != std::string::npos; pos = h.find(n, pos + 1)) {
        std::size_t end = pos + n.size();
        bool left = pos == 0 || !ascii_word(h[pos - 1]) || !ascii_word(n.front());
        bool right = end >= h.size() || !ascii_word(h[end]) || !ascii_word(n.back());
        if (left && right) out.push_back(pos);
    }
    return out;
}

}  // namespace harvest::text
