#include "harvest/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <future>
#include <regex>
#include <sstream>

#include <fmt/format.h>
#include <httplib.h>
#include <openssl/evp.h>

#include "harvest/html.hpp"
#include "harvest/text.hpp"

namespace harvest::corpus {

namespace fs = std::filesystem;

namespace {

struct UrlParts {
    std::string scheme;
    std::string authority;
    std::string path;
    std::string query;  // with leading '?'
};

std::optional<UrlParts> split_url(std::string_view url) {
    static const std::regex re(R"(^([A-Za-z][A-Za-z0-9+.\-]*):(//([^/?#]*))?([^?#]*)(\?[^#]*)?(#.*)?$)");
    std::string s(url);
    std::smatch m;
    if (!std::regex_match(s, m, re)) return std::nullopt;
    return UrlParts{text::to_lower(m[1].str()), m[3].str(), m[4].str(), m[5].str()};
}

std::string remove_dot_segments(const std::string& path) {
    std::vector<std::string> out;
    auto parts = text::split(path, '/');
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const auto& p = parts[i];
        bool last = i + 1 == parts.size();
        if (p == ".") {
            if (last) out.emplace_back();
            continue;
        }
        if (p == "..") {
            if (out.size() > 1) out.pop_back();
            if (last) out.emplace_back();
            continue;
        }
        out.push_back(p);
    }
    auto joined = text::join(out, "/");
    if (!path.empty() && path[0] == '/' && (joined.empty() || joined[0] != '/')) joined.insert(0, "/");
    return joined;
}

std::string percent_decode(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%' && i + 2 < s.size() && std::isxdigit(static_cast<unsigned char>(s[i + 1])) &&
            std::isxdigit(static_cast<unsigned char>(s[i + 2]))) {
            out.push_back(static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16)));
            i += 2;
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw FetchError(fmt::format("cannot read {}", p.string()), fs::exists(p));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool ends_with_pdf(std::string_view path) {
    return path.size() >= 4 && text::iequals(path.substr(path.size() - 4), ".pdf");
}

std::vector<int> year_tokens(std::string_view s) {
    std::vector<int> out;
    std::size_t i = 0;
    while (i < s.size()) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) {
            ++i;
            continue;
        }
        std::size_t b = i;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
        bool left = b == 0 || !text::is_word_char(s[b - 1]);
        bool right = i >= s.size() || !text::is_word_char(s[i]);
        if (i - b == 4 && left && right) out.push_back(std::stoi(std::string(s.substr(b, 4))));
    }
    return out;
}

ManifestEntry parse_manifest_line(const std::string& line, std::size_t line_no) {
    auto f = text::split(line, '\t');
    if (f.size() != 5) throw ParseError(fmt::format("manifest line {}: expected 5 fields", line_no), 0, line_no);
    auto kind = source_kind_from_string(f[1]);
    if (!kind) throw ParseError(fmt::format("manifest line {}: unknown kind '{}'", line_no, f[1]), 0, line_no);
    ManifestEntry e;
    e.url = f[0];
    e.kind = *kind;
    e.content_hash = f[2];
    try {
        e.fetched_at = parse_rfc3339(f[3]);
    } catch (const ParseError&) {
        throw ParseError(fmt::format("manifest line {}: bad timestamp '{}'", line_no, f[3]), 0, line_no);
    }
    e.title = f[4];
    return e;
}

std::string format_manifest_line(const ManifestEntry& e) {
    return fmt::format("{}\t{}\t{}\t{}\t{}\n", text::tsv_safe(e.url), to_string(e.kind), e.content_hash,
                       format_rfc3339(e.fetched_at), text::tsv_safe(e.title));
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 digest failed");
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", digest[i]);
    return out;
}

std::string to_url(std::string_view path_or_url) {
    if (split_url(path_or_url) && path_or_url.find(':') > 1) return std::string(path_or_url);
    auto abs = fs::absolute(fs::path(path_or_url)).lexically_normal();
    return "file://" + abs.generic_string();
}

std::string resolve_url(std::string_view base, std::string_view href_raw) {
    std::string href = text::trim(href_raw);
    if (auto hash = href.find('#'); hash != std::string::npos) href.erase(hash);
    if (auto parts = split_url(href); parts && href.find(':') > 1) {
        return parts->scheme + ":" + (parts->authority.empty() && parts->scheme != "file" ? "" : "//") +
               parts->authority + remove_dot_segments(parts->path) + parts->query;
    }
    auto b = split_url(base);
    if (!b) throw ValidationError(fmt::format("base URL '{}' is not absolute", base));
    std::string prefix = b->scheme + "://" + b->authority;
    if (href.rfind("//", 0) == 0) return b->scheme + ":" + href;
    if (href.empty()) return prefix + b->path + b->query;
    if (href[0] == '/') {
        auto q = href.find('?');
        std::string path = href.substr(0, q);
        return prefix + remove_dot_segments(path) + (q == std::string::npos ? "" : href.substr(q));
    }
    if (href[0] == '?') return prefix + b->path + href;
    auto dir = b->path.substr(0, b->path.rfind('/') + 1);
    if (dir.empty()) dir = "/";
    auto q = href.find('?');
    std::string path = dir + href.substr(0, q);
    return prefix + remove_dot_segments(path) + (q == std::string::npos ? "" : href.substr(q));
}

std::vector<SourceRef> discover_pdf_links(const SourceDocument& page, std::string_view title_pattern,
                                          const std::set<int>& years) {
    if (title_pattern.empty()) throw ValidationError("title pattern must be non-empty");
    if (years.empty()) throw ValidationError("at least one year is required");
    auto doc = html::parse(page.bytes);
    std::vector<SourceRef> out;
    for (const auto* a : doc.find_all("a")) {
        auto href = a->attr("href");
        if (!href || href->empty()) continue;
        std::string url;
        try {
            url = resolve_url(page.ref.url, *href);
        } catch (const ValidationError&) {
            continue;
        }
        auto parts = split_url(url);
        if (!parts || !ends_with_pdf(parts->path)) continue;
        std::string filename = percent_decode(parts->path.substr(parts->path.rfind('/') + 1));
        std::string link_text = a->text_content();
        bool pattern_hit = text::to_lower(link_text).find(text::to_lower(title_pattern)) != std::string::npos ||
                      text::to_lower(filename).find(text::to_lower(title_pattern)) != std::string::npos;
        if (!pattern_hit) continue;

        std::optional<int> year;
        for (const auto& seg : text::split(parts->path, '/')) {
            if (seg.size() == 4 && std::all_of(seg.begin(), seg.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) &&
                years.count(std::stoi(seg))) {
                year = std::stoi(seg);
                break;
            }
        }
        if (!year) {
            std::string context = link_text + " " + a->attr("title").value_or("");
            for (int y : year_tokens(context)) {
                if (years.count(y)) {
                    year = y;
                    break;
                }
            }
        }
        if (!year) continue;
        if (std::any_of(out.begin(), out.end(), [&](const SourceRef& r) { return r.url == url; })) continue;
        out.push_back(SourceRef{url, SourceKind::pdf, year, link_text.empty() ? filename : link_text});
    }
    return out;
}

std::string DefaultTransport::get(const std::string& url) {
    auto parts = split_url(url);
    if (!parts || url.find(':') <= 1) return read_file(fs::path(url));
    if (parts->scheme == "file") {
        auto p = fs::path(percent_decode(parts->path));
        if (!fs::is_regular_file(p)) throw FetchError(fmt::format("not found: {}", url), false, 404);
        return read_file(p);
    }
    if (parts->scheme != "http" && parts->scheme != "https")
        throw FetchError(fmt::format("unsupported scheme '{}'", parts->scheme), false);
    httplib::Client cli(parts->scheme + "://" + parts->authority);
    cli.set_connection_timeout(10);
    cli.set_read_timeout(30);
    cli.set_follow_location(true);
    std::string target = (parts->path.empty() ? "/" : parts->path) + parts->query;
    auto res = cli.Get(target);
    if (!res) throw FetchError(fmt::format("unreachable: {} ({})", url, httplib::to_string(res.error())), true);
    if (res->status < 200 || res->status >= 300)
        throw FetchError(fmt::format("HTTP {} for {}", res->status, url), res->status >= 500 || res->status == 429,
                         res->status);
    return res->body;
}

Timestamp system_now() {
    return std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
}

Store::Store(fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_ / "blobs");
    load_manifest();
}

void Store::load_manifest() {
    entries_.clear();
    auto path = dir_ / "manifest.tsv";
    if (!fs::exists(path)) return;
    std::ifstream in(path, std::ios::binary);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        entries_.push_back(parse_manifest_line(line, line_no));
    }
}

std::vector<ManifestEntry> Store::entries() const {
    std::lock_guard lock(mu_);
    return entries_;
}

SourceDocument Store::to_document(const ManifestEntry& e) const {
    SourceDocument d;
    d.ref = SourceRef{e.url, e.kind, std::nullopt, e.title};
    d.bytes = read_file(dir_ / "blobs" / e.content_hash);
    d.fetched_at = e.fetched_at;
    d.content_hash = e.content_hash;
    if (e.kind == SourceKind::pdf) {
        if (auto parts = split_url(e.url)) {
            for (const auto& seg : text::split(parts->path, '/')) {
                if (seg.size() == 4 && std::all_of(seg.begin(), seg.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
                    d.ref.year_hint = std::stoi(seg);
                    break;
                }
            }
        }
    }
    return d;
}

SourceDocument Store::put(const SourceRef& ref, std::string bytes, Timestamp fetched_at) {
    std::string hash = sha256_hex(bytes);
    std::lock_guard lock(mu_);
    for (const auto& e : entries_) {
        if (e.url == ref.url && e.content_hash == hash) {
            SourceDocument d{ref, std::move(bytes), e.fetched_at, hash};
            return d;
        }
    }
    auto blob = dir_ / "blobs" / hash;
    if (!fs::exists(blob)) {
        auto tmp = dir_ / "blobs" / (hash + ".tmp");
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
            if (!out) throw Error(fmt::format("cannot write {}", tmp.string()));
        }
        fs::rename(tmp, blob);
    }
    ManifestEntry e{ref.url, ref.kind, hash, fetched_at, ref.title};
    {
        std::ofstream out(dir_ / "manifest.tsv", std::ios::binary | std::ios::app);
        out << format_manifest_line(e);
        if (!out) throw Error("cannot append to manifest");
    }
    entries_.push_back(e);
    return SourceDocument{ref, std::move(bytes), fetched_at, hash};
}

std::string Store::load(const std::string& content_hash) const {
    return read_file(dir_ / "blobs" / content_hash);
}

std::optional<SourceDocument> Store::latest(const std::string& url) const {
    std::lock_guard lock(mu_);
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        if (it->url == url) return to_document(*it);
    }
    return std::nullopt;
}

std::vector<SourceDocument> Store::documents(std::optional<SourceKind> kind) const {
    std::lock_guard lock(mu_);
    std::vector<SourceDocument> out;
    std::set<std::string> seen;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        if (kind && it->kind != *kind) continue;
        if (!seen.insert(it->url).second) continue;
        out.push_back(to_document(*it));
    }
    std::reverse(out.begin(), out.end());
    return out;
}

SourceDocument fetch(const SourceRef& ref, Store& store, Transport& transport, const Clock& clock) {
    std::string bytes = transport.get(ref.url);
    return store.put(ref, std::move(bytes), clock());
}

CrawlReport crawl(const std::string& root, std::string_view title_pattern, const std::set<int>& years, Store& store,
                  Transport& transport, const Clock& clock, std::size_t max_parallel) {
    CrawlReport report;
    std::string root_url = to_url(root);
    SourceRef root_ref{root_url, SourceKind::html, std::nullopt, {}};
    std::string root_bytes = transport.get(root_url);
    auto root_doc = html::parse(root_bytes);
    if (const auto* t = root_doc.find_first("title")) root_ref.title = t->text_content();
    report.root = store.put(root_ref, std::move(root_bytes), clock());
    report.discovered = discover_pdf_links(report.root, title_pattern, years);

    max_parallel = std::max<std::size_t>(1, max_parallel);
    const auto& refs = report.discovered;
    for (std::size_t start = 0; start < refs.size(); start += max_parallel) {
        std::size_t end = std::min(refs.size(), start + max_parallel);
        std::vector<std::future<std::string>> pending;
        for (std::size_t i = start; i < end; ++i)
            pending.push_back(std::async(std::launch::async, [&transport, &refs, i] { return transport.get(refs[i].url); }));
        for (std::size_t i = start; i < end; ++i) {
            try {
                std::string bytes = pending[i - start].get();
                report.fetched.push_back(store.put(refs[i], std::move(bytes), clock()));
            } catch (const FetchError& e) {
                report.failures.push_back({refs[i], e.what()});
            }
        }
    }
    return report;
}

}  // namespace harvest::corpus
