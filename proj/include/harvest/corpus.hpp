#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "harvest/error.hpp"
#include "harvest/types.hpp"

// Document acquisition: link discovery, transports, and the content-addressed
// store with its append-only manifest.
namespace harvest::corpus {

class FetchError : public Error {
public:
    FetchError(std::string what, bool retryable, int status = 0)
        : Error(std::move(what)), retryable_(retryable), status_(status) {}
    bool retryable() const noexcept { return retryable_; }
    int status() const noexcept { return status_; }

private:
    bool retryable_;
    int status_;
};

std::string sha256_hex(std::string_view bytes);

// Absolute URL for a local path ("file:///abs/path"); URLs pass through.
std::string to_url(std::string_view path_or_url);

// RFC 3986 reference resolution, without query normalization.
std::string resolve_url(std::string_view base, std::string_view href);

// Anchors whose target ends in ".pdf", whose link text or filename contains
// `title_pattern` (case-insensitive), and whose URL path has a year segment or
// whose link text/title attribute has a 4-digit year token from `years`.
// Document order, deduplicated by resolved URL. Throws ParseError on broken
// HTML.
std::vector<SourceRef> discover_pdf_links(const SourceDocument& page, std::string_view title_pattern,
                                          const std::set<int>& years);

class Transport {
public:
    virtual ~Transport() = default;
    // Throws FetchError.
    virtual std::string get(const std::string& url) = 0;
};

// file:// URLs and plain paths from disk, http(s):// via HTTP GET.
class DefaultTransport : public Transport {
public:
    std::string get(const std::string& url) override;
};

using Clock = std::function<Timestamp()>;
Timestamp system_now();

struct ManifestEntry {
    std::string url;
    SourceKind kind = SourceKind::html;
    std::string content_hash;
    Timestamp fetched_at{};
    std::string title;

    bool operator==(const ManifestEntry&) const = default;
};

// <dir>/blobs/<sha256> plus <dir>/manifest.tsv (url, kind, hash, fetched_at,
// title). Appends are serialized by an internal mutex.
class Store {
public:
    explicit Store(std::filesystem::path dir);

    const std::filesystem::path& dir() const noexcept { return dir_; }
    std::vector<ManifestEntry> entries() const;

    // Stores bytes fetched for `ref`. A (url, hash) pair already in the
    // manifest returns the existing document and changes nothing.
    SourceDocument put(const SourceRef& ref, std::string bytes, Timestamp fetched_at);

    std::string load(const std::string& content_hash) const;
    std::optional<SourceDocument> latest(const std::string& url) const;
    std::vector<SourceDocument> documents(std::optional<SourceKind> kind = std::nullopt) const;

private:
    SourceDocument to_document(const ManifestEntry& e) const;
    void load_manifest();

    std::filesystem::path dir_;
    mutable std::mutex mu_;
    std::vector<ManifestEntry> entries_;
};

SourceDocument fetch(const SourceRef& ref, Store& store, Transport& transport, const Clock& clock = system_now);

struct CrawlFailure {
    SourceRef ref;
    std::string reason;
};

struct CrawlReport {
    SourceDocument root;
    std::vector<SourceRef> discovered;
    std::vector<SourceDocument> fetched;
    std::vector<CrawlFailure> failures;
};

// Fetches the root page, discovers PDF links, fetches them concurrently and
// records them in discovery order.
CrawlReport crawl(const std::string& root, std::string_view title_pattern, const std::set<int>& years, Store& store,
                  Transport& transport, const Clock& clock = system_now, std::size_t max_parallel = 8);

}  // namespace harvest::corpus
