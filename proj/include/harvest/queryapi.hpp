#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "harvest/canon.hpp"
#include "harvest/records.hpp"
#include "harvest/types.hpp"

// Read-only HTTP/JSON view over the master dataset.
namespace harvest::queryapi {

using records::AssayRecord;

struct QueryFilter {
    std::optional<std::string> drug;
    std::optional<std::string> matrix;
    std::optional<std::string> test;
    std::optional<std::string> species;
    std::optional<std::string> manufacturer;
    std::optional<bool> below_tolerance_only;
    std::size_t limit = 100;
    std::size_t offset = 0;

    bool operator==(const QueryFilter&) const = default;
};

inline constexpr std::size_t kMaxLimit = 10000;

class InvalidParameter : public ValidationError {
public:
    InvalidParameter(std::string field, std::string what) : ValidationError(std::move(what)), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// Throws InvalidParameter for unknown, repeated, empty or malformed parameters.
QueryFilter parse_filter(const std::multimap<std::string, std::string>& params);

// Case-insensitive substring match on every supplied term.
bool matches(const AssayRecord& r, const std::optional<bool>& below, const QueryFilter& f);

struct Snapshot {
    std::vector<AssayRecord> records;  // sorted by drug, test, matrix, type
    std::vector<std::optional<bool>> below;
    Timestamp loaded_at{};
    std::string source;
};

std::shared_ptr<const Snapshot> make_snapshot(std::vector<AssayRecord> records, std::string source);

struct QueryRow {
    const AssayRecord* record = nullptr;
    std::optional<bool> below_tolerance;
};

struct QueryResult {
    std::vector<QueryRow> rows;  // the requested page
    std::size_t total = 0;       // matches before pagination
    QueryFilter applied;
};

QueryResult run_query(const Snapshot& snap, const QueryFilter& f);

nlohmann::json to_json(const QueryResult& r);
nlohmann::json to_json(const QueryFilter& f);
std::string to_csv(const QueryResult& r);

struct Response {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

struct Health {
    bool stale = false;
    std::string last_error;
    std::size_t records = 0;
    Timestamp loaded_at{};
};

// Serves a master CSV. Queries pin the snapshot current at their start, so a
// reload never affects a request in flight.
class QueryService {
public:
    // Throws if the initial load fails.
    explicit QueryService(std::filesystem::path master, std::vector<canon::SynonymGroup> dictionary_groups = {});

    // Loads and validates the file, then swaps it in. On failure the old
    // snapshot stays and health turns stale.
    bool reload();
    std::shared_ptr<const Snapshot> snapshot() const;
    Health health() const;

    // Routing without sockets: GET /records, /records.csv, /dictionaries, /health.
    Response handle(const std::string& path, const std::multimap<std::string, std::string>& params) const;

    const std::filesystem::path& master_path() const noexcept { return master_; }

private:
    std::filesystem::path master_;
    std::vector<canon::SynonymGroup> groups_;
    mutable std::mutex mu_;
    std::shared_ptr<const Snapshot> snap_;
    std::string last_error_;
};

struct ServeOptions {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::optional<std::filesystem::path> static_dir;
    int poll_ms = 1000;  // master file mtime polling; 0 disables
};

// "host:port", ":port" or "port".
std::pair<std::string, int> parse_bind(const std::string& bind);

// Blocks until stop() is called from another thread or a signal handler.
class Server {
public:
    Server(QueryService& svc, ServeOptions opts);
    ~Server();

    // Returns false if the socket cannot be bound.
    bool run();
    // Binds to an ephemeral port (for tests) and serves in the background.
    int start_background();
    void stop();
    // Requests a reload from the polling thread (async-signal-safe).
    void request_reload() noexcept { reload_requested_.store(true); }
    // Asks the polling thread to stop the server (async-signal-safe).
    void request_stop() noexcept { stop_requested_.store(true); }

private:
    void watch();

    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::atomic<bool> reload_requested_{false};
    std::atomic<bool> stop_requested_{false};
};

}  // namespace harvest::queryapi
