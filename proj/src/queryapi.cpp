#include "harvest/queryapi.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <condition_variable>
#include <set>

#include <fmt/format.h>
#include <httplib.h>

#include "harvest/consolidate.hpp"
#include "harvest/csv.hpp"
#include "harvest/kernels.hpp"
#include "harvest/text.hpp"

namespace harvest::queryapi {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool contains_ci(const std::string& hay, const std::string& needle) {
    return text::to_lower(hay).find(text::to_lower(needle)) != std::string::npos;
}

bool term_ok(const std::optional<std::string>& term, const std::string& value) {
    return !term || contains_ci(value, *term);
}

bool term_ok(const std::optional<std::string>& term, const std::optional<std::string>& value) {
    return !term || (value && contains_ci(*value, *term));
}

std::size_t parse_count(const std::string& field, const std::string& v, std::size_t max) {
    std::size_t n = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
    if (ec != std::errc() || p != v.data() + v.size() || n > max)
        throw InvalidParameter(field, fmt::format("{} must be an integer between 0 and {}", field, max));
    return n;
}

json row_json(const QueryRow& row) {
    auto fields = records::to_csv_fields(*row.record);
    json j = json::object();
    for (std::size_t i = 0; i < records::kCsvHeader.size(); ++i) j[text::to_lower(records::kCsvHeader[i])] = fields[i];
    j["below_tolerance"] = row.below_tolerance ? json(*row.below_tolerance) : json(nullptr);
    return j;
}

Response json_response(int status, const json& body) {
    return Response{status, "application/json", body.dump()};
}

}  // namespace

QueryFilter parse_filter(const std::multimap<std::string, std::string>& params) {
    QueryFilter f;
    std::set<std::string> seen;
    for (const auto& [key, value] : params) {
        if (!seen.insert(key).second) throw InvalidParameter(key, fmt::format("parameter '{}' given more than once", key));
        std::string v = text::trim(value);
        auto term = [&](std::optional<std::string>& slot) {
            if (v.empty()) throw InvalidParameter(key, fmt::format("parameter '{}' must not be empty", key));
            slot = v;
        };
        if (key == "drug") {
            term(f.drug);
        } else if (key == "matrix") {
            term(f.matrix);
        } else if (key == "test") {
            term(f.test);
        } else if (key == "species") {
            term(f.species);
        } else if (key == "manufacturer") {
            term(f.manufacturer);
        } else if (key == "below_tolerance_only") {
            auto lv = text::to_lower(v);
            if (lv == "true" || lv == "1") {
                f.below_tolerance_only = true;
            } else if (lv == "false" || lv == "0") {
                f.below_tolerance_only = false;
            } else {
                throw InvalidParameter(key, "below_tolerance_only must be true or false");
            }
        } else if (key == "limit") {
            f.limit = parse_count(key, v, kMaxLimit);
        } else if (key == "offset") {
            f.offset = parse_count(key, v, std::numeric_limits<std::size_t>::max() / 2);
        } else {
            throw InvalidParameter(key, fmt::format("unknown parameter '{}'", key));
        }
    }
    return f;
}

bool matches(const AssayRecord& r, const std::optional<bool>& below, const QueryFilter& f) {
    if (f.below_tolerance_only.value_or(false) && below != true) return false;
    return term_ok(f.drug, r.drug) && term_ok(f.matrix, r.matrix) && term_ok(f.test, r.test) &&
           term_ok(f.species, r.species) && term_ok(f.manufacturer, r.manufacturer);
}

std::shared_ptr<const Snapshot> make_snapshot(std::vector<AssayRecord> recs, std::string source) {
    auto snap = std::make_shared<Snapshot>();
    std::sort(recs.begin(), recs.end(), [](const AssayRecord& a, const AssayRecord& b) { return a.key() < b.key(); });
    snap->below.reserve(recs.size());
    for (const auto& r : recs) snap->below.push_back(records::below_tolerance(r));
    snap->records = std::move(recs);
    snap->loaded_at = std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
    snap->source = std::move(source);
    return snap;
}

QueryResult run_query(const Snapshot& snap, const QueryFilter& f) {
    auto hits = kernels::select(snap.records.size(),
                                [&](std::size_t i) { return matches(snap.records[i], snap.below[i], f); });
    QueryResult out;
    out.total = hits.size();
    out.applied = f;
    for (std::size_t k = f.offset; k < hits.size() && out.rows.size() < f.limit; ++k)
        out.rows.push_back(QueryRow{&snap.records[hits[k]], snap.below[hits[k]]});
    return out;
}

json to_json(const QueryFilter& f) {
    json j = json::object();
    auto put = [&](const char* k, const std::optional<std::string>& v) {
        if (v) j[k] = *v;
    };
    put("drug", f.drug);
    put("matrix", f.matrix);
    put("test", f.test);
    put("species", f.species);
    put("manufacturer", f.manufacturer);
    if (f.below_tolerance_only) j["below_tolerance_only"] = *f.below_tolerance_only;
    j["limit"] = f.limit;
    j["offset"] = f.offset;
    return j;
}

json to_json(const QueryResult& r) {
    json rows = json::array();
    for (const auto& row : r.rows) rows.push_back(row_json(row));
    return json{{"rows", std::move(rows)}, {"total", r.total}, {"applied_filters", to_json(r.applied)}};
}

std::string to_csv(const QueryResult& r) {
    std::string out = csv::format_row(records::kCsvHeader);
    for (const auto& row : r.rows) out += csv::format_row(records::to_csv_fields(*row.record));
    return out;
}

QueryService::QueryService(fs::path master, std::vector<canon::SynonymGroup> groups)
    : master_(std::move(master)), groups_(std::move(groups)) {
    auto ds = consolidate::load(master_);
    snap_ = make_snapshot(ds.sorted_records(), master_.string());
}

bool QueryService::reload() {
    std::shared_ptr<const Snapshot> next;
    try {
        auto ds = consolidate::load(master_);
        next = make_snapshot(ds.sorted_records(), master_.string());
    } catch (const std::exception& e) {
        std::lock_guard lock(mu_);
        last_error_ = e.what();
        return false;
    }
    std::lock_guard lock(mu_);
    snap_ = std::move(next);
    last_error_.clear();
    return true;
}

std::shared_ptr<const Snapshot> QueryService::snapshot() const {
    std::lock_guard lock(mu_);
    return snap_;
}

Health QueryService::health() const {
    std::lock_guard lock(mu_);
    return Health{!last_error_.empty(), last_error_, snap_->records.size(), snap_->loaded_at};
}

Response QueryService::handle(const std::string& path, const std::multimap<std::string, std::string>& params) const {
    auto snap = snapshot();
    try {
        if (path == "/records" || path == "/records.csv") {
            auto f = parse_filter(params);
            auto result = run_query(*snap, f);
            if (path == "/records.csv") return Response{200, "text/csv; charset=utf-8", to_csv(result)};
            return json_response(200, to_json(result));
        }
        if (!params.empty()) {
            throw InvalidParameter(params.begin()->first,
                                   fmt::format("unknown parameter '{}'", params.begin()->first));
        }
        if (path == "/dictionaries") {
            std::set<std::string> drugs;
            std::set<std::string> tests;
            std::set<std::string> matrices;
            for (const auto& r : snap->records) {
                drugs.insert(r.drug);
                tests.insert(r.test);
                matrices.insert(r.matrix);
            }
            for (const auto& g : groups_) {
                auto& dst = g.kind == canon::NameKind::drug ? drugs : (g.kind == canon::NameKind::test ? tests : matrices);
                dst.insert(g.canonical);
            }
            return json_response(200, json{{"drugs", drugs}, {"tests", tests}, {"matrices", matrices}});
        }
        if (path == "/health") {
            auto h = health();
            json j{{"status", h.stale ? "stale" : "ok"}, {"records", h.records}, {"loaded_at", format_rfc3339(h.loaded_at)}};
            if (h.stale) j["last_error"] = h.last_error;
            return json_response(200, j);
        }
        return json_response(404, json{{"error", "not found"}});
    } catch (const InvalidParameter& e) {
        return json_response(400, json{{"error", e.what()}, {"field", e.field()}});
    }
}

std::pair<std::string, int> parse_bind(const std::string& bind) {
    std::string host = "127.0.0.1";
    std::string port_s = bind;
    if (auto colon = bind.rfind(':'); colon != std::string::npos) {
        if (colon > 0) host = bind.substr(0, colon);
        port_s = bind.substr(colon + 1);
    }
    int port = 0;
    auto [p, ec] = std::from_chars(port_s.data(), port_s.data() + port_s.size(), port);
    if (ec != std::errc() || p != port_s.data() + port_s.size() || port < 0 || port > 65535)
        throw ValidationError(fmt::format("invalid bind address '{}'", bind));
    return {host, port};
}

struct Server::Impl {
    QueryService& svc;
    ServeOptions opts;
    httplib::Server http;
    std::thread watcher;
    std::thread background;
    std::mutex mu;
    std::condition_variable cv;
    bool done = false;

    Impl(QueryService& s, ServeOptions o) : svc(s), opts(std::move(o)) {}
};

Server::Server(QueryService& svc, ServeOptions opts) : impl_(std::make_unique<Impl>(svc, std::move(opts))) {
    auto& http = impl_->http;
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
        std::multimap<std::string, std::string> params(req.params.begin(), req.params.end());
        auto r = impl_->svc.handle(req.path, params);
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    for (const char* p : {"/records", "/records.csv", "/dictionaries", "/health"}) http.Get(p, route);
    if (impl_->opts.static_dir) http.set_mount_point("/", impl_->opts.static_dir->string());
}

Server::~Server() {
    stop();
    if (impl_->background.joinable()) impl_->background.join();
    if (impl_->watcher.joinable()) impl_->watcher.join();
}

void Server::watch() {
    std::error_code ec;
    auto last = fs::last_write_time(impl_->svc.master_path(), ec);
    int period = impl_->opts.poll_ms > 0 ? std::min(impl_->opts.poll_ms, 200) : 200;
    auto since_poll = std::chrono::milliseconds(0);
    std::unique_lock lock(impl_->mu);
    while (!impl_->done) {
        impl_->cv.wait_for(lock, std::chrono::milliseconds(period));
        if (impl_->done) break;
        if (stop_requested_.exchange(false)) {
            lock.unlock();
            impl_->http.stop();
            lock.lock();
            continue;
        }
        bool reload = reload_requested_.exchange(false);
        since_poll += std::chrono::milliseconds(period);
        if (impl_->opts.poll_ms > 0 && since_poll.count() >= impl_->opts.poll_ms) {
            since_poll = std::chrono::milliseconds(0);
            auto now = fs::last_write_time(impl_->svc.master_path(), ec);
            if (!ec && now != last) {
                last = now;
                reload = true;
            }
        }
        if (reload) {
            lock.unlock();
            impl_->svc.reload();
            lock.lock();
        }
    }
}

bool Server::run() {
    impl_->watcher = std::thread([this] { watch(); });
    bool ok = impl_->http.listen(impl_->opts.host, impl_->opts.port);
    {
        std::lock_guard lock(impl_->mu);
        impl_->done = true;
    }
    impl_->cv.notify_all();
    impl_->watcher.join();
    return ok;
}

int Server::start_background() {
    int port = impl_->http.bind_to_any_port(impl_->opts.host);
    if (port < 0) return -1;
    impl_->watcher = std::thread([this] { watch(); });
    impl_->background = std::thread([this] { impl_->http.listen_after_bind(); });
    impl_->http.wait_until_ready();
    return port;
}

void Server::stop() {
    impl_->http.stop();
    {
        std::lock_guard lock(impl_->mu);
        impl_->done = true;
    }
    impl_->cv.notify_all();
}

}  // namespace harvest::queryapi
