#include "sketchshift/service.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <random>

#include <httplib.h>

#include "byte_io.hpp"
#include "sketchshift/error.hpp"
#include "sketchshift/ingest.hpp"
#include "sketchshift/json_io.hpp"
#include "sketchshift/rng.hpp"

namespace sketchshift {

using nlohmann::json;

struct TurnService::Snapshot {
    ClusterModel model;
    SketchStore store;
    ReferenceEmbedder embedder;
    std::map<std::string, std::size_t> sketch_count;
};

struct TurnService::Session {
    std::mutex mutex;
    std::uint64_t seed = 0;
    std::vector<TurnRecord> turns;
    std::chrono::steady_clock::time_point last_used;
};

namespace {

Reply error_reply(int status, std::string message) {
    return {status, json{{"error", std::move(message)}}};
}

Reply not_loaded() { return error_reply(503, "model not loaded"); }

std::optional<std::size_t> parse_count(std::string_view text) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
    return v;
}

}  // namespace

TurnService::TurnService(ServiceConfig config) : config_(std::move(config)) {}
TurnService::~TurnService() = default;

void TurnService::load(ClusterModel model, SketchStore store) {
    validate_model(model);
    auto snap = std::make_shared<Snapshot>();
    if (model.fingerprint != snap->embedder.fingerprint())
        throw ValidationError("only models built on the reference embedder can be served");
    for (const auto& c : model.clusters) snap->sketch_count[c.category] += c.member_count();
    snap->model = std::move(model);
    snap->store = std::move(store);
    std::lock_guard lock(snapshot_mutex_);
    snapshot_ = std::move(snap);
}

bool TurnService::loaded() const { return snapshot() != nullptr; }

std::shared_ptr<const TurnService::Snapshot> TurnService::snapshot() const {
    std::lock_guard lock(snapshot_mutex_);
    return snapshot_;
}

std::string TurnService::new_session_id() {
    static thread_local std::random_device device;
    std::uint64_t hi = (std::uint64_t{device()} << 32) | device();
    std::uint64_t lo = (std::uint64_t{device()} << 32) | device();
    char buf[33];
    std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(hi),
                  static_cast<unsigned long long>(lo));
    return buf;
}

Reply TurnService::post_turn(std::string_view body) {
    const auto snap = snapshot();
    if (!snap) return not_loaded();

    json req;
    try {
        req = json::parse(body);
    } catch (const json::exception&) {
        return error_reply(400, "malformed JSON");
    }
    if (!req.is_object()) return error_reply(400, "request body must be a JSON object");

    TurnOptions options;
    options.preprocess = config_.preprocess;
    std::vector<Stroke> strokes;
    try {
        if (!req.contains("strokes")) return error_reply(400, "missing strokes");
        strokes = strokes_from_json(req["strokes"]);
    } catch (const InvalidStrokes& e) {
        return error_reply(400, e.what());
    }
    if (auto it = req.find("n"); it != req.end() && !it->is_null()) {
        if (!it->is_number_integer() || it->get<std::int64_t>() < 1)
            return error_reply(400, "n must be a positive integer");
        options.n = it->get<std::size_t>();
    }
    if (auto it = req.find("policy"); it != req.end() && !it->is_null()) {
        const auto policy = it->is_string() ? policy_from_string(it->get<std::string>()) : std::nullopt;
        if (!policy) return error_reply(400, "policy must be \"random\" or \"medoid\"");
        options.policy = *policy;
    }

    std::string session_id;
    std::shared_ptr<Session> session;
    bool created = false;
    if (auto it = req.find("session_id"); it != req.end() && !it->is_null()) {
        if (!it->is_string()) return error_reply(400, "session_id must be a string");
        session_id = it->get<std::string>();
        std::lock_guard lock(sessions_mutex_);
        const auto found = sessions_.find(session_id);
        if (found == sessions_.end()) return error_reply(404, "unknown session_id");
        session = found->second;
    } else {
        session = std::make_shared<Session>();
        std::lock_guard lock(sessions_mutex_);
        session_id = new_session_id();
        session->seed = derive_seed({config_.seed, sessions_created_++});
        created = true;
    }

    std::lock_guard session_lock(session->mutex);
    options.seed = session->seed;
    options.turn_index = session->turns.size();
    TurnRecord turn;
    try {
        turn = respond_turn(strokes, snap->model, snap->store, snap->embedder, options);
    } catch (const InvalidStrokes& e) {
        return error_reply(400, e.what());
    } catch (const Error& e) {
        return error_reply(500, e.what());
    }
    session->last_used = config_.clock();
    json out = turn_to_json(turn);
    out["session_id"] = session_id;
    session->turns.push_back(std::move(turn));
    if (created) {
        std::lock_guard lock(sessions_mutex_);
        sessions_.emplace(session_id, session);
    }
    return {200, std::move(out)};
}

Reply TurnService::get_categories() const {
    const auto snap = snapshot();
    if (!snap) return not_loaded();
    std::vector<std::string> names = snap->model.categories;
    std::sort(names.begin(), names.end());
    json list = json::array();
    for (const auto& name : names)
        list.push_back({{"name", name},
                        {"k", snap->model.per_category_k.at(name)},
                        {"sketch_count", snap->sketch_count.count(name) ? snap->sketch_count.at(name) : 0}});
    return {200, json{{"categories", std::move(list)}}};
}

Reply TurnService::get_cluster_samples(const std::string& category, const std::string& index,
                                       const std::optional<std::string>& n_text) const {
    const auto snap = snapshot();
    if (!snap) return not_loaded();
    const auto local = parse_count(index);
    const Cluster* cluster = local ? snap->model.find({category, *local}) : nullptr;
    if (!cluster) return error_reply(404, "unknown cluster");
    std::size_t n = config_.default_samples;
    if (n_text) {
        const auto parsed = parse_count(*n_text);
        if (!parsed || *parsed < 1 || *parsed > config_.max_samples)
            return error_reply(400, "n must be an integer in [1, " + std::to_string(config_.max_samples) + "]");
        n = *parsed;
    }
    std::vector<SketchId> pool = cluster->member_ids;
    SplitMix64 rng(derive_seed({config_.seed, detail::fnv1a(category), cluster->local_index}));
    const std::size_t take = std::min(n, pool.size());
    json samples = json::array();
    for (std::size_t i = 0; i < take; ++i) {
        std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
        const Sketch* s = snap->store.find(pool[i]);
        if (!s) return error_reply(500, "cluster member " + std::to_string(pool[i]) + " missing from store");
        samples.push_back(sketch_to_json(*s));
    }
    return {200, json{{"category", category}, {"cluster", cluster->local_index}, {"samples", std::move(samples)}}};
}

Reply TurnService::get_model_info() const {
    const auto snap = snapshot();
    if (!snap) return {200, json{{"loaded", false}}};
    return {200, json{{"loaded", true},
                      {"fingerprint", fingerprint_to_json(snap->model.fingerprint)},
                      {"dim", snap->model.fingerprint.dim},
                      {"categories", snap->model.categories.size()},
                      {"total_clusters", snap->model.clusters.size()},
                      {"total_sketches", snap->store.size()}}};
}

std::size_t TurnService::evict_expired() {
    const auto now = config_.clock();
    std::lock_guard lock(sessions_mutex_);
    return std::erase_if(sessions_, [&](const auto& entry) {
        std::unique_lock session_lock(entry.second->mutex, std::try_to_lock);
        return session_lock.owns_lock() && now - entry.second->last_used > config_.session_ttl;
    });
}

std::size_t TurnService::session_count() const {
    std::lock_guard lock(sessions_mutex_);
    return sessions_.size();
}

void TurnService::mount(httplib::Server& server) {
    const std::size_t threads = config_.worker_threads;
    server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };

    auto send = [](httplib::Response& res, const Reply& reply) {
        res.status = reply.status;
        res.set_content(reply.body.dump(), "application/json");
    };
    server.Post("/api/turn", [this, send](const httplib::Request& req, httplib::Response& res) {
        evict_expired();
        send(res, post_turn(req.body));
    });
    server.Get("/api/categories",
               [this, send](const httplib::Request&, httplib::Response& res) { send(res, get_categories()); });
    server.Get(R"(/api/clusters/([^/]+)/([^/]+)/samples)",
               [this, send](const httplib::Request& req, httplib::Response& res) {
                   std::optional<std::string> n;
                   if (req.has_param("n")) n = req.get_param_value("n");
                   send(res, get_cluster_samples(req.matches[1], req.matches[2], n));
               });
    server.Get("/api/model/info",
               [this, send](const httplib::Request&, httplib::Response& res) { send(res, get_model_info()); });

    if (!config_.allow_origin.empty()) {
        const std::string origin = config_.allow_origin;
        server.set_post_routing_handler([origin](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Origin", origin);
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
        });
        server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    }
}

}  // namespace sketchshift
