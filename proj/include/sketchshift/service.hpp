#pragma once

// HTTP facade for the turn-taking game.

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "sketchshift/embedding.hpp"
#include "sketchshift/model.hpp"
#include "sketchshift/model_store.hpp"
#include "sketchshift/shift_engine.hpp"

namespace httplib {
class Server;
}

namespace sketchshift {

struct ServiceConfig {
    std::uint64_t seed = 0;
    std::chrono::seconds session_ttl{30 * 60};
    std::string allow_origin;  // empty: no CORS headers
    std::size_t worker_threads = 64;
    PreprocessOptions preprocess;
    std::size_t default_samples = 9;
    std::size_t max_samples = 50;
    std::function<std::chrono::steady_clock::time_point()> clock = std::chrono::steady_clock::now;
};

struct Reply {
    int status = 200;
    nlohmann::json body;
};

class TurnService {
public:
    explicit TurnService(ServiceConfig config = {});
    ~TurnService();

    /// Replaces the served model and store atomically. Only models built on
    /// the reference embedder can be served, since turns embed raw strokes.
    void load(ClusterModel model, SketchStore store);
    bool loaded() const;

    Reply post_turn(std::string_view body);
    Reply get_categories() const;
    Reply get_cluster_samples(const std::string& category, const std::string& index,
                              const std::optional<std::string>& n) const;
    Reply get_model_info() const;

    /// Drops sessions idle longer than the TTL; returns how many were dropped.
    std::size_t evict_expired();
    std::size_t session_count() const;

    /// Registers routes, CORS handling and the worker pool on `server`.
    void mount(httplib::Server& server);

private:
    struct Snapshot;
    struct Session;

    std::shared_ptr<const Snapshot> snapshot() const;
    std::string new_session_id();

    ServiceConfig config_;
    std::shared_ptr<const Snapshot> snapshot_;
    mutable std::mutex snapshot_mutex_;

    mutable std::mutex sessions_mutex_;
    std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t sessions_created_ = 0;
};

}  // namespace sketchshift
