#include "sketchshift/json_io.hpp"

#include <cstdio>

namespace sketchshift {

using nlohmann::json;

json sketch_to_json(const Sketch& sketch) {
    json out{{"id", std::to_string(sketch.id)}, {"strokes", strokes_to_json(sketch.strokes)}};
    out["category"] = sketch.category ? json(*sketch.category) : json(nullptr);
    return out;
}

json recognition_to_json(const Recognition& r) {
    return {{"category", r.cluster.category}, {"cluster", r.cluster.local_index}, {"distance", r.distance}};
}

json proposal_to_json(const ShiftProposal& p) {
    json out{{"category", p.target.category}, {"cluster", p.target.local_index}, {"distance", p.distance}};
    out["exemplar_id"] = p.exemplar_id ? json(std::to_string(*p.exemplar_id)) : json(nullptr);
    return out;
}

json fingerprint_to_json(const EmbedderFingerprint& f) {
    char digest[19];
    std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(f.params_digest));
    return {{"name", f.name}, {"version", f.version}, {"dim", f.dim}, {"params_digest", digest}};
}

json turn_to_json(const TurnRecord& turn) {
    json proposals = json::array();
    for (const auto& p : turn.proposals) proposals.push_back(proposal_to_json(p));
    return {{"turn_index", turn.turn_index},
            {"recognition", recognition_to_json(turn.recognition)},
            {"proposals", std::move(proposals)},
            {"response", sketch_to_json(turn.response)}};
}

std::optional<ContributionPolicy> policy_from_string(std::string_view name) {
    if (name == "random" || name == "seeded_random") return ContributionPolicy::seeded_random;
    if (name == "medoid") return ContributionPolicy::medoid;
    return std::nullopt;
}

}  // namespace sketchshift
