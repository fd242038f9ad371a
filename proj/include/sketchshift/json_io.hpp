#pragma once

// JSON shapes shared by the HTTP API and the CLI. Sketch ids are emitted as
// decimal strings because dataset key_ids exceed 2^53.

#include <json.hpp>

#include "sketchshift/embedding.hpp"
#include "sketchshift/shift_engine.hpp"

namespace sketchshift {

nlohmann::json sketch_to_json(const Sketch& sketch);
nlohmann::json recognition_to_json(const Recognition& recognition);
nlohmann::json proposal_to_json(const ShiftProposal& proposal);
nlohmann::json fingerprint_to_json(const EmbedderFingerprint& fingerprint);

/// {"turn_index", "recognition", "proposals", "response"}
nlohmann::json turn_to_json(const TurnRecord& turn);

/// Accepts "random"/"seeded_random" and "medoid".
std::optional<ContributionPolicy> policy_from_string(std::string_view name);

}  // namespace sketchshift
