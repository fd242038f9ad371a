#pragma once

// Quick, Draw! stroke data: NDJSON and binary record codecs, stroke
// simplification, normalization and rasterization.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sketchshift/sketch.hpp"

namespace sketchshift {

inline constexpr double kDefaultRdpEpsilon = 2.0;
inline constexpr int kDefaultRasterSide = 64;
inline constexpr int kMaxCoordinate = 255;

/// Parses one line of a simplified NDJSON file (`key_id`, `word`,
/// `recognized`, `countrycode`, `timestamp`, `drawing`). Throws ParseError.
Sketch parse_ndjson_line(std::string_view line);

/// Inverse of parse_ndjson_line, used for fixtures and exports.
std::string to_ndjson_line(const Sketch& sketch);

struct BinaryParseResult {
    Sketch sketch;
    std::size_t bytes_consumed = 0;
};

/// Parses one binary record starting at bytes[0]. Throws ParseError.
BinaryParseResult parse_binary_record(std::span<const std::uint8_t> bytes);

/// Emits the layout parse_binary_record accepts. Throws EncodeError.
std::vector<std::uint8_t> encode_binary_record(const Sketch& sketch);

/// Ramer-Douglas-Peucker. Consecutive duplicate points are collapsed first.
Stroke simplify_rdp(const Stroke& stroke, double epsilon = kDefaultRdpEpsilon);

Sketch simplify_sketch(const Sketch& sketch, double epsilon = kDefaultRdpEpsilon);

/// Translates the bounding box to the origin and scales uniformly so the
/// larger side is 255.
Sketch normalize_sketch(const Sketch& sketch);

RasterImage rasterize(const Sketch& sketch, int side = kDefaultRasterSide);

/// Reads `[[[x,y],...], ...]` as sent by the drawing UI. Coordinates are
/// raw client pixels and may fall outside [0,255]. Throws InvalidStrokes.
std::vector<Stroke> strokes_from_json(const nlohmann::json& strokes);
nlohmann::json strokes_to_json(const std::vector<Stroke>& strokes);

/// Calls `sink` for every record of a dataset file. `.ndjson` and `.bin`
/// are recognized by extension. Errors carry the file name and the line or
/// byte offset.
void for_each_sketch_in_file(const std::filesystem::path& path,
                             const std::function<void(Sketch&&)>& sink);

std::vector<Sketch> read_sketch_file(const std::filesystem::path& path);

}  // namespace sketchshift
