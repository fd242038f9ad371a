#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sketchshift {

using SketchId = std::uint64_t;

struct Point {
    std::int32_t x = 0;
    std::int32_t y = 0;

    friend bool operator==(const Point&, const Point&) = default;
};

struct Stroke {
    std::vector<Point> points;

    friend bool operator==(const Stroke&, const Stroke&) = default;
};

struct Sketch {
    SketchId id = 0;
    std::optional<std::string> category;
    std::vector<Stroke> strokes;
    std::optional<bool> recognized;
    std::optional<std::string> country;  // exactly two characters when present
    std::optional<std::uint32_t> timestamp;

    friend bool operator==(const Sketch&, const Sketch&) = default;
};

/// Square or rectangular grey image, row-major, intensities in [0, 1].
struct RasterImage {
    int width = 0;
    int height = 0;
    std::vector<float> pixels;

    float at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

    friend bool operator==(const RasterImage&, const RasterImage&) = default;
};

}  // namespace sketchshift
