#include "sketchshift/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "byte_io.hpp"
#include "sketchshift/error.hpp"

namespace sketchshift {

using nlohmann::json;

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp < 10 ? mp + 3 : mp - 9;
    y = static_cast<int>(static_cast<std::int64_t>(yoe) + era * 400 + (m <= 2));
}

// "2017-03-08 21:12:07.26604 UTC" -> seconds since epoch (fraction dropped).
std::uint32_t parse_timestamp_text(const std::string& text) {
    int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0, consumed = 0;
    if (std::sscanf(text.c_str(), "%4d-%2d-%2d %2d:%2d:%2d%n", &year, &month, &day, &hour, &minute,
                    &second, &consumed) != 6 ||
        month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60) {
        throw ParseError("malformed timestamp '" + text + "'");
    }
    std::string_view rest(text.c_str() + consumed);
    if (!rest.empty() && rest.front() == '.') {
        rest.remove_prefix(1);
        while (!rest.empty() && rest.front() >= '0' && rest.front() <= '9') rest.remove_prefix(1);
    }
    if (rest != " UTC" && !rest.empty()) throw ParseError("malformed timestamp '" + text + "'");
    const std::int64_t secs = days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day)) * 86400 +
                              hour * 3600 + minute * 60 + second;
    if (secs < 0 || secs > std::numeric_limits<std::uint32_t>::max())
        throw ParseError("timestamp out of range '" + text + "'");
    return static_cast<std::uint32_t>(secs);
}

std::string format_timestamp(std::uint32_t secs) {
    int y = 0;
    unsigned m = 0, d = 0;
    civil_from_days(secs / 86400, y, m, d);
    const unsigned rem = secs % 86400;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02u:%02u:%02u UTC", y, m, d, rem / 3600, (rem / 60) % 60,
                  rem % 60);
    return buf;
}

SketchId parse_key_id(const json& v) {
    if (v.is_number_unsigned()) return v.get<SketchId>();
    if (v.is_string()) {
        const auto& s = v.get_ref<const std::string&>();
        SketchId id = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), id);
        if (ec == std::errc{} && ptr == s.data() + s.size() && !s.empty()) return id;
    }
    throw ParseError("key_id must be an unsigned integer or a decimal string");
}

bool valid_country(const std::string& c) {
    return c.size() == 2 && std::all_of(c.begin(), c.end(), [](char ch) { return ch >= 0x20 && ch <= 0x7e; });
}

// Squared distance from p to segment ab, scaled by |ab|^2 so it stays an
// exact integer; the scale is shared by every point tested against ab.
struct ScaledDistance {
    __int128 value;
    __int128 scale;
};

ScaledDistance scaled_segment_distance(Point p, Point a, Point b) {
    using I = __int128;
    const I dx = I{b.x} - a.x, dy = I{b.y} - a.y;
    const I px = I{p.x} - a.x, py = I{p.y} - a.y;
    const I len2 = dx * dx + dy * dy;
    if (len2 == 0) return {px * px + py * py, 1};
    const I dot = px * dx + py * dy;
    if (dot <= 0) return {(px * px + py * py) * len2, len2};
    if (dot >= len2) {
        const I qx = I{p.x} - b.x, qy = I{p.y} - b.y;
        return {(qx * qx + qy * qy) * len2, len2};
    }
    const I cross = px * dy - py * dx;
    return {cross * cross, len2};
}

void draw_line(RasterImage& img, int x0, int y0, int x1, int y1) {
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
        img.pixels[static_cast<std::size_t>(y0) * img.width + x0] = 1.0f;
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

}  // namespace

Sketch parse_ndjson_line(std::string_view line) {
    json doc;
    try {
        doc = json::parse(line);
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("record is not a JSON object");

    Sketch s;
    if (auto it = doc.find("key_id"); it != doc.end()) s.id = parse_key_id(*it);
    if (auto it = doc.find("word"); it != doc.end()) {
        if (!it->is_string()) throw ParseError("word must be a string");
        s.category = it->get<std::string>();
    }
    if (auto it = doc.find("recognized"); it != doc.end()) {
        if (!it->is_boolean()) throw ParseError("recognized must be a boolean");
        s.recognized = it->get<bool>();
    }
    if (auto it = doc.find("countrycode"); it != doc.end()) {
        if (!it->is_string() || !valid_country(it->get<std::string>()))
            throw ParseError("countrycode must be a 2-character string");
        s.country = it->get<std::string>();
    }
    if (auto it = doc.find("timestamp"); it != doc.end()) {
        if (it->is_number_unsigned() && it->get<std::uint64_t>() <= std::numeric_limits<std::uint32_t>::max())
            s.timestamp = it->get<std::uint32_t>();
        else if (it->is_string())
            s.timestamp = parse_timestamp_text(it->get<std::string>());
        else
            throw ParseError("timestamp must be a string or unsigned 32-bit integer");
    }

    const auto drawing = doc.find("drawing");
    if (drawing == doc.end()) throw ParseError("missing drawing");
    if (!drawing->is_array() || drawing->empty()) throw ParseError("drawing must be a non-empty array");
    s.strokes.reserve(drawing->size());
    for (const auto& stroke : *drawing) {
        if (!stroke.is_array() || stroke.size() < 2 || !stroke[0].is_array() || !stroke[1].is_array())
            throw ParseError("stroke must be [xs, ys]");
        const auto& xs = stroke[0];
        const auto& ys = stroke[1];
        if (xs.size() != ys.size()) throw ParseError("stroke xs and ys differ in length");
        if (xs.empty()) throw ParseError("empty stroke");
        Stroke out;
        out.points.reserve(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (!xs[i].is_number_integer() || !ys[i].is_number_integer())
                throw ParseError("non-integer coordinate");
            const auto x = xs[i].get<std::int64_t>(), y = ys[i].get<std::int64_t>();
            if (x < 0 || x > kMaxCoordinate || y < 0 || y > kMaxCoordinate)
                throw ParseError("coordinate outside [0,255]");
            out.points.push_back({static_cast<std::int32_t>(x), static_cast<std::int32_t>(y)});
        }
        s.strokes.push_back(std::move(out));
    }
    return s;
}

std::string to_ndjson_line(const Sketch& sketch) {
    json doc;
    if (sketch.category) doc["word"] = *sketch.category;
    if (sketch.country) doc["countrycode"] = *sketch.country;
    if (sketch.timestamp) doc["timestamp"] = format_timestamp(*sketch.timestamp);
    if (sketch.recognized) doc["recognized"] = *sketch.recognized;
    doc["key_id"] = std::to_string(sketch.id);
    json drawing = json::array();
    for (const auto& stroke : sketch.strokes) {
        json xs = json::array(), ys = json::array();
        for (auto p : stroke.points) {
            xs.push_back(p.x);
            ys.push_back(p.y);
        }
        drawing.push_back(json::array({std::move(xs), std::move(ys)}));
    }
    doc["drawing"] = std::move(drawing);
    return doc.dump();
}

BinaryParseResult parse_binary_record(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes);
    try {
        Sketch s;
        s.id = r.u64("key_id");
        auto cc = r.take(2, "countrycode");
        if (cc[0] != 0 || cc[1] != 0) {
            std::string code(cc.begin(), cc.end());
            if (!valid_country(code)) throw FormatError("non-printable countrycode", r.offset() - 2);
            s.country = std::move(code);
        }
        const auto recognized = r.u8("recognized");
        if (recognized > 1) throw FormatError("recognized flag must be 0 or 1", r.offset() - 1);
        s.recognized = recognized == 1;
        s.timestamp = r.u32("timestamp");
        const auto n_strokes = r.u16("n_strokes");
        if (n_strokes == 0) throw FormatError("record has zero strokes", r.offset() - 2);
        s.strokes.resize(n_strokes);
        for (auto& stroke : s.strokes) {
            const auto n_points = r.u16("n_points");
            if (n_points == 0) throw FormatError("stroke has zero points", r.offset() - 2);
            auto xs = r.take(n_points, "x values");
            auto ys = r.take(n_points, "y values");
            stroke.points.resize(n_points);
            for (std::size_t i = 0; i < n_points; ++i) stroke.points[i] = {xs[i], ys[i]};
        }
        return {std::move(s), r.offset()};
    } catch (const FormatError& e) {
        throw ParseError(std::string("binary record: ") + e.what());
    }
}

std::vector<std::uint8_t> encode_binary_record(const Sketch& sketch) {
    if (sketch.strokes.empty()) throw EncodeError("sketch has no strokes");
    if (sketch.strokes.size() > std::numeric_limits<std::uint16_t>::max())
        throw EncodeError("stroke count exceeds u16");
    if (sketch.country && !valid_country(*sketch.country))
        throw EncodeError("countrycode must be 2 printable ASCII characters");
    detail::ByteWriter w;
    w.u64(sketch.id);
    if (sketch.country)
        w.raw(*sketch.country);
    else
        w.raw(std::string_view("\0\0", 2));
    w.u8(sketch.recognized.value_or(false) ? 1 : 0);
    w.u32(sketch.timestamp.value_or(0));
    w.u16(static_cast<std::uint16_t>(sketch.strokes.size()));
    for (const auto& stroke : sketch.strokes) {
        if (stroke.points.empty()) throw EncodeError("empty stroke");
        if (stroke.points.size() > std::numeric_limits<std::uint16_t>::max())
            throw EncodeError("point count exceeds u16");
        w.u16(static_cast<std::uint16_t>(stroke.points.size()));
        for (auto p : stroke.points) {
            if (p.x < 0 || p.x > kMaxCoordinate) throw EncodeError("x coordinate outside [0,255]");
            w.u8(static_cast<std::uint8_t>(p.x));
        }
        for (auto p : stroke.points) {
            if (p.y < 0 || p.y > kMaxCoordinate) throw EncodeError("y coordinate outside [0,255]");
            w.u8(static_cast<std::uint8_t>(p.y));
        }
    }
    return std::move(w.bytes());
}

Stroke simplify_rdp(const Stroke& stroke, double epsilon) {
    std::vector<Point> pts;
    pts.reserve(stroke.points.size());
    for (auto p : stroke.points)
        if (pts.empty() || !(pts.back() == p)) pts.push_back(p);
    if (pts.size() <= 2) return Stroke{std::move(pts)};

    std::vector<bool> keep(pts.size(), false);
    keep.front() = keep.back() = true;
    std::vector<std::pair<std::size_t, std::size_t>> pending{{0, pts.size() - 1}};
    while (!pending.empty()) {
        auto [first, last] = pending.back();
        pending.pop_back();
        __int128 dmax = 0;
        std::size_t index = first;
        for (std::size_t i = first + 1; i < last; ++i) {
            const auto d = scaled_segment_distance(pts[i], pts[first], pts[last]);
            if (d.value > dmax) {
                dmax = d.value;
                index = i;
            }
        }
        const __int128 scale = scaled_segment_distance(pts[first], pts[first], pts[last]).scale;
        if (index != first && static_cast<long double>(dmax) >
                                  static_cast<long double>(epsilon) * epsilon * static_cast<long double>(scale)) {
            keep[index] = true;
            pending.emplace_back(index, last);
            pending.emplace_back(first, index);
        }
    }
    Stroke out;
    for (std::size_t i = 0; i < pts.size(); ++i)
        if (keep[i]) out.points.push_back(pts[i]);
    return out;
}

Sketch simplify_sketch(const Sketch& sketch, double epsilon) {
    Sketch out = sketch;
    for (auto& stroke : out.strokes) stroke = simplify_rdp(stroke, epsilon);
    return out;
}

Sketch normalize_sketch(const Sketch& sketch) {
    Sketch out = sketch;
    std::int64_t min_x = std::numeric_limits<std::int64_t>::max(), min_y = min_x;
    std::int64_t max_x = std::numeric_limits<std::int64_t>::min(), max_y = max_x;
    for (const auto& stroke : sketch.strokes)
        for (auto p : stroke.points) {
            min_x = std::min<std::int64_t>(min_x, p.x);
            min_y = std::min<std::int64_t>(min_y, p.y);
            max_x = std::max<std::int64_t>(max_x, p.x);
            max_y = std::max<std::int64_t>(max_y, p.y);
        }
    if (min_x > max_x) return out;
    const std::int64_t extent = std::max(max_x - min_x, max_y - min_y);
    for (auto& stroke : out.strokes)
        for (auto& p : stroke.points) {
            if (extent == 0) {
                p = {0, 0};
                continue;
            }
            // Exact round-half-up of (v - min) * 255 / extent.
            auto scale = [extent](std::int64_t offset) {
                return static_cast<std::int32_t>((2 * offset * kMaxCoordinate + extent) / (2 * extent));
            };
            p.x = scale(p.x - min_x);
            p.y = scale(p.y - min_y);
        }
    return out;
}

RasterImage rasterize(const Sketch& sketch, int side) {
    if (side < 8) throw ValidationError("raster side must be at least 8");
    RasterImage img{side, side, std::vector<float>(static_cast<std::size_t>(side) * side, 0.0f)};
    const double scale = static_cast<double>(side - 1) / kMaxCoordinate;
    auto to_pixel = [&](std::int32_t v) {
        return std::clamp(static_cast<int>(std::lround(v * scale)), 0, side - 1);
    };
    for (const auto& stroke : sketch.strokes) {
        if (stroke.points.empty()) continue;
        int px = to_pixel(stroke.points[0].x), py = to_pixel(stroke.points[0].y);
        draw_line(img, px, py, px, py);
        for (std::size_t i = 1; i < stroke.points.size(); ++i) {
            const int x = to_pixel(stroke.points[i].x), y = to_pixel(stroke.points[i].y);
            draw_line(img, px, py, x, y);
            px = x;
            py = y;
        }
    }
    return img;
}

std::vector<Stroke> strokes_from_json(const json& strokes) {
    constexpr std::int64_t kLimit = 1 << 24;
    if (!strokes.is_array()) throw InvalidStrokes("strokes must be an array");
    if (strokes.empty()) throw InvalidStrokes("strokes must not be empty");
    std::vector<Stroke> out;
    out.reserve(strokes.size());
    for (const auto& stroke : strokes) {
        if (!stroke.is_array() || stroke.empty()) throw InvalidStrokes("each stroke must be a non-empty array");
        Stroke s;
        s.points.reserve(stroke.size());
        for (const auto& pt : stroke) {
            if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number())
                throw InvalidStrokes("each point must be [x, y]");
            std::int64_t xy[2];
            for (int i = 0; i < 2; ++i) {
                if (pt[i].is_number_integer()) {
                    xy[i] = pt[i].get<std::int64_t>();
                } else {
                    const double v = pt[i].get<double>();
                    if (!std::isfinite(v) || std::abs(v) > kLimit) throw InvalidStrokes("coordinate out of range");
                    xy[i] = std::llround(v);
                }
                if (xy[i] < -kLimit || xy[i] > kLimit) throw InvalidStrokes("coordinate out of range");
            }
            s.points.push_back({static_cast<std::int32_t>(xy[0]), static_cast<std::int32_t>(xy[1])});
        }
        out.push_back(std::move(s));
    }
    return out;
}

json strokes_to_json(const std::vector<Stroke>& strokes) {
    json out = json::array();
    for (const auto& stroke : strokes) {
        json pts = json::array();
        for (auto p : stroke.points) pts.push_back(json::array({p.x, p.y}));
        out.push_back(std::move(pts));
    }
    return out;
}

void for_each_sketch_in_file(const std::filesystem::path& path, const std::function<void(Sketch&&)>& sink) {
    const auto ext = path.extension().string();
    if (ext == ".ndjson" || ext == ".jsonl") {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open " + path.string());
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                sink(parse_ndjson_line(line));
            } catch (const ParseError& e) {
                throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
            }
        }
        return;
    }
    if (ext == ".bin") {
        // Binary files carry no label; the category is the file stem.
        std::string category = path.stem().string();
        if (category.rfind("full_binary_", 0) == 0) category = category.substr(12);
        const auto bytes = detail::read_file_bytes(path.string());
        std::size_t offset = 0;
        while (offset < bytes.size()) {
            try {
                auto rec = parse_binary_record(std::span(bytes).subspan(offset));
                offset += rec.bytes_consumed;
                rec.sketch.category = category;
                sink(std::move(rec.sketch));
            } catch (const ParseError& e) {
                throw ParseError(path.string() + "@" + std::to_string(offset) + ": " + e.what());
            }
        }
        return;
    }
    throw IoError("unrecognized dataset file extension: " + path.string());
}

std::vector<Sketch> read_sketch_file(const std::filesystem::path& path) {
    std::vector<Sketch> out;
    for_each_sketch_in_file(path, [&](Sketch&& s) { out.push_back(std::move(s)); });
    return out;
}

}  // namespace sketchshift
