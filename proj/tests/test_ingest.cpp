#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "sketchshift/error.hpp"
#include "sketchshift/ingest.hpp"
#include "sketchshift/rng.hpp"
#include "support/synthetic.hpp"

using namespace sketchshift;

namespace sketchshift {
void PrintTo(const Point& p, std::ostream* os) { *os << "(" << p.x << "," << p.y << ")"; }
}  // namespace sketchshift

namespace {

Sketch random_sketch(SplitMix64& rng, int max_coord = 255) {
    Sketch s;
    s.id = rng.next();
    s.country = std::string{static_cast<char>('A' + rng.below(26)), static_cast<char>('A' + rng.below(26))};
    s.recognized = rng.below(2) == 1;
    s.timestamp = static_cast<std::uint32_t>(rng.next());
    const auto n_strokes = 1 + rng.below(6);
    for (std::uint64_t i = 0; i < n_strokes; ++i) {
        Stroke st;
        const auto n_points = 1 + rng.below(40);
        for (std::uint64_t j = 0; j < n_points; ++j)
            st.points.push_back({static_cast<int>(rng.below(max_coord + 1)), static_cast<int>(rng.below(max_coord + 1))});
        s.strokes.push_back(std::move(st));
    }
    return s;
}

// Independent recursive RDP using the same point-to-segment metric.
double seg_dist(Point p, Point a, Point b) {
    const double abx = b.x - a.x, aby = b.y - a.y;
    const double l2 = abx * abx + aby * aby;
    if (l2 == 0) return std::sqrt(double(p.x - a.x) * (p.x - a.x) + double(p.y - a.y) * (p.y - a.y));
    double t = ((p.x - a.x) * abx + (p.y - a.y) * aby) / l2;
    t = t < 0 ? 0 : (t > 1 ? 1 : t);
    const double cx = a.x + t * abx - p.x, cy = a.y + t * aby - p.y;
    return std::sqrt(cx * cx + cy * cy);
}

// Exact comparison: squared distance as a fraction num/den with den = |ab|^2.
std::pair<__int128, __int128> seg_dist_fraction(Point p, Point a, Point b) {
    const __int128 abx = b.x - a.x, aby = b.y - a.y, apx = p.x - a.x, apy = p.y - a.y;
    const __int128 l2 = abx * abx + aby * aby;
    if (l2 == 0) return {apx * apx + apy * apy, 1};
    const __int128 t = apx * abx + apy * aby;
    if (t < 0) return {(apx * apx + apy * apy) * l2, l2};
    if (t > l2) {
        const __int128 bpx = p.x - b.x, bpy = p.y - b.y;
        return {(bpx * bpx + bpy * bpy) * l2, l2};
    }
    const __int128 c = apx * aby - apy * abx;
    return {c * c, l2};
}

std::vector<Point> rdp_oracle(const std::vector<Point>& pts, double eps) {
    if (pts.size() < 3) return pts;
    std::size_t idx = 0;
    __int128 num = -1, den = 1;
    for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
        const auto [n, d] = seg_dist_fraction(pts[i], pts.front(), pts.back());
        if (n > num) {
            num = n;
            den = d;
            idx = i;
        }
    }
    if (static_cast<long double>(num) <= static_cast<long double>(eps) * eps * static_cast<long double>(den))
        return {pts.front(), pts.back()};
    auto left = rdp_oracle(std::vector<Point>(pts.begin(), pts.begin() + idx + 1), eps);
    auto right = rdp_oracle(std::vector<Point>(pts.begin() + idx, pts.end()), eps);
    left.pop_back();
    left.insert(left.end(), right.begin(), right.end());
    return left;
}

// Line oracle: walk the major axis, choosing the minor coordinate nearest the
// ideal line; exact halves round away from the starting point, which is what
// the error-accumulating Bresenham produces.
std::set<std::pair<int, int>> line_oracle(int x0, int y0, int x1, int y1) {
    std::set<std::pair<int, int>> px;
    const int dx = x1 - x0, dy = y1 - y0;
    const int steps = std::max(std::abs(dx), std::abs(dy));
    if (steps == 0) return {{x0, y0}};
    for (int i = 0; i <= steps; ++i) {
        if (std::abs(dx) >= std::abs(dy)) {
            const int x = x0 + (dx > 0 ? i : -i);
            // minor = y0 + i*dy/steps, rounded half toward y0
            const long q = (2L * i * std::abs(dy) + steps) / (2L * steps);
            px.insert({x, y0 + (dy >= 0 ? 1 : -1) * static_cast<int>(q)});
        } else {
            const int y = y0 + (dy > 0 ? i : -i);
            const long q = (2L * i * std::abs(dx) + steps) / (2L * steps);
            px.insert({x0 + (dx >= 0 ? 1 : -1) * static_cast<int>(q), y});
        }
    }
    return px;
}

}  // namespace

// ------------------------------------------------------------------ NDJSON

TEST(NdjsonTest, MinimalRecord) {
    const auto s = parse_ndjson_line(R"({"key_id":"7","word":"nose","recognized":true,"drawing":[[[0,255],[0,255]]]})");
    EXPECT_EQ(s.id, 7u);
    EXPECT_EQ(s.category, "nose");
    EXPECT_EQ(s.recognized, true);
    ASSERT_EQ(s.strokes.size(), 1u);
    EXPECT_EQ(s.strokes[0].points, (std::vector<Point>{{0, 0}, {255, 255}}));
    EXPECT_FALSE(s.country);
    EXPECT_FALSE(s.timestamp);
}

TEST(NdjsonTest, PublishedRecordShape) {
    const std::string line =
        R"({"word":"cat","countrycode":"US","timestamp":"2017-03-08 21:12:07.26604 UTC","recognized":true,)"
        R"("key_id":"5201136883597312","drawing":[[[18,7,0,14],[44,37,21,0]],[[28,56],[3,2]]]})";
    const auto s = parse_ndjson_line(line);
    EXPECT_EQ(s.id, 5201136883597312ull);
    EXPECT_EQ(s.country, "US");
    EXPECT_EQ(s.timestamp, 1489007527u);

    // Cross-check counts with a generic JSON walk.
    const auto doc = nlohmann::json::parse(line);
    ASSERT_EQ(s.strokes.size(), doc["drawing"].size());
    for (std::size_t i = 0; i < s.strokes.size(); ++i)
        EXPECT_EQ(s.strokes[i].points.size(), doc["drawing"][i][0].size());
}

TEST(NdjsonTest, RejectsMalformedRecords) {
    EXPECT_THROW(parse_ndjson_line(R"({"word":"nose"})"), ParseError);
    EXPECT_THROW(parse_ndjson_line(R"({"word":"nose","drawing":[[[1,2],[3]]]})"), ParseError);
    EXPECT_THROW(parse_ndjson_line(R"({"drawing":[[[],[]]]})"), ParseError);
    EXPECT_THROW(parse_ndjson_line(R"({"drawing":[[[1.5],[3]]]})"), ParseError);
    EXPECT_THROW(parse_ndjson_line(R"({"drawing":[[[256],[3]]]})"), ParseError);
    EXPECT_THROW(parse_ndjson_line(R"({"drawing":[[[-1],[3]]]})"), ParseError);
    EXPECT_THROW(parse_ndjson_line(R"({"drawing":[]})"), ParseError);
    EXPECT_THROW(parse_ndjson_line(R"({"drawing":)"), ParseError);
    EXPECT_THROW(parse_ndjson_line(R"([1,2])"), ParseError);
    EXPECT_THROW(parse_ndjson_line(R"({"key_id":"x1","drawing":[[[1],[3]]]})"), ParseError);
}

TEST(NdjsonTest, SyntheticLinesMatchGenericParser) {
    for (const auto& s : fixtures::make_synthetic_sketches(6, 20, 3)) {
        const auto line = to_ndjson_line(s);
        const auto doc = nlohmann::json::parse(line);
        const auto parsed = parse_ndjson_line(line);
        ASSERT_EQ(parsed.strokes.size(), doc["drawing"].size());
        std::size_t points = 0, oracle_points = 0;
        for (const auto& st : parsed.strokes) points += st.points.size();
        for (const auto& st : doc["drawing"]) oracle_points += st[0].size();
        EXPECT_EQ(points, oracle_points);
        EXPECT_EQ(parsed, s);
    }
}

// ------------------------------------------------------------------ binary

TEST(BinaryRecordTest, HandBuiltRecord) {
    const std::vector<std::uint8_t> bytes{
        1, 0, 0, 0, 0, 0, 0, 0,  // key_id
        'U', 'S',                // country
        1,                       // recognized
        0, 0, 0, 0,              // timestamp
        1, 0,                    // n_strokes
        2, 0,                    // n_points
        0, 255,                  // xs
        0, 255,                  // ys
    };
    const auto [s, consumed] = parse_binary_record(bytes);
    EXPECT_EQ(consumed, 23u);
    EXPECT_EQ(s.id, 1u);
    EXPECT_EQ(s.country, "US");
    EXPECT_EQ(s.recognized, true);
    EXPECT_EQ(s.timestamp, 0u);
    ASSERT_EQ(s.strokes.size(), 1u);
    EXPECT_EQ(s.strokes[0].points, (std::vector<Point>{{0, 0}, {255, 255}}));
    EXPECT_EQ(encode_binary_record(s), bytes);
}

TEST(BinaryRecordTest, ConcatenatedRecordsStream) {
    SplitMix64 rng(5);
    std::vector<Sketch> sketches;
    std::vector<std::uint8_t> stream;
    for (int i = 0; i < 50; ++i) {
        sketches.push_back(random_sketch(rng));
        const auto b = encode_binary_record(sketches.back());
        stream.insert(stream.end(), b.begin(), b.end());
    }
    std::size_t offset = 0;
    for (const auto& expected : sketches) {
        const auto rec = parse_binary_record(std::span(stream).subspan(offset));
        EXPECT_EQ(rec.sketch, expected);
        offset += rec.bytes_consumed;
    }
    EXPECT_EQ(offset, stream.size());
}

TEST(BinaryRecordTest, RejectsTruncationAndZeroCounts) {
    Sketch s{1, {}, {Stroke{{{0, 0}, {255, 255}}}}, true, "US", 0};
    auto bytes = encode_binary_record(s);
    // Truncated right after n_strokes.
    EXPECT_THROW(parse_binary_record(std::span(bytes).first(17)), ParseError);
    for (std::size_t n = 0; n < bytes.size(); ++n) EXPECT_THROW(parse_binary_record(std::span(bytes).first(n)), ParseError);

    auto zero_strokes = bytes;
    zero_strokes[15] = 0;
    EXPECT_THROW(parse_binary_record(zero_strokes), ParseError);
    auto zero_points = bytes;
    zero_points[17] = 0;
    EXPECT_THROW(parse_binary_record(zero_points), ParseError);
    auto bad_flag = bytes;
    bad_flag[10] = 7;
    EXPECT_THROW(parse_binary_record(bad_flag), ParseError);
}

TEST(BinaryRecordTest, EncodeRejectsOutOfRange) {
    Sketch s{1, {}, {Stroke{{{0, 0}, {256, 1}}}}, true, "US", 0};
    EXPECT_THROW(encode_binary_record(s), EncodeError);
    Stroke huge;
    huge.points.assign(70000, Point{1, 1});
    EXPECT_THROW(encode_binary_record(Sketch{1, {}, {huge}, true, "US", 0}), EncodeError);
    EXPECT_THROW(encode_binary_record(Sketch{1, {}, {}, true, "US", 0}), EncodeError);
}

TEST(BinaryRecordTest, RoundTripProperty) {
    SplitMix64 rng(11);
    for (int i = 0; i < 10000; ++i) {
        const auto s = random_sketch(rng);
        const auto bytes = encode_binary_record(s);
        const auto rec = parse_binary_record(bytes);
        ASSERT_EQ(rec.sketch, s);
        ASSERT_EQ(rec.bytes_consumed, bytes.size());
        ASSERT_EQ(encode_binary_record(rec.sketch), bytes);
    }
}

// ------------------------------------------------------------------ RDP

TEST(RdpTest, Examples) {
    EXPECT_EQ(simplify_rdp(Stroke{{{0, 0}, {5, 5}, {10, 10}}}, 2).points, (std::vector<Point>{{0, 0}, {10, 10}}));
    for (double eps : {0.0, 2.0, 1000.0})
        EXPECT_EQ(simplify_rdp(Stroke{{{0, 0}, {255, 255}}}, eps).points, (std::vector<Point>{{0, 0}, {255, 255}}));
    EXPECT_EQ(simplify_rdp(Stroke{{{4, 4}}}, 2).points.size(), 1u);
    EXPECT_EQ(simplify_rdp(Stroke{{{4, 4}, {4, 4}, {9, 9}, {9, 9}}}, 0).points, (std::vector<Point>{{4, 4}, {9, 9}}));
}

TEST(RdpTest, MatchesRecursiveOracleAndProperties) {
    SplitMix64 rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        Stroke s;
        Point p{128, 128};
        for (int i = 0; i < 200; ++i) {
            p.x = std::clamp(p.x + static_cast<int>(rng.below(11)) - 5, 0, 255);
            p.y = std::clamp(p.y + static_cast<int>(rng.below(11)) - 5, 0, 255);
            s.points.push_back(p);
        }
        const auto simplified = simplify_rdp(s, 2.0);
        std::vector<Point> dedup;
        for (auto q : s.points)
            if (dedup.empty() || !(dedup.back() == q)) dedup.push_back(q);
        EXPECT_EQ(simplified.points, rdp_oracle(dedup, 2.0));
        EXPECT_LE(simplified.points.size(), s.points.size());
        EXPECT_EQ(simplified.points.front(), s.points.front());
        EXPECT_EQ(simplified.points.back(), s.points.back());
        EXPECT_EQ(simplify_rdp(simplified, 2.0), simplified);
        // Every dropped point stays within epsilon of the retained polyline.
        for (auto q : dedup) {
            double best = 1e9;
            for (std::size_t i = 0; i + 1 < simplified.points.size(); ++i)
                best = std::min(best, seg_dist(q, simplified.points[i], simplified.points[i + 1]));
            EXPECT_LE(best, 2.0 + 1e-9);
        }
    }
}

// ------------------------------------------------------------------ normalize

TEST(NormalizeTest, Examples) {
    Sketch already{1, "x", {Stroke{{{0, 0}, {255, 100}}}}, {}, {}, {}};
    EXPECT_EQ(normalize_sketch(already), already);

    Sketch dot{2, "x", {Stroke{{{37, 41}, {37, 41}}}, Stroke{{{37, 41}}}}, {}, {}, {}};
    for (const auto& st : normalize_sketch(dot).strokes)
        for (auto p : st.points) EXPECT_EQ(p, (Point{0, 0}));

    Sketch raw{3, {}, {Stroke{{{-100, 50}, {300, 250}}}}, {}, {}, {}};
    EXPECT_EQ(normalize_sketch(raw).strokes[0].points, (std::vector<Point>{{0, 0}, {255, 128}}));
}

TEST(NormalizeTest, BoundingBoxAndIdempotence) {
    SplitMix64 rng(17);
    for (int i = 0; i < 1000; ++i) {
        auto s = random_sketch(rng, 1000);
        for (auto& st : s.strokes)
            for (auto& p : st.points) p.x -= 500;
        const auto n = normalize_sketch(s);
        int min_x = 1 << 30, min_y = 1 << 30, max_xy = -1;
        bool degenerate = true;
        for (const auto& st : n.strokes)
            for (auto p : st.points) {
                min_x = std::min(min_x, p.x);
                min_y = std::min(min_y, p.y);
                max_xy = std::max({max_xy, p.x, p.y});
                degenerate &= p == n.strokes[0].points[0];
            }
        EXPECT_EQ(min_x, 0);
        EXPECT_EQ(min_y, 0);
        if (!degenerate) EXPECT_EQ(max_xy, 255);
        EXPECT_EQ(normalize_sketch(n), n);
    }
}

// ------------------------------------------------------------------ rasterize

TEST(RasterizeTest, AxisAlignedLineAndPoint) {
    const auto img = rasterize(Sketch{1, {}, {Stroke{{{0, 0}, {255, 0}}}}, {}, {}, {}}, 64);
    ASSERT_EQ(img.pixels.size(), 64u * 64u);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) EXPECT_EQ(img.at(x, y), y == 0 ? 1.0f : 0.0f);

    const auto dot = rasterize(Sketch{1, {}, {Stroke{{{0, 0}}}}, {}, {}, {}}, 64);
    EXPECT_EQ(std::count(dot.pixels.begin(), dot.pixels.end(), 1.0f), 1);
    EXPECT_EQ(dot.at(0, 0), 1.0f);
    EXPECT_THROW(rasterize(Sketch{1, {}, {Stroke{{{0, 0}}}}, {}, {}, {}}, 7), ValidationError);
}

TEST(RasterizeTest, MatchesLineOracle) {
    SplitMix64 rng(23);
    for (int trial = 0; trial < 500; ++trial) {
        const auto s = normalize_sketch(random_sketch(rng));
        const int side = trial % 2 ? 64 : 8 + static_cast<int>(rng.below(120));
        const auto img = rasterize(s, side);
        std::set<std::pair<int, int>> expected;
        auto px = [&](int v) { return static_cast<int>(std::lround(v * (side - 1) / 255.0)); };
        for (const auto& st : s.strokes) {
            expected.insert({px(st.points[0].x), px(st.points[0].y)});
            for (std::size_t i = 1; i < st.points.size(); ++i) {
                const auto seg = line_oracle(px(st.points[i - 1].x), px(st.points[i - 1].y), px(st.points[i].x),
                                             px(st.points[i].y));
                expected.insert(seg.begin(), seg.end());
            }
        }
        std::set<std::pair<int, int>> lit;
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x)
                if (img.at(x, y) == 1.0f) lit.insert({x, y});
                else ASSERT_EQ(img.at(x, y), 0.0f);
        ASSERT_EQ(lit, expected) << "trial " << trial;
        // Stroke endpoints are always lit; output is deterministic.
        for (const auto& st : s.strokes) {
            EXPECT_TRUE(lit.contains({px(st.points.front().x), px(st.points.front().y)}));
            EXPECT_TRUE(lit.contains({px(st.points.back().x), px(st.points.back().y)}));
        }
        EXPECT_EQ(rasterize(s, side), img);
    }
}

// ------------------------------------------------------------------ UI strokes & files

TEST(StrokesJsonTest, ParsesRawCoordinatesAndRejectsBadShapes) {
    const auto strokes = strokes_from_json(nlohmann::json::parse("[[[-5,7],[300.4,2]],[[1,1]]]"));
    ASSERT_EQ(strokes.size(), 2u);
    EXPECT_EQ(strokes[0].points, (std::vector<Point>{{-5, 7}, {300, 2}}));
    EXPECT_EQ(strokes_from_json(strokes_to_json(strokes)), strokes);
    for (const char* bad : {"[]", "{}", "[[]]", "[[[1]]]", "[[[1,\"a\"]]]", "[[[1,2,3]]]", "[[[1e300,2]]]"})
        EXPECT_THROW(strokes_from_json(nlohmann::json::parse(bad)), InvalidStrokes) << bad;
}

TEST(DatasetFileTest, ReadsNdjsonAndBinaryFiles) {
    fixtures::TempDir dir;
    const auto files = fixtures::write_synthetic_dataset(dir.path(), 2, 30, 1);
    ASSERT_EQ(files.size(), 2u);
    const auto sketches = read_sketch_file(files[0]);
    EXPECT_EQ(sketches.size(), 30u);

    const auto bin = dir / "full_binary_circle.bin";
    {
        std::ofstream out(bin, std::ios::binary);
        for (const auto& s : sketches) {
            const auto bytes = encode_binary_record(s);
            out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        }
    }
    const auto from_bin = read_sketch_file(bin);
    ASSERT_EQ(from_bin.size(), sketches.size());
    for (std::size_t i = 0; i < sketches.size(); ++i) {
        EXPECT_EQ(from_bin[i].category, "circle");
        EXPECT_EQ(from_bin[i].strokes, sketches[i].strokes);
    }

    std::ofstream(dir / "bad.ndjson") << "{\"drawing\":[[[1],[1]]]}\n{\"word\":\"x\"}\n";
    try {
        read_sketch_file(dir / "bad.ndjson");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
    }
}
