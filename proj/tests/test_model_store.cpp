#include <gtest/gtest.h>

#include <fstream>

#include "sketchshift/error.hpp"
#include "sketchshift/ingest.hpp"
#include "sketchshift/model_store.hpp"
#include "support/random_model.hpp"
#include "support/synthetic.hpp"

using namespace sketchshift;

namespace {

void round_to_float(ClusterModel& m) {
    for (auto& c : m.clusters)
        for (auto& x : c.centroid) x = static_cast<float>(x);
}

ClusterModel minimal() {
    ClusterModel m;
    m.fingerprint = {"refgrad", 1, 2, 0xfeedfacecafebeefULL};
    m.categories = {"nose", "tree"};
    m.per_category_k = {{"nose", 1}, {"tree", 1}};
    m.clusters = {{"nose", 0, {0.5, -1.25}, {7}}, {"tree", 0, {3.0, 4.0}, {8, 9}}};
    return m;
}

}  // namespace

TEST(ModelStoreTest, MinimalRoundTrip) {
    fixtures::TempDir dir;
    const auto m = minimal();
    const auto bytes = save_model(m, dir / "m.skcm");
    EXPECT_EQ(bytes, std::filesystem::file_size(dir / "m.skcm"));
    const auto back = load_model(dir / "m.skcm");
    EXPECT_EQ(back, m);
    EXPECT_EQ(encode_model(back), encode_model(m));
}

TEST(ModelStoreTest, LayoutHeader) {
    const auto bytes = encode_model(minimal());
    ASSERT_GE(bytes.size(), 8u);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "SKCM");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[5] | bytes[6] | bytes[7], 0);
    // name length, name, version, dim, digest
    EXPECT_EQ(bytes[8], 7);
    EXPECT_EQ(std::string(bytes.begin() + 12, bytes.begin() + 19), "refgrad");
    std::size_t expected = 8 + 4 + 7 + 4 + 4 + 8;                 // header + fingerprint
    expected += 4 + (4 + 4 + 4) + (4 + 4 + 4);                     // categories
    expected += 4 + (4 + 4 + 8 + 8 + 8) + (4 + 4 + 8 + 16 + 8);    // clusters
    EXPECT_EQ(bytes.size(), expected);
}

TEST(ModelStoreTest, SixtyFiveCategories) {
    SplitMix64 rng(1);
    auto rm = fixtures::make_random_model(rng, 65, 4, 16);
    round_to_float(rm.model);
    fixtures::TempDir dir;
    save_model(rm.model, dir / "m.skcm");
    const auto back = load_model(dir / "m.skcm");
    EXPECT_EQ(back.categories.size(), 65u);
    EXPECT_EQ(back.categories, rm.model.categories);
    EXPECT_EQ(back, rm.model);
}

TEST(ModelStoreTest, UnwritableDestination) {
    EXPECT_THROW(save_model(minimal(), "/nonexistent-dir/m.skcm"), IoError);
    EXPECT_THROW(load_model("/nonexistent-dir/m.skcm"), IoError);
}

TEST(ModelStoreTest, SaveRejectsInvalidModel) {
    auto m = minimal();
    m.clusters[1].member_ids.clear();
    EXPECT_THROW(encode_model(m), ValidationError);
}

TEST(ModelStoreTest, UnsupportedVersion) {
    auto bytes = encode_model(minimal());
    bytes[4] = 2;
    try {
        decode_model(bytes);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), 4u);
        EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
    }
}

TEST(ModelStoreTest, RejectsInvariantViolations) {
    const auto good = encode_model(minimal());
    // Duplicate (category, local index): point the second cluster at category 0.
    auto dup = good;
    const std::size_t second_cluster = good.size() - (4 + 4 + 8 + 16 + 8);
    dup[second_cluster] = 0;
    EXPECT_THROW(decode_model(dup), FormatError);
    auto nan = good;
    nan[good.size() - 1] = 0x7f;
    nan[good.size() - 2] = 0xc0;
    EXPECT_THROW(decode_model(nan), FormatError);
    auto trailing = good;
    trailing.push_back(0);
    EXPECT_THROW(decode_model(trailing), FormatError);
}

TEST(ModelStoreTest, TruncationFuzz) {
    SplitMix64 rng(2);
    int cases = 0;
    while (cases < 10000) {
        auto rm = fixtures::make_random_model(rng, 2 + rng.below(5), 3, 1 + rng.below(6));
        round_to_float(rm.model);
        const auto bytes = encode_model(rm.model);
        ASSERT_EQ(decode_model(bytes), rm.model);
        for (int j = 0; j < 50; ++j, ++cases) {
            const std::size_t n = rng.below(bytes.size());
            ASSERT_THROW(decode_model(std::span(bytes).first(n)), FormatError);
        }
    }
}

TEST(ModelStoreTest, MutationFuzzNeverAcceptsInvalid) {
    SplitMix64 rng(3);
    for (int t = 0; t < 3000; ++t) {
        auto rm = fixtures::make_random_model(rng, 2 + rng.below(3), 2, 3);
        auto bytes = encode_model(rm.model);
        bytes[rng.below(bytes.size())] ^= static_cast<std::uint8_t>(1 + rng.below(255));
        try {
            const auto m = decode_model(bytes);
            EXPECT_NO_THROW(validate_model(m));
        } catch (const FormatError&) {
        }
    }
}

TEST(SketchStoreTest, EmptySource) {
    const auto s = build_store(std::vector<Sketch>{});
    EXPECT_TRUE(s.empty());
    EXPECT_TRUE(s.by_category().empty());
}

TEST(SketchStoreTest, CountsMatchLineCount) {
    fixtures::TempDir dir;
    const auto files = fixtures::write_synthetic_dataset(dir.path(), 4, 250, 9);
    const auto store = build_store_from_files(files);
    EXPECT_EQ(store.size(), 1000u);
    for (const auto& f : files) {
        std::ifstream in(f);
        std::size_t lines = 0;
        for (std::string l; std::getline(in, l);)
            if (!l.empty()) ++lines;
        EXPECT_EQ(store.ids_in(f.stem().string()).size(), lines);
    }
    for (const auto& [cat, ids] : store.by_category())
        for (auto id : ids) EXPECT_EQ(*store.at(id).category, cat);
}

TEST(SketchStoreTest, DuplicateIdAndErrors) {
    std::vector<Sketch> s(2);
    s[0] = {.id = 7, .category = "a", .strokes = {Stroke{{{0, 0}}}}};
    s[1] = {.id = 7, .category = "b", .strokes = {Stroke{{{1, 1}}}}};
    EXPECT_THROW(build_store(s), DuplicateId);
    SketchStore store;
    EXPECT_THROW(store.add({.id = 1, .strokes = {Stroke{{{0, 0}}}}}), ValidationError);
    EXPECT_THROW(store.at(3), MissingSketch);
    EXPECT_EQ(store.find(3), nullptr);
}
