#include <gtest/gtest.h>

#include <cmath>

#include "sketchshift/error.hpp"
#include "sketchshift/model_store.hpp"
#include "sketchshift/pipeline.hpp"
#include "sketchshift/rng.hpp"
#include "sketchshift/shift_engine.hpp"
#include "support/synthetic.hpp"

using namespace sketchshift;

namespace {

struct Data {
    std::vector<Sketch> sketches = fixtures::make_synthetic_sketches(4, 60, 5);
    SketchStore store = build_store(sketches);
    ReferenceEmbedder embedder;
};

double dot(const FeatureVector& a, const FeatureVector& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

TEST(FitModelTest, DeterministicAcrossThreadCounts) {
    Data d;
    EmbedderFeatures f(d.embedder);
    const FitParams one{.k_min = 2, .k_max = 6, .seed = 4, .threads = 1};
    FitParams many = one;
    many.threads = 4;
    const auto a = fit_model(d.store, f, d.embedder.fingerprint(), one);
    const auto b = fit_model(d.store, f, d.embedder.fingerprint(), many);
    EXPECT_EQ(encode_model(a.model), encode_model(b.model));
    EXPECT_NO_THROW(validate_model(a.model));
    EXPECT_EQ(a.model.categories.size(), 4u);
    for (const auto& pc : a.per_category) {
        EXPECT_EQ(pc.elbow.size(), 5u);
        EXPECT_EQ(pc.ids.size(), 60u);
        EXPECT_EQ(a.model.per_category_k.at(pc.category), pc.fit.centroids.size());
    }
    for (const auto& c : a.model.clusters)
        for (double x : c.centroid) EXPECT_EQ(x, static_cast<double>(static_cast<float>(x)));
}

TEST(FitModelTest, CapOverridesAndFilter) {
    Data d;
    EmbedderFeatures f(d.embedder);
    const auto& cats = fixtures::synthetic_categories();
    FitParams p{.categories = {cats[2], cats[0]}, .sample_cap = 20, .k_min = 2, .k_max = 4, .seed = 1};
    p.k_overrides[cats[0]] = 7;
    const auto out = fit_model(d.store, f, d.embedder.fingerprint(), p);
    EXPECT_EQ(out.model.categories, (std::vector<std::string>{cats[0], cats[2]}));
    EXPECT_EQ(out.model.per_category_k.at(cats[0]), 7u);
    EXPECT_TRUE(out.per_category[0].elbow.empty());
    std::size_t members = 0;
    for (const auto& c : out.model.clusters) members += c.member_count();
    EXPECT_EQ(members, 40u);
    const auto& first = d.store.ids_in(cats[0]);
    EXPECT_EQ(out.per_category[0].ids, std::vector<SketchId>(first.begin(), first.begin() + 20));
}

TEST(FitModelTest, Errors) {
    Data d;
    EmbedderFeatures f(d.embedder);
    const auto& cats = fixtures::synthetic_categories();
    EXPECT_THROW(fit_model(d.store, f, d.embedder.fingerprint(), {.categories = {cats[0], "unicorn"}}), Error);
    EXPECT_THROW(fit_model(d.store, f, d.embedder.fingerprint(), {.categories = {cats[0]}}), ValidationError);
    FitParams p{.categories = {cats[0], cats[1]}};
    p.k_overrides[cats[1]] = 61;
    EXPECT_THROW(fit_model(d.store, f, d.embedder.fingerprint(), p), InsufficientPoints);
}

TEST(FitCategoryTest, SmallCategoryClampsRange) {
    std::vector<FeatureVector> pts = {{0.0}, {1.0}, {10.0}, {11.0}};
    const auto r = fit_category("x", {1, 2, 3, 4}, pts, {.k_min = 2, .k_max = 10});
    EXPECT_EQ(r.elbow.size(), 3u);  // k = 2..4
    const auto tiny = fit_category("x", {1}, {{5.0}}, {.k_min = 2, .k_max = 10});
    EXPECT_EQ(tiny.fit.centroids.size(), 1u);
}

TEST(ProjectPcaTest, ReconstructsRankTwoData) {
    SplitMix64 rng(6);
    for (std::size_t dim : {3u, 10u, 40u}) {
        // Points on a random plane: mean + a*u + b*w.
        FeatureVector mean(dim), u(dim), w(dim);
        for (std::size_t i = 0; i < dim; ++i) mean[i] = rng.normal(), u[i] = rng.normal(), w[i] = rng.normal();
        std::vector<FeatureVector> pts;
        for (std::size_t n : {5u, 60u}) {
            pts.clear();
            for (std::size_t j = 0; j < n; ++j) {
                const double a = rng.normal() * 3, b = rng.normal();
                FeatureVector p(dim);
                for (std::size_t i = 0; i < dim; ++i) p[i] = mean[i] + a * u[i] + b * w[i];
                pts.push_back(p);
            }
            const auto proj = project_pca(pts);
            ASSERT_EQ(proj.coords.size(), n);
            EXPECT_NEAR(dot(proj.components[0], proj.components[0]), 1.0, 1e-9);
            EXPECT_NEAR(dot(proj.components[1], proj.components[1]), 1.0, 1e-9);
            EXPECT_NEAR(dot(proj.components[0], proj.components[1]), 0.0, 1e-9);
            EXPECT_GE(proj.explained[0], proj.explained[1]);
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t i = 0; i < dim; ++i) {
                    const double r = proj.mean[i] + proj.coords[j][0] * proj.components[0][i] +
                                     proj.coords[j][1] * proj.components[1][i];
                    ASSERT_NEAR(r, pts[j][i], 1e-8);
                }
            for (const auto& comp : proj.components) {
                std::size_t arg = 0;
                for (std::size_t i = 1; i < dim; ++i)
                    if (std::abs(comp[i]) > std::abs(comp[arg])) arg = i;
                EXPECT_GT(comp[arg], 0.0);
            }
        }
    }
}

TEST(ProjectPcaTest, KnownAxes) {
    // Variance 4 along x, 1 along y; the sign convention fixes both axes.
    const std::vector<FeatureVector> pts = {{2, 0}, {-2, 0}, {0, 1}, {0, -1}};
    const auto proj = project_pca(pts);
    EXPECT_NEAR(proj.components[0][0], 1.0, 1e-12);
    EXPECT_NEAR(proj.components[1][1], 1.0, 1e-12);
    EXPECT_NEAR(proj.coords[0][0], 2.0, 1e-12);
    EXPECT_NEAR(proj.coords[3][1], -1.0, 1e-12);
    EXPECT_NEAR(proj.explained[0] / proj.explained[1], 4.0, 1e-9);
}
