#pragma once

// Offline fit: features per category -> elbow-selected k-means -> model.

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sketchshift/kmeans.hpp"
#include "sketchshift/model.hpp"
#include "sketchshift/model_store.hpp"
#include "sketchshift/shift_engine.hpp"

namespace sketchshift {

struct FitParams {
    std::vector<std::string> categories;  // empty: every category in the store
    std::size_t sample_cap = 110000;
    std::size_t k_min = 2;
    std::size_t k_max = 10;
    std::uint64_t seed = 0;
    std::map<std::string, std::size_t> k_overrides;
    unsigned threads = 0;  // 0: hardware concurrency
};

struct CategoryFit {
    std::string category;
    std::vector<SketchId> ids;        // points in fit order
    std::vector<ElbowPoint> elbow;    // empty when k was fixed
    KMeansResult fit;
};

struct FitOutcome {
    ClusterModel model;
    std::vector<CategoryFit> per_category;  // label order
};

/// Fits one category's points. k comes from `k_override` when set,
/// otherwise from the elbow over [k_min, k_max] clamped to the point count.
CategoryFit fit_category(const std::string& category, std::vector<SketchId> ids,
                         const std::vector<FeatureVector>& points, const FitParams& params,
                         std::optional<std::size_t> k_override = std::nullopt);

/// Takes the first `sample_cap` sketches of each selected category in store
/// order. Centroids are rounded to float32, the precision they persist at.
FitOutcome fit_model(const SketchStore& store, const FeatureSource& features,
                     const EmbedderFingerprint& fingerprint, const FitParams& params);

/// Per-category seed for the elbow sweep.
std::uint64_t category_seed(std::uint64_t seed, const std::string& category);

struct Projection2D {
    FeatureVector mean;
    std::vector<FeatureVector> components;  // two rows of length dim
    double explained[2] = {0.0, 0.0};       // variances along each component
    std::vector<std::array<double, 2>> coords;
};

/// Principal-component projection onto the top two axes. Each component is
/// signed so its largest-magnitude loading is positive.
Projection2D project_pca(const std::vector<FeatureVector>& points);

}  // namespace sketchshift
