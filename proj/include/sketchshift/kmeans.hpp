#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "sketchshift/embedding.hpp"

namespace sketchshift {

struct KMeansConfig {
    std::size_t k = 1;
    std::uint64_t seed = 0;
    std::size_t max_iters = 100;
    double rel_tol = 1e-6;  // relative WCSS improvement threshold
};

struct KMeansResult {
    std::vector<FeatureVector> centroids;
    std::vector<std::size_t> assignments;
    double wcss = 0.0;
    std::size_t iterations = 0;
    /// True when the final assignment step left every point where it was;
    /// only then is every point guaranteed to sit with its nearest centroid.
    bool converged = false;
    /// WCSS after each centroid update, in order.
    std::vector<double> wcss_history;
};

struct Nearest {
    std::size_t index = 0;
    double distance = 0.0;  // Euclidean
};

/// Throws DimensionError on an empty or ragged point set.
std::size_t check_uniform_dim(std::span<const FeatureVector> points);

double squared_distance(std::span<const double> a, std::span<const double> b);
double euclidean_distance(std::span<const double> a, std::span<const double> b);

/// Nearest centroid by Euclidean distance; ties go to the lowest index.
Nearest assign_nearest(std::span<const double> v, std::span<const FeatureVector> centroids);

/// k-means++ seeding. Returns indices into `points` in selection order.
std::vector<std::size_t> kmeans_pp_indices(std::span<const FeatureVector> points, std::size_t k,
                                           std::uint64_t seed);
std::vector<FeatureVector> kmeans_pp_init(std::span<const FeatureVector> points, std::size_t k,
                                          std::uint64_t seed);

/// Lloyd iterations from k-means++ seeding. Empty clusters are repaired by
/// moving in the point farthest from its centroid (taken from a cluster
/// with more than one member; ties to the lowest point index).
KMeansResult kmeans_fit(std::span<const FeatureVector> points, const KMeansConfig& config);

struct ElbowPoint {
    std::size_t k = 0;
    double wcss = 0.0;
};

struct ElbowResult {
    std::size_t k = 0;
    std::vector<ElbowPoint> curve;
    /// The fit for the selected k; empty when a custom ElbowFit was used.
    std::optional<KMeansResult> fit;
};

/// Maximum perpendicular distance to the chord joining the first and last
/// curve points; ties go to the smallest k.
std::size_t select_elbow(std::span<const ElbowPoint> curve);

/// Produces the WCSS for one k; the default runs kmeans_fit.
using ElbowFit = std::function<double(std::size_t k, std::uint64_t seed)>;

/// Fits every k in [k_min, k_max] with seed = seed XOR k and picks the knee.
ElbowResult elbow_select_k(std::span<const FeatureVector> points, std::size_t k_min, std::size_t k_max,
                           std::uint64_t seed, const ElbowFit& fit = {});

}  // namespace sketchshift
