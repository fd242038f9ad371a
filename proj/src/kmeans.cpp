#include "sketchshift/kmeans.hpp"

#include <cmath>
#include <limits>

#include "sketchshift/error.hpp"
#include "sketchshift/rng.hpp"

namespace sketchshift {

namespace {

struct Assignment {
    std::vector<std::size_t> labels;
    std::vector<double> sq_dist;
};

Assignment assign_all(std::span<const FeatureVector> points, std::span<const FeatureVector> centroids) {
    Assignment a{std::vector<std::size_t>(points.size()), std::vector<double>(points.size())};
    for (std::size_t i = 0; i < points.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < centroids.size(); ++j) {
            const double d = squared_distance(points[i], centroids[j]);
            if (d < best) {
                best = d;
                best_j = j;
            }
        }
        a.labels[i] = best_j;
        a.sq_dist[i] = best;
    }
    return a;
}

void repair_empty(Assignment& a, std::size_t k) {
    std::vector<std::size_t> counts(k, 0);
    for (auto l : a.labels) ++counts[l];
    for (std::size_t j = 0; j < k; ++j) {
        if (counts[j] != 0) continue;
        std::size_t victim = a.labels.size();
        double farthest = -1.0;
        for (std::size_t i = 0; i < a.labels.size(); ++i) {
            if (counts[a.labels[i]] > 1 && a.sq_dist[i] > farthest) {
                farthest = a.sq_dist[i];
                victim = i;
            }
        }
        if (victim == a.labels.size()) continue;  // unreachable while |points| >= k
        --counts[a.labels[victim]];
        a.labels[victim] = j;
        a.sq_dist[victim] = 0.0;
        counts[j] = 1;
    }
}

std::vector<FeatureVector> member_means(std::span<const FeatureVector> points, std::span<const std::size_t> labels,
                                        std::size_t k, std::size_t dim) {
    std::vector<FeatureVector> sums(k, FeatureVector(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        auto& s = sums[labels[i]];
        for (std::size_t d = 0; d < dim; ++d) s[d] += points[i][d];
        ++counts[labels[i]];
    }
    for (std::size_t j = 0; j < k; ++j)
        for (auto& v : sums[j]) v /= static_cast<double>(counts[j]);
    return sums;
}

double total_wcss(std::span<const FeatureVector> points, std::span<const std::size_t> labels,
                  std::span<const FeatureVector> centroids) {
    double w = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) w += squared_distance(points[i], centroids[labels[i]]);
    return w;
}

}  // namespace

std::size_t check_uniform_dim(std::span<const FeatureVector> points) {
    if (points.empty()) throw InsufficientPoints("no points");
    const std::size_t dim = points.front().size();
    if (dim == 0) throw DimensionError("feature vectors must have positive dimension");
    for (const auto& p : points)
        if (p.size() != dim) throw DimensionError("feature vectors have mixed dimensions");
    return dim;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(squared_distance(a, b));
}

Nearest assign_nearest(std::span<const double> v, std::span<const FeatureVector> centroids) {
    if (centroids.empty()) throw DimensionError("no centroids");
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < centroids.size(); ++j) {
        if (centroids[j].size() != v.size()) throw DimensionError("centroid dimension mismatch");
        const double d = squared_distance(v, centroids[j]);
        if (d < best) {
            best = d;
            best_j = j;
        }
    }
    return {best_j, std::sqrt(best)};
}

std::vector<std::size_t> kmeans_pp_indices(std::span<const FeatureVector> points, std::size_t k,
                                           std::uint64_t seed) {
    if (k == 0) throw ValidationError("k must be at least 1");
    if (points.size() < k) throw InsufficientPoints("fewer points than clusters");
    check_uniform_dim(points);

    SplitMix64 rng(seed);
    std::vector<std::size_t> chosen;
    chosen.reserve(k);
    chosen.push_back(static_cast<std::size_t>(rng.below(points.size())));
    std::vector<double> nearest(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) nearest[i] = squared_distance(points[i], points[chosen[0]]);

    while (chosen.size() < k) {
        double total = 0.0;
        for (double d : nearest) total += d;
        std::size_t pick = points.size();
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < points.size(); ++i) {
                if (nearest[i] <= 0.0) continue;
                acc += nearest[i];
                pick = i;
                if (acc > target) break;
            }
        } else {
            // Every remaining point coincides with a chosen one: pick uniformly
            // among the indices not yet taken.
            std::vector<std::size_t> rest;
            std::vector<bool> taken(points.size(), false);
            for (auto c : chosen) taken[c] = true;
            for (std::size_t i = 0; i < points.size(); ++i)
                if (!taken[i]) rest.push_back(i);
            pick = rest[rng.below(rest.size())];
        }
        chosen.push_back(pick);
        for (std::size_t i = 0; i < points.size(); ++i)
            nearest[i] = std::min(nearest[i], squared_distance(points[i], points[pick]));
    }
    return chosen;
}

std::vector<FeatureVector> kmeans_pp_init(std::span<const FeatureVector> points, std::size_t k,
                                          std::uint64_t seed) {
    std::vector<FeatureVector> out;
    for (auto i : kmeans_pp_indices(points, k, seed)) out.push_back(points[i]);
    return out;
}

KMeansResult kmeans_fit(std::span<const FeatureVector> points, const KMeansConfig& config) {
    if (config.k == 0 || config.max_iters == 0 || !(config.rel_tol >= 0.0))
        throw ValidationError("invalid k-means configuration");
    if (points.size() < config.k) throw InsufficientPoints("fewer points than clusters");
    const std::size_t dim = check_uniform_dim(points);
    for (const auto& p : points)
        for (double v : p)
            if (!std::isfinite(v)) throw ValidationError("non-finite feature value");

    const std::size_t k = config.k;
    KMeansResult result;
    auto current = assign_all(points, kmeans_pp_init(points, k, config.seed));
    repair_empty(current, k);
    result.centroids = member_means(points, current.labels, k, dim);
    double wcss = total_wcss(points, current.labels, result.centroids);
    result.wcss_history.push_back(wcss);
    result.iterations = 1;

    while (result.iterations < config.max_iters) {
        auto next = assign_all(points, result.centroids);
        if (next.labels == current.labels) {
            result.converged = true;
            break;
        }
        repair_empty(next, k);
        current = std::move(next);
        result.centroids = member_means(points, current.labels, k, dim);
        const double updated = total_wcss(points, current.labels, result.centroids);
        result.wcss_history.push_back(updated);
        ++result.iterations;
        const double improvement = wcss - updated;
        wcss = updated;
        if (wcss == 0.0 || improvement < config.rel_tol * (wcss + improvement)) break;
    }
    if (!result.converged) result.converged = assign_all(points, result.centroids).labels == current.labels;

    result.assignments = std::move(current.labels);
    result.wcss = wcss;
    return result;
}

std::size_t select_elbow(std::span<const ElbowPoint> curve) {
    if (curve.empty()) throw ValidationError("empty elbow curve");
    const auto& a = curve.front();
    const auto& b = curve.back();
    const double dx = static_cast<double>(b.k) - static_cast<double>(a.k);
    const double dy = b.wcss - a.wcss;
    // The chord length is shared by every candidate, so the cross product
    // alone orders perpendicular distances.
    std::size_t best_k = a.k;
    double best = -1.0;
    for (const auto& p : curve) {
        const double cross = std::abs(dx * (a.wcss - p.wcss) - (static_cast<double>(a.k) - p.k) * dy);
        if (cross > best) {
            best = cross;
            best_k = p.k;
        }
    }
    return best_k;
}

ElbowResult elbow_select_k(std::span<const FeatureVector> points, std::size_t k_min, std::size_t k_max,
                           std::uint64_t seed, const ElbowFit& fit) {
    if (k_min < 1 || k_max < k_min + 1) throw ValidationError("elbow range requires 1 <= k_min < k_max");
    if (points.size() < k_max) throw InsufficientPoints("fewer points than k_max");

    ElbowResult out;
    std::vector<KMeansResult> fits;
    for (std::size_t k = k_min; k <= k_max; ++k) {
        const std::uint64_t k_seed = seed ^ static_cast<std::uint64_t>(k);
        if (fit) {
            out.curve.push_back({k, fit(k, k_seed)});
        } else {
            KMeansConfig cfg;
            cfg.k = k;
            cfg.seed = k_seed;
            fits.push_back(kmeans_fit(points, cfg));
            out.curve.push_back({k, fits.back().wcss});
        }
    }
    out.k = select_elbow(out.curve);
    if (!fit) out.fit = std::move(fits[out.k - k_min]);
    return out;
}

}  // namespace sketchshift
