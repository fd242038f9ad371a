#include "sketchshift/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include <Eigen/Dense>

#include "byte_io.hpp"
#include "sketchshift/error.hpp"
#include "sketchshift/rng.hpp"

namespace sketchshift {

std::uint64_t category_seed(std::uint64_t seed, const std::string& category) {
    return derive_seed({seed, detail::fnv1a(category)});
}

CategoryFit fit_category(const std::string& category, std::vector<SketchId> ids,
                         const std::vector<FeatureVector>& points, const FitParams& params,
                         std::optional<std::size_t> k_override) {
    if (points.empty()) throw InsufficientPoints("category " + category + " has no sketches");
    CategoryFit out;
    out.category = category;
    out.ids = std::move(ids);
    const std::uint64_t seed = category_seed(params.seed, category);
    const std::size_t n = points.size();
    const std::size_t k_max = std::min(params.k_max, n);

    if (k_override) {
        if (*k_override == 0 || *k_override > n)
            throw InsufficientPoints("category " + category + ": k override exceeds its sketch count");
        KMeansConfig cfg;
        cfg.k = *k_override;
        cfg.seed = seed ^ cfg.k;
        out.fit = kmeans_fit(points, cfg);
    } else if (k_max < params.k_min + 1) {
        // Too few sketches for a sweep.
        KMeansConfig cfg;
        cfg.k = std::min(params.k_min, n);
        cfg.seed = seed ^ cfg.k;
        out.fit = kmeans_fit(points, cfg);
    } else {
        auto elbow = elbow_select_k(points, params.k_min, k_max, seed);
        out.elbow = std::move(elbow.curve);
        out.fit = std::move(*elbow.fit);
    }
    return out;
}

FitOutcome fit_model(const SketchStore& store, const FeatureSource& features,
                     const EmbedderFingerprint& fingerprint, const FitParams& params) {
    if (params.k_min < 1 || params.k_max < params.k_min) throw ValidationError("invalid elbow range");
    if (params.sample_cap < params.k_max) throw ValidationError("sample cap must be at least k_max");

    std::vector<std::string> labels = params.categories;
    if (labels.empty())
        for (const auto& [label, ids] : store.by_category()) labels.push_back(label);
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    for (const auto& label : labels)
        if (store.ids_in(label).empty()) throw ValidationError("no sketches for category " + label);
    if (labels.size() < 2) throw ValidationError("need at least two categories to fit a model");
    for (const auto& [label, k] : params.k_overrides)
        if (!std::binary_search(labels.begin(), labels.end(), label))
            throw ValidationError("k override for unselected category " + label);

    FitOutcome outcome;
    outcome.per_category.resize(labels.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < labels.size(); i = next++) {
            try {
                const auto& all = store.ids_in(labels[i]);
                std::vector<SketchId> ids(all.begin(), all.begin() + std::min(all.size(), params.sample_cap));
                std::vector<FeatureVector> points;
                points.reserve(ids.size());
                for (auto id : ids) {
                    points.push_back(features.features(store.at(id)));
                    if (points.back().size() != fingerprint.dim)
                        throw DimensionError("feature dimension differs from the embedder's");
                }
                std::optional<std::size_t> k_override;
                if (auto it = params.k_overrides.find(labels[i]); it != params.k_overrides.end())
                    k_override = it->second;
                outcome.per_category[i] = fit_category(labels[i], std::move(ids), points, params, k_override);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = labels.size();
            }
        }
    };
    unsigned threads = params.threads ? params.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(labels.size()));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    auto& model = outcome.model;
    model.fingerprint = fingerprint;
    model.categories = labels;
    for (const auto& cf : outcome.per_category) {
        const std::size_t k = cf.fit.centroids.size();
        model.per_category_k[cf.category] = k;
        for (std::size_t j = 0; j < k; ++j) {
            Cluster c;
            c.category = cf.category;
            c.local_index = j;
            c.centroid.reserve(cf.fit.centroids[j].size());
            for (double v : cf.fit.centroids[j]) c.centroid.push_back(static_cast<float>(v));
            for (std::size_t p = 0; p < cf.ids.size(); ++p)
                if (cf.fit.assignments[p] == j) c.member_ids.push_back(cf.ids[p]);
            model.clusters.push_back(std::move(c));
        }
    }
    validate_model(model);
    return outcome;
}

Projection2D project_pca(const std::vector<FeatureVector>& points) {
    Projection2D out;
    if (points.empty()) return out;
    const std::size_t dim = check_uniform_dim(points);
    const auto n = static_cast<Eigen::Index>(points.size());
    const auto d = static_cast<Eigen::Index>(dim);

    Eigen::MatrixXd x(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) = points[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    const Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;

    // Eigenvectors of the covariance, obtained from whichever of X'X and XX'
    // is smaller; both share the nonzero spectrum.
    Eigen::MatrixXd axes = Eigen::MatrixXd::Zero(d, 2);
    double variances[2] = {0.0, 0.0};
    const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
    if (n <= d) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(x * x.transpose());
        for (int c = 0; c < 2 && c < n; ++c) {
            const double lambda = eig.eigenvalues()(n - 1 - c);
            if (lambda <= 1e-12 * std::max(1.0, eig.eigenvalues()(n - 1))) continue;
            axes.col(c) = x.transpose() * eig.eigenvectors().col(n - 1 - c) / std::sqrt(lambda);
            variances[c] = lambda / denom;
        }
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(x.transpose() * x);
        for (int c = 0; c < 2 && c < d; ++c) {
            const double lambda = eig.eigenvalues()(d - 1 - c);
            if (lambda <= 1e-12 * std::max(1.0, eig.eigenvalues()(d - 1))) continue;
            axes.col(c) = eig.eigenvectors().col(d - 1 - c);
            variances[c] = lambda / denom;
        }
    }
    for (int c = 0; c < 2; ++c) {
        Eigen::Index arg = 0;
        axes.col(c).cwiseAbs().maxCoeff(&arg);
        if (axes(arg, c) < 0) axes.col(c) = -axes.col(c);
    }
    const Eigen::MatrixXd proj = x * axes;

    out.mean.assign(mean.data(), mean.data() + d);
    for (int c = 0; c < 2; ++c) {
        out.components.emplace_back(axes.col(c).data(), axes.col(c).data() + d);
        out.explained[c] = variances[c];
    }
    out.coords.resize(points.size());
    for (Eigen::Index i = 0; i < n; ++i) out.coords[static_cast<std::size_t>(i)] = {proj(i, 0), proj(i, 1)};
    return out;
}

}  // namespace sketchshift
