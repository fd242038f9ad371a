#include "sketchshift/shift_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "sketchshift/error.hpp"
#include "sketchshift/kmeans.hpp"
#include "sketchshift/rng.hpp"

namespace sketchshift {

namespace {

const Cluster& require_cluster(const ClusterKey& key, const ClusterModel& model) {
    if (const auto* c = model.find(key)) return *c;
    throw UnknownCluster("unknown cluster " + key.category + "/" + std::to_string(key.local_index));
}

bool has_other_category(const std::string& category, const ClusterModel& model) {
    return std::any_of(model.clusters.begin(), model.clusters.end(),
                       [&](const Cluster& c) { return c.category != category; });
}

// Nearest cluster to `source` in each category other than the source's.
std::map<std::string, ShiftProposal> best_per_other_category(const Cluster& source, const ClusterModel& model) {
    std::map<std::string, std::pair<double, ShiftProposal>> best;
    for (const auto& c : model.clusters) {
        if (c.category == source.category) continue;
        if (c.centroid.size() != source.centroid.size()) throw DimensionError("centroid dimension mismatch");
        const double d2 = squared_distance(source.centroid, c.centroid);
        auto it = best.find(c.category);
        if (it == best.end()) {
            best.emplace(c.category, std::pair{d2, ShiftProposal{source.key(), c.key(), 0.0, std::nullopt}});
        } else if (d2 < it->second.first ||
                   (d2 == it->second.first && c.local_index < it->second.second.target.local_index)) {
            it->second = {d2, ShiftProposal{source.key(), c.key(), 0.0, std::nullopt}};
        }
    }
    std::map<std::string, ShiftProposal> out;
    for (auto& [label, entry] : best) {
        entry.second.distance = std::sqrt(entry.first);
        out.emplace(label, std::move(entry.second));
    }
    return out;
}

}  // namespace

FeatureVector featurize(const Sketch& sketch, const Embedder& embedder, const PreprocessOptions& options) {
    const auto prepared = normalize_sketch(simplify_sketch(sketch, options.rdp_epsilon));
    return embedder.embed(rasterize(prepared, options.raster_side));
}

MatrixFeatures::MatrixFeatures(const EmbeddingMatrix& matrix) : matrix_(matrix) {
    row_of_.reserve(matrix.ids.size());
    for (std::size_t i = 0; i < matrix.ids.size(); ++i) row_of_.emplace(matrix.ids[i], i);
}

FeatureVector MatrixFeatures::features(const Sketch& sketch) const {
    const auto it = row_of_.find(sketch.id);
    if (it == row_of_.end()) throw MissingSketch("no embedding row for sketch " + std::to_string(sketch.id));
    return matrix_.rows[it->second];
}

Recognition recognize(const FeatureVector& v, const ClusterModel& model,
                      const std::optional<std::string>& only_category) {
    if (model.clusters.empty()) throw EmptyModel("model has no clusters");
    if (v.size() != model.fingerprint.dim) throw DimensionError("feature vector dimension differs from the model");
    const Cluster* best = nullptr;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (const auto& c : model.clusters) {
        if (only_category && c.category != *only_category) continue;
        if (c.centroid.size() != v.size()) throw DimensionError("centroid dimension mismatch");
        const double d2 = squared_distance(v, c.centroid);
        if (!best || d2 < best_d2 || (d2 == best_d2 && c.key() < best->key())) {
            best = &c;
            best_d2 = d2;
        }
    }
    if (!best) throw UnknownCluster("no clusters in category " + only_category.value_or(""));
    return {best->key(), std::sqrt(best_d2)};
}

ShiftProposal match_shift(const ClusterKey& source, const ClusterModel& model) {
    auto ranked = top_shifts(source, model, 1);
    return std::move(ranked.front());
}

std::vector<ShiftProposal> top_shifts(const ClusterKey& source, const ClusterModel& model, std::size_t n) {
    if (n == 0) throw ValidationError("n must be at least 1");
    const Cluster& src = require_cluster(source, model);
    if (!has_other_category(src.category, model))
        throw NoOtherCategory("model has no category other than " + src.category);
    std::vector<ShiftProposal> out;
    for (auto& [label, p] : best_per_other_category(src, model)) out.push_back(std::move(p));
    // `out` arrives in label order, so a stable sort keeps label order on ties.
    std::stable_sort(out.begin(), out.end(),
                     [](const ShiftProposal& a, const ShiftProposal& b) { return a.distance < b.distance; });
    if (out.size() > n) out.resize(n);
    return out;
}

Sketch contribute(const ShiftProposal& proposal, const ClusterModel& model, const SketchStore& store,
                  ContributionPolicy policy, std::uint64_t seed, std::uint64_t stream,
                  const FeatureSource* features) {
    const Cluster& target = require_cluster(proposal.target, model);
    if (target.member_ids.empty()) throw MissingSketch("target cluster has no members");

    if (policy == ContributionPolicy::seeded_random) {
        SplitMix64 rng(derive_seed({seed, stream}));
        const SketchId id = target.member_ids[rng.below(target.member_ids.size())];
        return store.at(id);
    }

    if (!features) throw ValidationError("medoid policy needs a feature source");
    const Sketch* best = nullptr;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (SketchId id : target.member_ids) {
        const Sketch& s = store.at(id);
        const auto v = features->features(s);
        if (v.size() != target.centroid.size()) throw DimensionError("member feature dimension mismatch");
        const double d2 = squared_distance(v, target.centroid);
        if (!best || d2 < best_d2 || (d2 == best_d2 && id < best->id)) {
            best = &s;
            best_d2 = d2;
        }
    }
    return *best;
}

std::uint64_t contribution_stream(std::size_t turn_index, std::size_t rank) {
    return derive_seed({static_cast<std::uint64_t>(turn_index), static_cast<std::uint64_t>(rank)});
}

TurnRecord respond_features(const FeatureVector& v, Sketch input, const ClusterModel& model,
                            const SketchStore& store, const TurnOptions& options, const FeatureSource* features) {
    TurnRecord turn;
    turn.turn_index = options.turn_index;
    turn.input = std::move(input);
    turn.recognition = recognize(v, model, options.recognize_within);
    turn.proposals = top_shifts(turn.recognition.cluster, model, options.n);
    for (std::size_t rank = 0; rank < turn.proposals.size(); ++rank) {
        auto& p = turn.proposals[rank];
        Sketch exemplar = contribute(p, model, store, options.policy, options.seed,
                                     contribution_stream(options.turn_index, rank), features);
        p.exemplar_id = exemplar.id;
        if (rank == 0) turn.response = std::move(exemplar);
    }
    return turn;
}

TurnRecord respond_turn(const std::vector<Stroke>& strokes, const ClusterModel& model, const SketchStore& store,
                        const Embedder& embedder, const TurnOptions& options) {
    if (strokes.empty()) throw InvalidStrokes("no strokes");
    for (const auto& s : strokes)
        if (s.points.empty()) throw InvalidStrokes("empty stroke");
    if (embedder.fingerprint() != model.fingerprint)
        throw ValidationError("embedder fingerprint does not match the model");
    Sketch input;
    input.strokes = strokes;
    const auto v = featurize(input, embedder, options.preprocess);
    const EmbedderFeatures member_features(embedder, options.preprocess);
    return respond_features(v, std::move(input), model, store, options, &member_features);
}

}  // namespace sketchshift
