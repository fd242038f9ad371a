#pragma once

// Recognize -> match -> contribute: the agent's response to one sketch.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sketchshift/embedding.hpp"
#include "sketchshift/ingest.hpp"
#include "sketchshift/model.hpp"
#include "sketchshift/model_store.hpp"

namespace sketchshift {

struct Recognition {
    ClusterKey cluster;
    double distance = 0.0;  // Euclidean, input vector to centroid

    friend bool operator==(const Recognition&, const Recognition&) = default;
};

struct ShiftProposal {
    ClusterKey source;
    ClusterKey target;
    double distance = 0.0;  // Euclidean, between centroids
    std::optional<SketchId> exemplar_id;

    friend bool operator==(const ShiftProposal&, const ShiftProposal&) = default;
};

struct TurnRecord {
    std::size_t turn_index = 0;
    Sketch input;
    Recognition recognition;
    std::vector<ShiftProposal> proposals;
    Sketch response;

    friend bool operator==(const TurnRecord&, const TurnRecord&) = default;
};

enum class ContributionPolicy { seeded_random, medoid };

/// Resolves the feature vector of a stored sketch (used by the medoid policy
/// and by replay of precomputed embeddings).
class FeatureSource {
public:
    virtual ~FeatureSource() = default;
    virtual FeatureVector features(const Sketch& sketch) const = 0;
};

struct PreprocessOptions {
    double rdp_epsilon = kDefaultRdpEpsilon;
    int raster_side = kDefaultRasterSide;
};

/// simplify -> normalize -> rasterize -> embed.
FeatureVector featurize(const Sketch& sketch, const Embedder& embedder, const PreprocessOptions& options = {});

class EmbedderFeatures final : public FeatureSource {
public:
    EmbedderFeatures(const Embedder& embedder, PreprocessOptions options = {})
        : embedder_(embedder), options_(options) {}
    FeatureVector features(const Sketch& sketch) const override { return featurize(sketch, embedder_, options_); }

private:
    const Embedder& embedder_;
    PreprocessOptions options_;
};

/// Looks rows up by sketch id; throws MissingSketch for unknown ids.
class MatrixFeatures final : public FeatureSource {
public:
    explicit MatrixFeatures(const EmbeddingMatrix& matrix);
    FeatureVector features(const Sketch& sketch) const override;

private:
    const EmbeddingMatrix& matrix_;
    std::unordered_map<SketchId, std::size_t> row_of_;
};

/// Global nearest centroid, or within `only_category` when given. Ties go to
/// the smallest (category, local index).
Recognition recognize(const FeatureVector& v, const ClusterModel& model,
                      const std::optional<std::string>& only_category = std::nullopt);

/// Nearest cluster of any other category to the source centroid.
ShiftProposal match_shift(const ClusterKey& source, const ClusterModel& model);

/// Best cluster per other category, ranked by distance (ties by label);
/// at most min(n, other categories) entries.
std::vector<ShiftProposal> top_shifts(const ClusterKey& source, const ClusterModel& model, std::size_t n);

/// Picks the exemplar sketch for a proposal's target cluster. The random
/// policy draws from a stream fixed by (seed, stream).
Sketch contribute(const ShiftProposal& proposal, const ClusterModel& model, const SketchStore& store,
                  ContributionPolicy policy, std::uint64_t seed, std::uint64_t stream = 0,
                  const FeatureSource* features = nullptr);

struct TurnOptions {
    PreprocessOptions preprocess;
    std::size_t n = 5;
    ContributionPolicy policy = ContributionPolicy::seeded_random;
    std::uint64_t seed = 0;
    std::size_t turn_index = 0;
    std::optional<std::string> recognize_within;
};

/// Stream id for the contribution of proposal `rank` of turn `turn_index`.
std::uint64_t contribution_stream(std::size_t turn_index, std::size_t rank);

/// The turn after featurization: recognize, rank shifts, pick exemplars.
TurnRecord respond_features(const FeatureVector& v, Sketch input, const ClusterModel& model,
                            const SketchStore& store, const TurnOptions& options,
                            const FeatureSource* features = nullptr);

/// Full turn from raw strokes. Throws InvalidStrokes for empty input and
/// ValidationError when the embedder does not match the model.
TurnRecord respond_turn(const std::vector<Stroke>& strokes, const ClusterModel& model, const SketchStore& store,
                        const Embedder& embedder, const TurnOptions& options);

}  // namespace sketchshift
