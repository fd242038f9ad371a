#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "sketchshift/embedding.hpp"

namespace sketchshift {

/// (category, local index) names one sub-cluster of one category.
struct ClusterKey {
    std::string category;
    std::size_t local_index = 0;

    friend auto operator<=>(const ClusterKey&, const ClusterKey&) = default;
    friend bool operator==(const ClusterKey&, const ClusterKey&) = default;
};

struct Cluster {
    std::string category;
    std::size_t local_index = 0;
    FeatureVector centroid;
    std::vector<SketchId> member_ids;

    ClusterKey key() const { return {category, local_index}; }
    std::size_t member_count() const { return member_ids.size(); }

    friend bool operator==(const Cluster&, const Cluster&) = default;
};

struct ClusterModel {
    EmbedderFingerprint fingerprint;
    std::vector<std::string> categories;
    std::vector<Cluster> clusters;  // all categories, flattened
    std::map<std::string, std::size_t> per_category_k;

    const Cluster* find(const ClusterKey& key) const;

    friend bool operator==(const ClusterModel&, const ClusterModel&) = default;
};

/// Throws ValidationError naming the first violated invariant: at least two
/// categories, unique labels, every cluster in a declared category with a
/// unique (category, local index) and local indices 0..k-1, at least one
/// member, finite centroids of the fingerprint's dimension.
void validate_model(const ClusterModel& model);

}  // namespace sketchshift
