#include "sketchshift/model.hpp"

#include <cmath>
#include <set>

#include "sketchshift/error.hpp"

namespace sketchshift {

const Cluster* ClusterModel::find(const ClusterKey& key) const {
    for (const auto& c : clusters)
        if (c.local_index == key.local_index && c.category == key.category) return &c;
    return nullptr;
}

void validate_model(const ClusterModel& model) {
    if (model.fingerprint.dim == 0) throw ValidationError("model dim must be positive");
    if (model.categories.size() < 2) throw ValidationError("model needs at least two categories");
    std::set<std::string> labels(model.categories.begin(), model.categories.end());
    if (labels.size() != model.categories.size()) throw ValidationError("duplicate category label");
    if (model.per_category_k.size() != labels.size()) throw ValidationError("per-category k table mismatch");

    std::set<ClusterKey> keys;
    std::map<std::string, std::size_t> counts;
    for (const auto& c : model.clusters) {
        if (!labels.contains(c.category)) throw ValidationError("cluster in undeclared category " + c.category);
        if (!keys.insert(c.key()).second)
            throw ValidationError("duplicate cluster " + c.category + "/" + std::to_string(c.local_index));
        if (c.member_ids.empty()) throw ValidationError("cluster without members");
        if (c.centroid.size() != model.fingerprint.dim) throw ValidationError("centroid dimension mismatch");
        for (double v : c.centroid)
            if (!std::isfinite(v)) throw ValidationError("non-finite centroid value");
        ++counts[c.category];
    }
    for (const auto& label : model.categories) {
        const auto it = model.per_category_k.find(label);
        if (it == model.per_category_k.end() || it->second == 0 || counts[label] != it->second)
            throw ValidationError("category " + label + " cluster count differs from its k");
        for (std::size_t i = 0; i < it->second; ++i)
            if (!keys.contains(ClusterKey{label, i}))
                throw ValidationError("category " + label + " is missing local index " + std::to_string(i));
    }
}

}  // namespace sketchshift
