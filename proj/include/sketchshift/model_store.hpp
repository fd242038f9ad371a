#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sketchshift/model.hpp"
#include "sketchshift/sketch.hpp"

namespace sketchshift {

/// In-memory index over dataset sketches. Category lists keep insertion
/// order.
class SketchStore {
public:
    /// Throws DuplicateId, or ValidationError for an unlabeled sketch.
    void add(Sketch sketch);

    const Sketch* find(SketchId id) const;
    const Sketch& at(SketchId id) const;  // throws MissingSketch

    std::size_t size() const { return by_id_.size(); }
    bool empty() const { return by_id_.empty(); }
    const std::map<std::string, std::vector<SketchId>>& by_category() const { return by_category_; }
    const std::vector<SketchId>& ids_in(const std::string& category) const;

private:
    std::unordered_map<SketchId, Sketch> by_id_;
    std::map<std::string, std::vector<SketchId>> by_category_;
};

using SketchSource = std::function<void(const std::function<void(Sketch&&)>&)>;

SketchStore build_store(const SketchSource& source);
SketchStore build_store(std::vector<Sketch> sketches);
SketchStore build_store_from_files(std::span<const std::filesystem::path> files);

/// SKCM v1 layout, little-endian: "SKCM", u32 version; fingerprint (u32-length
/// name, u32 version, u32 dim, u64 digest); u32 category count, then per
/// category a u32-length label and u32 k; u32 cluster count, then per cluster
/// u32 category index, u32 local index, u64 member count, u64 ids, f32
/// centroid[dim].
std::vector<std::uint8_t> encode_model(const ClusterModel& model);

/// Strict decoder; FormatError carries the offset of the first violation.
ClusterModel decode_model(std::span<const std::uint8_t> bytes);

std::size_t save_model(const ClusterModel& model, const std::filesystem::path& destination);
ClusterModel load_model(const std::filesystem::path& source);

}  // namespace sketchshift
