#include "sketchshift/model_store.hpp"

#include <cmath>

#include "byte_io.hpp"
#include "sketchshift/error.hpp"
#include "sketchshift/ingest.hpp"

namespace sketchshift {

namespace {

constexpr char kMagic[4] = {'S', 'K', 'C', 'M'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void SketchStore::add(Sketch sketch) {
    if (!sketch.category) throw ValidationError("sketch " + std::to_string(sketch.id) + " has no category");
    const SketchId id = sketch.id;
    const std::string category = *sketch.category;
    if (!by_id_.try_emplace(id, std::move(sketch)).second)
        throw DuplicateId("duplicate sketch id " + std::to_string(id));
    by_category_[category].push_back(id);
}

const Sketch* SketchStore::find(SketchId id) const {
    const auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &it->second;
}

const Sketch& SketchStore::at(SketchId id) const {
    if (const auto* s = find(id)) return *s;
    throw MissingSketch("sketch " + std::to_string(id) + " is not in the store");
}

const std::vector<SketchId>& SketchStore::ids_in(const std::string& category) const {
    static const std::vector<SketchId> none;
    const auto it = by_category_.find(category);
    return it == by_category_.end() ? none : it->second;
}

SketchStore build_store(const SketchSource& source) {
    SketchStore store;
    source([&](Sketch&& s) { store.add(std::move(s)); });
    return store;
}

SketchStore build_store(std::vector<Sketch> sketches) {
    SketchStore store;
    for (auto& s : sketches) store.add(std::move(s));
    return store;
}

SketchStore build_store_from_files(std::span<const std::filesystem::path> files) {
    return build_store([&](const std::function<void(Sketch&&)>& sink) {
        for (const auto& f : files) for_each_sketch_in_file(f, sink);
    });
}

std::vector<std::uint8_t> encode_model(const ClusterModel& model) {
    validate_model(model);
    detail::ByteWriter w;
    w.raw(std::string_view(kMagic, 4));
    w.u32(kVersion);
    w.str(model.fingerprint.name);
    w.u32(model.fingerprint.version);
    w.u32(model.fingerprint.dim);
    w.u64(model.fingerprint.params_digest);

    std::map<std::string, std::uint32_t> index;
    w.u32(static_cast<std::uint32_t>(model.categories.size()));
    for (const auto& label : model.categories) {
        index[label] = static_cast<std::uint32_t>(index.size());
        w.str(label);
        w.u32(static_cast<std::uint32_t>(model.per_category_k.at(label)));
    }
    w.u32(static_cast<std::uint32_t>(model.clusters.size()));
    for (const auto& c : model.clusters) {
        w.u32(index.at(c.category));
        w.u32(static_cast<std::uint32_t>(c.local_index));
        w.u64(c.member_ids.size());
        for (auto id : c.member_ids) w.u64(id);
        for (double v : c.centroid) {
            const float f = static_cast<float>(v);
            if (!std::isfinite(f)) throw ValidationError("centroid value overflows float32");
            w.f32(f);
        }
    }
    return std::move(w.bytes());
}

ClusterModel decode_model(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes);
    auto magic = r.take(4, "magic");
    if (!std::equal(magic.begin(), magic.end(), kMagic)) throw FormatError("bad magic", 0);
    if (r.u32("version") != kVersion) throw FormatError("unsupported version", 4);

    ClusterModel m;
    m.fingerprint.name = r.str("fingerprint name", 4096);
    m.fingerprint.version = r.u32("fingerprint version");
    const auto dim_at = r.offset();
    m.fingerprint.dim = r.u32("fingerprint dim");
    if (m.fingerprint.dim == 0) throw FormatError("dim must be positive", dim_at);
    m.fingerprint.params_digest = r.u64("fingerprint digest");

    const auto n_categories = r.u32("category count");
    if (n_categories < 2) throw FormatError("model needs at least two categories", r.offset() - 4);
    // Each category entry takes at least 8 bytes.
    if (n_categories > r.remaining() / 8) throw FormatError("truncated category table", bytes.size());
    for (std::uint32_t i = 0; i < n_categories; ++i) {
        const auto at = r.offset();
        auto label = r.str("category label", 1u << 16);
        const auto k = r.u32("category k");
        if (k == 0) throw FormatError("category k must be positive", r.offset() - 4);
        if (!m.per_category_k.emplace(label, k).second) throw FormatError("duplicate category " + label, at);
        m.categories.push_back(std::move(label));
    }

    const auto n_clusters = r.u32("cluster count");
    const std::uint64_t min_cluster_bytes = 16 + 8 + 4ull * m.fingerprint.dim;
    if (n_clusters > r.remaining() / min_cluster_bytes) throw FormatError("truncated cluster table", bytes.size());
    std::map<std::string, std::size_t> seen_per_category;
    for (std::uint32_t i = 0; i < n_clusters; ++i) {
        const auto at = r.offset();
        const auto category = r.u32("cluster category");
        if (category >= n_categories) throw FormatError("cluster category index out of range", at);
        Cluster c;
        c.category = m.categories[category];
        c.local_index = r.u32("cluster local index");
        const auto members_at = r.offset();
        const auto members = r.u64("member count");
        if (members == 0) throw FormatError("cluster without members", members_at);
        if (members > r.remaining() / 8) throw FormatError("truncated member ids", bytes.size());
        c.member_ids.resize(members);
        for (auto& id : c.member_ids) id = r.u64("member ids");
        c.centroid.resize(m.fingerprint.dim);
        for (auto& v : c.centroid) {
            const auto v_at = r.offset();
            const float f = r.f32("centroid");
            if (!std::isfinite(f)) throw FormatError("non-finite centroid value", v_at);
            v = f;
        }
        if (c.local_index >= m.per_category_k[c.category])
            throw FormatError("cluster local index exceeds its category's k", at + 4);
        if (m.find(c.key())) throw FormatError("duplicate (category, local index)", at);
        ++seen_per_category[c.category];
        m.clusters.push_back(std::move(c));
    }
    if (r.remaining() != 0) throw FormatError("trailing bytes after cluster table", r.offset());
    for (const auto& label : m.categories)
        if (seen_per_category[label] != m.per_category_k[label])
            throw FormatError("category " + label + " cluster count differs from its k", r.offset());
    try {
        validate_model(m);
    } catch (const ValidationError& e) {
        throw FormatError(e.what(), r.offset());
    }
    return m;
}

std::size_t save_model(const ClusterModel& model, const std::filesystem::path& destination) {
    const auto bytes = encode_model(model);
    detail::write_file_bytes(destination.string(), bytes);
    return bytes.size();
}

ClusterModel load_model(const std::filesystem::path& source) {
    return decode_model(detail::read_file_bytes(source.string()));
}

}  // namespace sketchshift
