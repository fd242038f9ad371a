#include "sketchshift/embedding.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <unordered_set>

#include "byte_io.hpp"
#include "sketchshift/error.hpp"

namespace sketchshift {

namespace {

constexpr char kSkemMagic[4] = {'S', 'K', 'E', 'M'};
constexpr std::uint32_t kSkemVersion = 1;

}  // namespace

EmbedderFingerprint ReferenceEmbedder::fingerprint() const {
    static const std::uint64_t digest =
        detail::fnv1a("refgrad;side=64;cells=8x8;bins=8;orientation=unsigned;binning=hard;norm=l2");
    return {"refgrad", kVersion, kDim, digest};
}

FeatureVector ReferenceEmbedder::embed(const RasterImage& raster) const { return embed_reference(raster); }

FeatureVector embed_reference(const RasterImage& raster) {
    using E = ReferenceEmbedder;
    if (raster.width != E::kSide || raster.height != E::kSide ||
        raster.pixels.size() != static_cast<std::size_t>(E::kSide) * E::kSide)
        throw DimensionError("reference embedder requires a 64x64 raster");

    constexpr int cell_side = E::kSide / E::kCells;
    constexpr double bin_width = std::numbers::pi / E::kBins;
    FeatureVector hist(E::kDim, 0.0);
    for (int y = 1; y < E::kSide - 1; ++y) {
        for (int x = 1; x < E::kSide - 1; ++x) {
            const double gx = static_cast<double>(raster.at(x + 1, y)) - raster.at(x - 1, y);
            const double gy = static_cast<double>(raster.at(x, y + 1)) - raster.at(x, y - 1);
            const double m = std::sqrt(gx * gx + gy * gy);
            if (m == 0.0) continue;
            double theta = std::atan2(gy, gx);
            if (theta < 0.0) theta += std::numbers::pi;
            if (theta >= std::numbers::pi) theta -= std::numbers::pi;
            const int bin = std::min(static_cast<int>(theta / bin_width), E::kBins - 1);
            const int cell = (y / cell_side) * E::kCells + (x / cell_side);
            hist[static_cast<std::size_t>(cell) * E::kBins + bin] += m;
        }
    }
    l2_normalize(hist);
    return hist;
}

void l2_normalize(FeatureVector& v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    if (sq == 0.0) return;
    const double norm = std::sqrt(sq);
    for (double& x : v) x /= norm;
}

void validate_matrix(const EmbeddingMatrix& m) {
    if (m.dim == 0) throw ValidationError("embedding dim must be positive");
    if (m.ids.size() != m.rows.size()) throw ValidationError("ids and rows differ in length");
    std::unordered_set<SketchId> seen;
    seen.reserve(m.ids.size());
    for (std::size_t i = 0; i < m.ids.size(); ++i) {
        if (!seen.insert(m.ids[i]).second)
            throw ValidationError("duplicate sketch id " + std::to_string(m.ids[i]));
        if (m.rows[i].size() != m.dim) throw ValidationError("row " + std::to_string(i) + " has wrong length");
        for (double v : m.rows[i])
            if (!std::isfinite(static_cast<float>(v)))
                throw ValidationError("row " + std::to_string(i) + " has a non-finite value");
    }
}

std::vector<std::uint8_t> encode_embeddings(const EmbeddingMatrix& m) {
    validate_matrix(m);
    detail::ByteWriter w;
    w.raw(std::string_view(kSkemMagic, 4));
    w.u32(kSkemVersion);
    w.u32(m.dim);
    w.u64(m.ids.size());
    for (auto id : m.ids) w.u64(id);
    for (const auto& row : m.rows)
        for (double v : row) w.f32(static_cast<float>(v));
    return std::move(w.bytes());
}

EmbeddingMatrix decode_embeddings(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes);
    auto magic = r.take(4, "magic");
    if (!std::equal(magic.begin(), magic.end(), kSkemMagic)) throw FormatError("bad magic", 0);
    if (r.u32("version") != kSkemVersion) throw FormatError("unsupported version", 4);
    EmbeddingMatrix m;
    m.dim = r.u32("dim");
    if (m.dim == 0) throw FormatError("dim must be positive", 8);
    const std::uint64_t count = r.u64("count");
    // Size check before allocating: 8 bytes per id plus 4 per value.
    const std::uint64_t per_row = 8 + 4 * std::uint64_t{m.dim};
    if (count > r.remaining() / per_row || count * per_row != r.remaining()) {
        if (count <= r.remaining() / per_row)
            throw FormatError("trailing bytes after embedding rows", r.offset() + count * per_row);
        throw FormatError("truncated: file shorter than declared row count", bytes.size());
    }
    m.ids.reserve(count);
    std::unordered_set<SketchId> seen;
    seen.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto at = r.offset();
        const auto id = r.u64("ids");
        if (!seen.insert(id).second) throw FormatError("duplicate sketch id " + std::to_string(id), at);
        m.ids.push_back(id);
    }
    m.rows.resize(count);
    for (auto& row : m.rows) {
        row.resize(m.dim);
        for (auto& v : row) {
            const auto at = r.offset();
            const float f = r.f32("rows");
            if (!std::isfinite(f)) throw FormatError("non-finite value", at);
            v = f;
        }
    }
    return m;
}

std::size_t write_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& destination) {
    const auto bytes = encode_embeddings(matrix);
    detail::write_file_bytes(destination.string(), bytes);
    return bytes.size();
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& source) {
    return decode_embeddings(detail::read_file_bytes(source.string()));
}

EmbedderFingerprint fingerprint_external(std::span<const std::uint8_t> skem_bytes, bool l2_normalized) {
    if (skem_bytes.size() < kSkemHeaderSize) throw FormatError("truncated header", skem_bytes.size());
    detail::ByteReader r(skem_bytes);
    r.take(8, "header");
    const auto dim = r.u32("dim");
    std::uint64_t digest = detail::fnv1a(skem_bytes.first(kSkemHeaderSize));
    if (l2_normalized) digest = detail::fnv1a(std::string_view("l2"), digest);
    return {"external", 1, dim, digest};
}

EmbedderFingerprint fingerprint_external_file(const std::filesystem::path& source, bool l2_normalized) {
    std::ifstream in(source, std::ios::binary);
    if (!in) throw IoError("cannot open " + source.string());
    std::uint8_t header[kSkemHeaderSize];
    in.read(reinterpret_cast<char*>(header), sizeof header);
    return fingerprint_external(std::span(header, static_cast<std::size_t>(in.gcount())), l2_normalized);
}

}  // namespace sketchshift
