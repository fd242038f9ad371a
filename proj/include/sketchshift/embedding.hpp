#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sketchshift/sketch.hpp"

namespace sketchshift {

using FeatureVector = std::vector<double>;

struct EmbedderFingerprint {
    std::string name;
    std::uint32_t version = 0;
    std::uint32_t dim = 0;
    std::uint64_t params_digest = 0;

    friend bool operator==(const EmbedderFingerprint&, const EmbedderFingerprint&) = default;
};

/// Rows aligned with ids; all rows have length `dim`.
struct EmbeddingMatrix {
    std::uint32_t dim = 0;
    std::vector<SketchId> ids;
    std::vector<FeatureVector> rows;

    friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;
};

/// Raster -> fixed-length feature vector.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual EmbedderFingerprint fingerprint() const = 0;
    virtual FeatureVector embed(const RasterImage& raster) const = 0;
};

/// Gradient-orientation histogram: 8x8 spatial cells times 8 unsigned
/// orientation bins over a 64x64 raster, hard binning, whole-vector L2
/// normalization.
class ReferenceEmbedder final : public Embedder {
public:
    static constexpr int kSide = 64;
    static constexpr int kCells = 8;
    static constexpr int kBins = 8;
    static constexpr std::uint32_t kDim = kCells * kCells * kBins;
    static constexpr std::uint32_t kVersion = 1;

    EmbedderFingerprint fingerprint() const override;
    FeatureVector embed(const RasterImage& raster) const override;
};

FeatureVector embed_reference(const RasterImage& raster);

/// Throws ValidationError unless the matrix invariants hold (and every
/// value survives narrowing to float32).
void validate_matrix(const EmbeddingMatrix& matrix);

/// SKEM v1: "SKEM", u32 version, u32 dim, u64 count, u64 ids[count],
/// f32 rows[count*dim]; little-endian.
std::vector<std::uint8_t> encode_embeddings(const EmbeddingMatrix& matrix);
EmbeddingMatrix decode_embeddings(std::span<const std::uint8_t> bytes);

std::size_t write_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& destination);
EmbeddingMatrix load_embeddings(const std::filesystem::path& source);

inline constexpr std::size_t kSkemHeaderSize = 20;

/// Fingerprint of an externally computed matrix: name "external", version 1,
/// digest over the file header. `l2_normalized` marks matrices whose rows
/// were normalized on load, which changes the embedding space.
EmbedderFingerprint fingerprint_external(std::span<const std::uint8_t> skem_bytes, bool l2_normalized = false);
EmbedderFingerprint fingerprint_external_file(const std::filesystem::path& source, bool l2_normalized = false);

/// In-place L2 normalization; zero vectors are left untouched.
void l2_normalize(FeatureVector& v);

}  // namespace sketchshift
