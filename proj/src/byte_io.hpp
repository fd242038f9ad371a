#pragma once

// Little-endian byte buffer helpers shared by the binary codecs.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sketchshift/error.hpp"

namespace sketchshift::detail {

class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { put_le(v, 2); }
    void u32(std::uint32_t v) { put_le(v, 4); }
    void u64(std::uint64_t v) { put_le(v, 8); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void raw(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s);
    }

    std::size_t size() const { return buf_.size(); }
    std::vector<std::uint8_t>& bytes() { return buf_; }

private:
    void put_le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    std::vector<std::uint8_t> buf_;
};

/// Bounds-checked reader; every failure is a FormatError carrying the offset.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }

    void require(std::size_t n, const char* what) const {
        if (remaining() < n) throw FormatError(std::string("truncated ") + what, pos_);
    }

    std::uint8_t u8(const char* what) { return static_cast<std::uint8_t>(get_le(1, what)); }
    std::uint16_t u16(const char* what) { return static_cast<std::uint16_t>(get_le(2, what)); }
    std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(get_le(4, what)); }
    std::uint64_t u64(const char* what) { return get_le(8, what); }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

    std::span<const std::uint8_t> take(std::size_t n, const char* what) {
        require(n, what);
        auto out = data_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

    std::string str(const char* what, std::uint32_t max_len = 1u << 20) {
        const std::size_t start = pos_;
        const std::uint32_t len = u32(what);
        if (len > max_len) throw FormatError(std::string(what) + " length too large", start);
        auto bytes = take(len, what);
        return std::string(bytes.begin(), bytes.end());
    }

private:
    std::uint64_t get_le(int n, const char* what) {
        require(static_cast<std::size_t>(n), what);
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= std::uint64_t{data_[pos_ + i]} << (8 * i);
        pos_ += n;
        return v;
    }

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);

/// FNV-1a, 64-bit.
inline std::uint64_t fnv1a(std::span<const std::uint8_t> bytes,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
    for (auto b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()), h);
}

}  // namespace sketchshift::detail
