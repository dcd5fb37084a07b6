#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace veil {

using Block16 = std::array<uint8_t, 16>;
using Block32 = std::array<uint8_t, 32>;

// Document identifiers are opaque 16-byte strings.
using DocId = Block16;

// Every stored entry payload is padded to a common width so that data
// entries and chain-head entries cannot be told apart by length.
inline constexpr size_t kPayloadSize = 20;
using Payload = std::array<uint8_t, kPayloadSize>;

inline constexpr size_t kLabelSize = 32;

inline std::string to_hex(std::span<const uint8_t> data) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (uint8_t b : data) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0f]);
    }
    return out;
}

inline int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

inline std::vector<uint8_t> from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) throw std::invalid_argument("odd hex length");
    std::vector<uint8_t> out(hex.size() / 2);
    for (size_t i = 0; i < out.size(); ++i) {
        int hi = hex_nibble(hex[2 * i]);
        int lo = hex_nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw std::invalid_argument("bad hex digit");
        out[i] = static_cast<uint8_t>((hi << 4) | lo);
    }
    return out;
}

template <size_t N>
std::array<uint8_t, N> array_from_hex(std::string_view hex) {
    if (hex.size() != 2 * N) throw std::invalid_argument("bad hex length");
    std::array<uint8_t, N> out{};
    auto bytes = from_hex(hex);
    std::memcpy(out.data(), bytes.data(), N);
    return out;
}

// 16-byte big-endian encoding of an integer counter.
inline Block16 counter_block(uint64_t i) {
    Block16 b{};
    for (int k = 0; k < 8; ++k) b[15 - k] = static_cast<uint8_t>(i >> (8 * k));
    return b;
}

inline void put_be32(uint8_t* p, uint32_t v) {
    p[0] = static_cast<uint8_t>(v >> 24);
    p[1] = static_cast<uint8_t>(v >> 16);
    p[2] = static_cast<uint8_t>(v >> 8);
    p[3] = static_cast<uint8_t>(v);
}

inline uint32_t get_be32(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

template <size_t N>
void xor_into(std::array<uint8_t, N>& out, const std::array<uint8_t, N>& mask) {
    for (size_t i = 0; i < N; ++i) out[i] ^= mask[i];
}

// Hash functor for std::array keys; labels and ids are pseudorandom, so the
// leading bytes are already well mixed.
struct ArrayHash {
    template <size_t N>
    size_t operator()(const std::array<uint8_t, N>& a) const {
        static_assert(N >= sizeof(size_t));
        size_t h;
        std::memcpy(&h, a.data(), sizeof(h));
        return h;
    }
};

}  // namespace veil
