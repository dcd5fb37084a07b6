#pragma once

#include <memory>
#include <span>

#include "veil/bytes.hpp"

typedef struct evp_cipher_ctx_st EVP_CIPHER_CTX;

namespace veil::crypto {

/// AES-128 in raw single-block mode. Used both as the PRF for key and mask
/// derivation and as the invertible permutation for the state chain.
class BlockCipher {
public:
    explicit BlockCipher(const Block16& key);
    ~BlockCipher();
    BlockCipher(BlockCipher&&) noexcept;
    BlockCipher& operator=(BlockCipher&&) noexcept;
    BlockCipher(const BlockCipher&) = delete;
    BlockCipher& operator=(const BlockCipher&) = delete;

    Block16 encrypt(const Block16& in) const;
    Block16 decrypt(const Block16& in) const;

private:
    mutable EVP_CIPHER_CTX* enc_;
    mutable EVP_CIPHER_CTX* dec_;
};

Block16 prf_block(const Block16& key, const Block16& in);
Block16 prp_inverse(const Block16& key, const Block16& in);

Block32 sha256(std::span<const uint8_t> data);
Block32 sha256_concat(std::span<const uint8_t> a, std::span<const uint8_t> b);

/// OS entropy (for production key generation).
void secure_random(std::span<uint8_t> out);

/// Deterministic AES-CTR generator for seeded, reproducible runs. Satisfies
/// UniformRandomBitGenerator.
class DeterministicRng {
public:
    explicit DeterministicRng(const Block16& seed_key, uint64_t stream = 0);
    /// Derives the seed key from an arbitrary label (seed value + purpose tag).
    static DeterministicRng from_seed(uint64_t seed, std::string_view purpose);

    using result_type = uint64_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }
    result_type operator()();

    Block16 block();
    void fill(std::span<uint8_t> out);
    uint64_t uniform(uint64_t bound);  // [0, bound)
    double uniform01();

    uint64_t counter() const { return counter_; }
    void set_counter(uint64_t c) { counter_ = c; }

private:
    BlockCipher cipher_;
    uint64_t stream_;
    uint64_t counter_ = 0;
};

}  // namespace veil::crypto
