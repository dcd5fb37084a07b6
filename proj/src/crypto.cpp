#include "veil/crypto.hpp"

#include <openssl/evp.h>
#include <openssl/rand.h>

#include <stdexcept>

namespace veil::crypto {

namespace {

EVP_CIPHER_CTX* make_ctx(const Block16& key, bool encrypt) {
    EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
    if (!ctx) throw std::runtime_error("EVP_CIPHER_CTX_new failed");
    int ok = encrypt ? EVP_EncryptInit_ex(ctx, EVP_aes_128_ecb(), nullptr, key.data(), nullptr)
                     : EVP_DecryptInit_ex(ctx, EVP_aes_128_ecb(), nullptr, key.data(), nullptr);
    if (ok != 1) {
        EVP_CIPHER_CTX_free(ctx);
        throw std::runtime_error("AES init failed");
    }
    EVP_CIPHER_CTX_set_padding(ctx, 0);
    return ctx;
}

}  // namespace

BlockCipher::BlockCipher(const Block16& key)
    : enc_(make_ctx(key, true)), dec_(make_ctx(key, false)) {}

BlockCipher::~BlockCipher() {
    if (enc_) EVP_CIPHER_CTX_free(enc_);
    if (dec_) EVP_CIPHER_CTX_free(dec_);
}

BlockCipher::BlockCipher(BlockCipher&& other) noexcept : enc_(other.enc_), dec_(other.dec_) {
    other.enc_ = nullptr;
    other.dec_ = nullptr;
}

BlockCipher& BlockCipher::operator=(BlockCipher&& other) noexcept {
    if (this != &other) {
        if (enc_) EVP_CIPHER_CTX_free(enc_);
        if (dec_) EVP_CIPHER_CTX_free(dec_);
        enc_ = other.enc_;
        dec_ = other.dec_;
        other.enc_ = nullptr;
        other.dec_ = nullptr;
    }
    return *this;
}

Block16 BlockCipher::encrypt(const Block16& in) const {
    Block16 out;
    int len = 0;
    if (EVP_EncryptUpdate(enc_, out.data(), &len, in.data(), 16) != 1 || len != 16)
        throw std::runtime_error("AES encrypt failed");
    return out;
}

Block16 BlockCipher::decrypt(const Block16& in) const {
    Block16 out;
    int len = 0;
    if (EVP_DecryptUpdate(dec_, out.data(), &len, in.data(), 16) != 1 || len != 16)
        throw std::runtime_error("AES decrypt failed");
    return out;
}

Block16 prf_block(const Block16& key, const Block16& in) {
    return BlockCipher(key).encrypt(in);
}

Block16 prp_inverse(const Block16& key, const Block16& in) {
    return BlockCipher(key).decrypt(in);
}

Block32 sha256(std::span<const uint8_t> data) {
    Block32 out;
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
        len != 32)
        throw std::runtime_error("SHA-256 failed");
    return out;
}

Block32 sha256_concat(std::span<const uint8_t> a, std::span<const uint8_t> b) {
    std::array<uint8_t, 64> buf;  // callers pass block-sized parts
    if (a.size() + b.size() > buf.size()) throw std::invalid_argument("concat too long");
    std::memcpy(buf.data(), a.data(), a.size());
    std::memcpy(buf.data() + a.size(), b.data(), b.size());
    return sha256(std::span<const uint8_t>(buf.data(), a.size() + b.size()));
}

void secure_random(std::span<uint8_t> out) {
    if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1)
        throw std::runtime_error("RAND_bytes failed");
}

DeterministicRng::DeterministicRng(const Block16& seed_key, uint64_t stream)
    : cipher_(seed_key), stream_(stream) {}

DeterministicRng DeterministicRng::from_seed(uint64_t seed, std::string_view purpose) {
    std::vector<uint8_t> label(purpose.begin(), purpose.end());
    label.resize(label.size() + 8);
    for (int k = 0; k < 8; ++k)
        label[label.size() - 8 + k] = static_cast<uint8_t>(seed >> (8 * (7 - k)));
    Block32 digest = sha256(label);
    Block16 key;
    std::memcpy(key.data(), digest.data(), 16);
    return DeterministicRng(key);
}

Block16 DeterministicRng::block() {
    Block16 in{};
    for (int k = 0; k < 8; ++k) in[7 - k] = static_cast<uint8_t>(stream_ >> (8 * k));
    for (int k = 0; k < 8; ++k) in[15 - k] = static_cast<uint8_t>(counter_ >> (8 * k));
    ++counter_;
    return cipher_.encrypt(in);
}

void DeterministicRng::fill(std::span<uint8_t> out) {
    size_t off = 0;
    while (off < out.size()) {
        Block16 b = block();
        size_t n = std::min<size_t>(16, out.size() - off);
        std::memcpy(out.data() + off, b.data(), n);
        off += n;
    }
}

DeterministicRng::result_type DeterministicRng::operator()() {
    Block16 b = block();
    uint64_t v;
    std::memcpy(&v, b.data(), 8);
    return v;
}

uint64_t DeterministicRng::uniform(uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("uniform bound 0");
    // rejection sampling to avoid modulo bias
    uint64_t limit = max() - max() % bound;
    uint64_t v;
    do {
        v = (*this)();
    } while (v >= limit);
    return v % bound;
}

double DeterministicRng::uniform01() {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

}  // namespace veil::crypto
