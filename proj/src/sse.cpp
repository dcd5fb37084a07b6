#include "veil/sse.hpp"

#include <cstring>
#include <limits>

#include "veil/crypto.hpp"

namespace veil::sse {

namespace {

constexpr uint8_t kDomainK1 = 0x01;
constexpr uint8_t kDomainK2 = 0x02;

Block16 derive_key(uint8_t domain, const Block32& seed) {
    std::array<uint8_t, 33> buf;
    buf[0] = domain;
    std::memcpy(buf.data() + 1, seed.data(), 32);
    Block32 d = crypto::sha256(buf);
    Block16 out;
    std::memcpy(out.data(), d.data(), 16);
    return out;
}

Block16 keyword_block(std::string_view w) {
    Block32 d = crypto::sha256(
        std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(w.data()), w.size()));
    Block16 out;
    std::memcpy(out.data(), d.data(), 16);
    return out;
}

// Label for index i under the batch state: H1(F(st, i) || k_w).
Block32 entry_label(const crypto::BlockCipher& st_cipher, uint64_t i, const Block16& k_w) {
    Block16 t = st_cipher.encrypt(counter_block(i));
    return crypto::sha256_concat(t, k_w);
}

// Payload mask for index i: H2(F(st, i) || k_id), truncated to payload width.
Payload entry_mask(const crypto::BlockCipher& st_cipher, uint64_t i, const Block16& k_id) {
    Block16 t = st_cipher.encrypt(counter_block(i));
    Block32 d = crypto::sha256_concat(t, k_id);
    Payload out;
    std::memcpy(out.data(), d.data(), kPayloadSize);
    return out;
}

}  // namespace

MasterKeys gen_master_keys(const Block32& seed) {
    return MasterKeys{derive_key(kDomainK1, seed), derive_key(kDomainK2, seed)};
}

std::pair<Block16, Block16> derive_keyword_keys(const MasterKeys& mk, std::string_view w) {
    if (w.empty()) throw std::invalid_argument("empty keyword");
    Block16 wb = keyword_block(w);
    return {crypto::prf_block(mk.k1, wb), crypto::prf_block(mk.k2, wb)};
}

Block16 advance_state(const Block16& st_prev, const Block16& k_e) {
    return crypto::prf_block(k_e, st_prev);
}

Block16 invert_state(const Block16& k_e, const Block16& st) {
    return crypto::prp_inverse(k_e, st);
}

BatchResult encrypt_batch(const Block16& k_w, const Block16& k_id, const KeywordEncState& prev,
                          std::span<const DocId> ids, const Block16& k_e) {
    if (ids.empty()) throw std::invalid_argument("empty batch");
    if (ids.size() >= std::numeric_limits<uint32_t>::max())
        throw std::overflow_error("batch counter overflow");

    BatchResult out;
    out.next.st = advance_state(prev.st, k_e);
    out.next.c = static_cast<uint32_t>(ids.size());
    out.entries.reserve(ids.size() + 1);

    crypto::BlockCipher st_cipher(out.next.st);
    for (size_t i = 0; i < ids.size(); ++i) {
        EncryptedEntry e;
        e.u = entry_label(st_cipher, i, k_w);
        e.v = entry_mask(st_cipher, i, k_id);
        for (size_t k = 0; k < 16; ++k) e.v[k] ^= ids[i][k];  // trailing 4 bytes stay as pad
        out.entries.push_back(e);
    }

    // Chain head at index c: payload carries (k_e || prev.c) so the walk can
    // recover the previous state and keep going backwards.
    EncryptedEntry head;
    head.u = entry_label(st_cipher, out.next.c, k_w);
    head.v = entry_mask(st_cipher, out.next.c, k_id);
    for (size_t k = 0; k < 16; ++k) head.v[k] ^= k_e[k];
    uint8_t cbuf[4];
    put_be32(cbuf, prev.c);
    for (size_t k = 0; k < 4; ++k) head.v[16 + k] ^= cbuf[k];
    out.entries.push_back(head);
    return out;
}

std::optional<SearchToken> make_search_token(const MasterKeys& mk, std::string_view w,
                                             const std::optional<KeywordEncState>& published) {
    if (!published) return std::nullopt;  // caller searches its local cache only
    auto [k_w, k_id] = derive_keyword_keys(mk, w);
    return SearchToken{k_w, k_id, published->st, published->c};
}

std::vector<WalkEntry> search_walk(const SearchToken& token, const Lookup& lookup) {
    std::vector<WalkEntry> out;
    Block16 st_i = token.st;
    uint32_t c_i = token.c;
    while (c_i != 0) {
        crypto::BlockCipher st_cipher(st_i);
        for (uint32_t j = 0; j < c_i; ++j) {
            Block32 u = entry_label(st_cipher, j, token.k_w);
            auto v = lookup(u);
            if (!v) throw IntegrityError("missing label " + to_hex(u), u);
            if (v->size() != kPayloadSize)
                throw IntegrityError("malformed payload for label " + to_hex(u), u);
            WalkEntry e;
            e.u = u;
            std::memcpy(e.v.data(), v->data(), kPayloadSize);
            Payload plain = e.v;
            xor_into(plain, entry_mask(st_cipher, j, token.k_id));
            std::memcpy(e.id.data(), plain.data(), 16);
            out.push_back(e);
        }
        Block32 u_head = entry_label(st_cipher, c_i, token.k_w);
        auto v_head = lookup(u_head);
        if (!v_head) throw IntegrityError("missing head label " + to_hex(u_head), u_head);
        if (v_head->size() != kPayloadSize)
            throw IntegrityError("malformed head payload for label " + to_hex(u_head), u_head);
        Payload plain;
        std::memcpy(plain.data(), v_head->data(), kPayloadSize);
        xor_into(plain, entry_mask(st_cipher, c_i, token.k_id));
        Block16 k_e;
        std::memcpy(k_e.data(), plain.data(), 16);
        uint32_t c_prev = get_be32(plain.data() + 16);
        st_i = invert_state(k_e, st_i);
        c_i = c_prev;
    }
    return out;
}

}  // namespace veil::sse
