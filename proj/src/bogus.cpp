#include "veil/bogus.hpp"

#include <cstring>

#include "veil/crypto.hpp"

namespace veil::bogus {

namespace {

Block16 tag_input(const uint8_t* r) {
    Block16 in{};
    std::memcpy(in.data(), r, 8);
    return in;
}

}  // namespace

bool is_bogus(const DocId& id, const BogusKey& k) {
    Block16 t = crypto::prf_block(k, tag_input(id.data()));
    return std::memcmp(id.data() + 8, t.data(), 8) == 0;
}

DocId make_bogus_id(const BogusKey& k, std::string_view keyword, uint64_t counter) {
    Block32 kw = crypto::sha256(
        std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(keyword.data()), keyword.size()));
    Block16 in{};
    std::memcpy(in.data(), kw.data(), 8);
    for (int i = 0; i < 8; ++i) in[15 - i] = static_cast<uint8_t>(counter >> (8 * i));
    Block16 r = crypto::prf_block(k, in);
    Block16 tag = crypto::prf_block(k, tag_input(r.data()));
    DocId id{};
    std::memcpy(id.data(), r.data(), 8);
    std::memcpy(id.data() + 8, tag.data(), 8);
    return id;
}

BogusPool::BogusPool(const BogusKey& key, const setup::BogusBudget& budget) : key_(key) {
    for (const auto& [kw, q] : budget.quota) state_[kw] = {q, q, 0, 1};
}

std::vector<DocId> BogusPool::draw(const std::string& keyword, uint64_t n) {
    std::vector<DocId> out;
    out.reserve(n);
    auto& s = state_[keyword];
    for (uint64_t i = 0; i < n; ++i) {
        if (s.remaining == 0) {
            s.remaining = std::max<uint64_t>(s.quota, n - i);  // fresh tranche
            ++s.tranches;
        }
        out.push_back(make_bogus_id(key_, keyword, s.counter++));
        --s.remaining;
    }
    total_drawn_ += n;
    return out;
}

uint64_t BogusPool::remaining(const std::string& keyword) const {
    auto it = state_.find(keyword);
    return it == state_.end() ? 0 : it->second.remaining;
}

uint64_t BogusPool::counter(const std::string& keyword) const {
    auto it = state_.find(keyword);
    return it == state_.end() ? 0 : it->second.counter;
}

uint64_t BogusPool::tranches(const std::string& keyword) const {
    auto it = state_.find(keyword);
    return it == state_.end() ? 0 : it->second.tranches;
}

}  // namespace veil::bogus
