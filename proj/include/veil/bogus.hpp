#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "veil/bytes.hpp"
#include "veil/clustering.hpp"

namespace veil::bogus {

/// Shared secret of the padding service and the query client; never sent to
/// the server. Bogus ids carry a tag under this key so the client can filter
/// them while the server cannot tell them from real ids.
using BogusKey = Block16;

/// id = r || PRF_8(k, r) with r the first 8 bytes. A uniformly random or
/// hash-derived real id passes only with probability 2^-64.
bool is_bogus(const DocId& id, const BogusKey& k);

/// Deterministic generator: the counter keeps ids fresh across tranches.
DocId make_bogus_id(const BogusKey& k, std::string_view keyword, uint64_t counter);

/// Per-keyword reservoir of client-recognizable bogus ids. Quotas come from
/// setup; an exhausted keyword regenerates a fresh tranche and keeps going,
/// it never fails a draw.
class BogusPool {
public:
    BogusPool(const BogusKey& key, const setup::BogusBudget& budget);

    std::vector<DocId> draw(const std::string& keyword, uint64_t n);

    uint64_t total_drawn() const { return total_drawn_; }
    uint64_t remaining(const std::string& keyword) const;
    uint64_t counter(const std::string& keyword) const;
    uint64_t tranches(const std::string& keyword) const;
    const BogusKey& key() const { return key_; }

    // State persistence between CLI invocations.
    struct KeywordState {
        uint64_t quota = 0;
        uint64_t remaining = 0;
        uint64_t counter = 0;
        uint64_t tranches = 1;
    };
    const std::unordered_map<std::string, KeywordState>& state() const { return state_; }
    void restore(const std::string& keyword, const KeywordState& s) { state_[keyword] = s; }
    void set_total_drawn(uint64_t n) { total_drawn_ = n; }

private:
    BogusKey key_;
    std::unordered_map<std::string, KeywordState> state_;
    uint64_t total_drawn_ = 0;
};

}  // namespace veil::bogus
