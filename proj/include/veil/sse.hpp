#pragma once

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

#include "veil/bytes.hpp"

namespace veil::sse {

/// Long-term PRF keys: k1 derives per-keyword label keys, k2 payload keys.
struct MasterKeys {
    Block16 k1{};
    Block16 k2{};
};

/// Per-keyword encryption state anchoring the latest batch: the state block
/// the batch's labels derive from, and the number of entries in that batch.
struct KeywordEncState {
    Block16 st{};
    uint32_t c = 0;
};

struct EncryptedEntry {
    Block32 u;   // label
    Payload v;   // masked payload (doc id, or ephemeral key + previous count)
};

struct SearchToken {
    Block16 k_w{};
    Block16 k_id{};
    Block16 st{};
    uint32_t c = 0;
};

struct IntegrityError : std::runtime_error {
    explicit IntegrityError(const std::string& what, Block32 label = {})
        : std::runtime_error(what), missing_label(label) {}
    Block32 missing_label{};
};

MasterKeys gen_master_keys(const Block32& seed);

/// (k_w, k_id) for a keyword; the keyword is hashed to one block before the PRF.
std::pair<Block16, Block16> derive_keyword_keys(const MasterKeys& mk, std::string_view w);

/// State chain step under an ephemeral key; invertible.
Block16 advance_state(const Block16& st_prev, const Block16& k_e);
Block16 invert_state(const Block16& k_e, const Block16& st);

struct BatchResult {
    std::vector<EncryptedEntry> entries;  // |ids| data entries + 1 chain head
    KeywordEncState next;
};

/// Encrypts one batch of ids for a keyword. Labels are derived from the
/// advanced state; the extra chain-head entry carries (k_e, prev.c) so a
/// later search can walk back to earlier batches.
BatchResult encrypt_batch(const Block16& k_w, const Block16& k_id, const KeywordEncState& prev,
                          std::span<const DocId> ids, const Block16& k_e);

/// Token for the published state, or nullopt when the keyword has no
/// published state yet (the caller must then search its local cache only).
std::optional<SearchToken> make_search_token(const MasterKeys& mk, std::string_view w,
                                             const std::optional<KeywordEncState>& published);

struct WalkEntry {
    Block32 u;
    Payload v;
    DocId id;
};

/// Label accessor; returns the raw stored payload, or nullopt when absent.
using Lookup = std::function<std::optional<std::vector<uint8_t>>(const Block32&)>;

/// Walks the batch chain from the token's state back to the first batch.
/// Returns data entries in walk order (latest batch first). Throws
/// IntegrityError on a missing label or a malformed payload.
std::vector<WalkEntry> search_walk(const SearchToken& token, const Lookup& lookup);

}  // namespace veil::sse
