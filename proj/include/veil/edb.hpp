#pragma once

#include <filesystem>
#include <optional>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "veil/bytes.hpp"
#include "veil/sse.hpp"

namespace veil::edb {

struct DuplicateLabel : std::runtime_error {
    explicit DuplicateLabel(const std::string& what) : std::runtime_error(what) {}
};

struct Stats {
    uint64_t size = 0;
    uint64_t inserted_total = 0;
    uint64_t deleted_total = 0;
};

/// Flat label -> payload map with an append-only log for durability.
/// Log record: 1-byte op tag (0x01 insert, 0x02 delete) || 32-byte label ||
/// 1-byte payload length || payload. A batch is staged, validated, written
/// and synced in one step, then applied; a rejected batch changes nothing.
class Store {
public:
    Store();                                          // memory only
    explicit Store(const std::filesystem::path& log); // replays, then appends
    ~Store();
    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;

    /// All-or-nothing batch insert; throws DuplicateLabel on any duplicate.
    uint64_t insert_batch(std::span<const sse::EncryptedEntry> entries);

    std::optional<Payload> get(const Block32& label) const;

    /// Removes the given labels and logs tombstones; missing labels throw.
    void erase_batch(std::span<const Block32> labels);

    Stats stats() const;

private:
    void replay(const std::filesystem::path& log);
    void append_synced(const std::vector<uint8_t>& records);

    std::unordered_map<Block32, Payload, ArrayHash> map_;
    mutable std::shared_mutex map_mu_;
    std::mutex write_mu_;  // serialises insert/erase batches
    int log_fd_ = -1;
    uint64_t inserted_total_ = 0;
    uint64_t deleted_total_ = 0;
};

/// The untrusted server's query surface: runs the backward chain walk over
/// the store and recovers ids in the clear, which is exactly the access
/// pattern the padding countermeasures are evaluated against.
class Server {
public:
    explicit Server(Store& store) : store_(store) {}

    std::vector<sse::WalkEntry> search(const sse::SearchToken& token) const;

    struct FetchDeleteResult {
        std::vector<DocId> ids;
        uint64_t deleted = 0;
    };
    /// Walks like search, then removes every touched label (data entries and
    /// chain heads). The walk completes before anything is deleted.
    FetchDeleteResult fetch_and_delete(const sse::SearchToken& token);

    Stats stats() const { return store_.stats(); }
    Store& store() { return store_; }

private:
    Store& store_;
};

}  // namespace veil::edb
