#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "veil/bogus.hpp"
#include "veil/edb.hpp"
#include "veil/sse.hpp"

namespace veil::client {

struct ServerUnreachable : std::runtime_error {
    explicit ServerUnreachable(const std::string& what) : std::runtime_error(what) {}
};

/// Transport-agnostic view of the untrusted server, implemented in-process
/// over the store or over the HTTP wire.
class ServerApi {
public:
    struct SearchReply {
        std::vector<std::pair<Block32, Payload>> results;  // raw (u, v) pairs, walk order
        std::vector<DocId> ids;                            // server-recovered ids
    };
    struct FetchDeleteReply {
        std::vector<DocId> ids;
        uint64_t deleted = 0;
    };

    virtual ~ServerApi() = default;
    virtual uint64_t insert_batch(std::span<const sse::EncryptedEntry> entries) = 0;
    virtual SearchReply search(const sse::SearchToken& token) = 0;
    virtual FetchDeleteReply fetch_delete(const sse::SearchToken& token) = 0;
    virtual edb::Stats stats() = 0;
};

class LocalServer : public ServerApi {
public:
    explicit LocalServer(edb::Server& server) : server_(server) {}
    uint64_t insert_batch(std::span<const sse::EncryptedEntry> entries) override;
    SearchReply search(const sse::SearchToken& token) override;
    FetchDeleteReply fetch_delete(const sse::SearchToken& token) override;
    edb::Stats stats() override;

private:
    edb::Server& server_;
};

/// Ids the application has deleted. They disappear from client results
/// immediately and are physically purged at the next re-encryption.
class DeletionList {
public:
    void insert(const DocId& id);
    bool contains(const DocId& id) const;
    std::vector<DocId> snapshot() const;
    size_t size() const;

private:
    mutable std::mutex mu_;
    std::set<DocId> ids_;
};

using StateProvider = std::function<std::optional<sse::KeywordEncState>(const std::string&)>;
using CacheProvider = std::function<std::vector<DocId>(const std::string&)>;

/// Query client: combines the padding service's local cache with the server
/// result set, filters bogus ids and applies the deletion list. A keyword
/// without a published state is answered from the local cache only.
class QueryClient {
public:
    QueryClient(const sse::MasterKeys& mk, const bogus::BogusKey& bogus_key,
                StateProvider states, CacheProvider cache, ServerApi& server,
                std::shared_ptr<DeletionList> deleted);

    /// Sorted, de-duplicated real ids for the keyword.
    std::vector<DocId> search_keyword(const std::string& keyword);

    void delete_document(const DocId& id);
    const DeletionList& deletion_list() const { return *deleted_; }

private:
    sse::MasterKeys mk_;
    bogus::BogusKey bogus_key_;
    StateProvider states_;
    CacheProvider cache_;
    ServerApi& server_;
    std::shared_ptr<DeletionList> deleted_;
};

}  // namespace veil::client
