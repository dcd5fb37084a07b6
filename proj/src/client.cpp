#include "veil/client.hpp"

#include <algorithm>

namespace veil::client {

uint64_t LocalServer::insert_batch(std::span<const sse::EncryptedEntry> entries) {
    return server_.store().insert_batch(entries);
}

ServerApi::SearchReply LocalServer::search(const sse::SearchToken& token) {
    SearchReply reply;
    for (const auto& e : server_.search(token)) {
        reply.results.emplace_back(e.u, e.v);
        reply.ids.push_back(e.id);
    }
    return reply;
}

ServerApi::FetchDeleteReply LocalServer::fetch_delete(const sse::SearchToken& token) {
    auto r = server_.fetch_and_delete(token);
    return FetchDeleteReply{std::move(r.ids), r.deleted};
}

edb::Stats LocalServer::stats() {
    return server_.stats();
}

void DeletionList::insert(const DocId& id) {
    std::lock_guard lk(mu_);
    ids_.insert(id);
}

bool DeletionList::contains(const DocId& id) const {
    std::lock_guard lk(mu_);
    return ids_.count(id) > 0;
}

std::vector<DocId> DeletionList::snapshot() const {
    std::lock_guard lk(mu_);
    return std::vector<DocId>(ids_.begin(), ids_.end());
}

size_t DeletionList::size() const {
    std::lock_guard lk(mu_);
    return ids_.size();
}

QueryClient::QueryClient(const sse::MasterKeys& mk, const bogus::BogusKey& bogus_key,
                         StateProvider states, CacheProvider cache, ServerApi& server,
                         std::shared_ptr<DeletionList> deleted)
    : mk_(mk),
      bogus_key_(bogus_key),
      states_(std::move(states)),
      cache_(std::move(cache)),
      server_(server),
      deleted_(std::move(deleted)) {
    if (!deleted_) deleted_ = std::make_shared<DeletionList>();
}

std::vector<DocId> QueryClient::search_keyword(const std::string& keyword) {
    std::vector<DocId> out;
    for (const auto& id : cache_(keyword))
        if (!deleted_->contains(id)) out.push_back(id);

    auto token = sse::make_search_token(mk_, keyword, states_(keyword));
    if (token) {
        auto reply = server_.search(*token);
        for (const auto& id : reply.ids)
            if (!bogus::is_bogus(id, bogus_key_) && !deleted_->contains(id)) out.push_back(id);
    }

    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void QueryClient::delete_document(const DocId& id) {
    deleted_->insert(id);
}

}  // namespace veil::client
