#include "veil/reencrypt.hpp"

#include <algorithm>
#include <unordered_set>

namespace veil::reenc {

Report reencrypt_cluster(padding::PaddingEngine& engine, pipeline::StateRegistry& states,
                         client::ServerApi& server, const sse::MasterKeys& mk,
                         const client::DeletionList& deleted, crypto::DeterministicRng& rng,
                         size_t cluster_id) {
    auto guard = engine.lock_cluster(cluster_id);
    Report report;

    const auto& members = guard.members();
    std::unordered_map<std::string, std::vector<DocId>> kept;
    const auto& k_bogus = engine.bogus_key();

    for (const auto& kw : members) {
        auto state = states.get(kw);
        kept[kw];
        if (!state) continue;
        auto token = sse::make_search_token(mk, kw, state);
        states.unpublish(kw);  // searches fall back to the local cache now
        auto fetched = server.fetch_delete(*token);

        std::unordered_set<DocId, ArrayHash> seen;
        for (const auto& id : fetched.ids) {
            if (bogus::is_bogus(id, k_bogus)) {
                ++report.bogus_before;
            } else if (deleted.contains(id)) {
                ++report.deleted_purged;
            } else if (seen.insert(id).second) {
                kept[kw].push_back(id);
            }
        }
    }

    uint64_t common = 0;
    for (const auto& kw : members) common = std::max<uint64_t>(common, kept[kw].size());
    report.common_length = common;
    for (const auto& kw : members) report.real_kept += kept[kw].size();

    if (common == 0) {
        for (const auto& kw : members) guard.set_uploaded(kw, 0);
        return report;
    }

    std::vector<sse::EncryptedEntry> entries;
    std::vector<std::pair<std::string, sse::KeywordEncState>> to_publish;
    for (const auto& kw : members) {
        if (!guard.flag(kw)) continue;  // never occurred: keep it absent
        auto ids = kept[kw];
        uint64_t need = common - ids.size();
        if (need > 0) {
            auto extra = guard.draw_bogus(kw, need);
            ids.insert(ids.end(), extra.begin(), extra.end());
            report.bogus_after += need;
        }
        sse::KeywordEncState fresh;
        fresh.st = rng.block();
        fresh.c = 0;
        Block16 k_e = rng.block();
        auto [k_w, k_id] = sse::derive_keyword_keys(mk, kw);
        auto enc = sse::encrypt_batch(k_w, k_id, fresh, ids, k_e);
        entries.insert(entries.end(), enc.entries.begin(), enc.entries.end());
        to_publish.emplace_back(kw, enc.next);
    }

    server.insert_batch(entries);  // staged: integrity failures leave nothing reinserted
    for (const auto& [kw, st] : to_publish) {
        states.publish(kw, st);
        guard.set_uploaded(kw, common);
    }
    return report;
}

}  // namespace veil::reenc
