#pragma once

#include "veil/client.hpp"
#include "veil/crypto.hpp"
#include "veil/padding.hpp"
#include "veil/states.hpp"

namespace veil::reenc {

struct Report {
    uint64_t real_kept = 0;
    uint64_t bogus_before = 0;
    uint64_t bogus_after = 0;
    uint64_t deleted_purged = 0;
    uint64_t common_length = 0;  // per-keyword length after the operation
};

/// Re-encrypts one cluster: drains every member's chain from the server,
/// drops bogus and deleted ids, re-pads the keepers to the minimal common
/// length (the largest kept count), and reinserts everything under fresh
/// states in a single atomic batch. Old tokens stop resolving; member states
/// are unpublished for the duration, so client searches fall back to the
/// local cache. The cluster's own lock excludes concurrent emissions.
Report reencrypt_cluster(padding::PaddingEngine& engine, pipeline::StateRegistry& states,
                         client::ServerApi& server, const sse::MasterKeys& mk,
                         const client::DeletionList& deleted, crypto::DeterministicRng& rng,
                         size_t cluster_id);

}  // namespace veil::reenc
