#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "veil/bytes.hpp"

namespace veil::adversary {

/// Background knowledge: true per-keyword result counts derived from the
/// plaintext corpus feed (never from secret keys), plus an optional keyword
/// co-occurrence matrix.
struct Knowledge {
    std::unordered_map<std::string, uint64_t> counts;
    std::map<std::pair<std::string, std::string>, uint64_t> cooccurrence;  // keys ordered
    uint64_t co_count(const std::string& a, const std::string& b) const;
};

/// One observed query: an opaque token id, the server-visible result length,
/// the interval it was captured in, and (optionally) the recovered ids for
/// co-occurrence analysis.
struct TokenObservation {
    uint64_t token = 0;
    uint64_t length = 0;
    uint64_t interval = 0;
    std::vector<DocId> ids;
};

struct AttackOutcome {
    std::optional<std::string> recovered;  // set only on a unique match
    std::vector<std::string> candidates;   // keywords whose known count equals the length
};

/// Count-style inference against a single interval: a token is recovered iff
/// its observed length is unique among the observations and exactly one
/// keyword's known count equals it; otherwise the matching candidate set is
/// reported. With use_cooccurrence, candidate sets of equal-length tokens are
/// pruned to fixpoint by pairwise co-count consistency.
std::unordered_map<uint64_t, AttackOutcome> np_count_attack(
    const Knowledge& knowledge, std::span<const TokenObservation> observations,
    bool use_cooccurrence = false);

/// Anonymity sets under the observation: for each token, the occurred
/// same-cluster keywords whose observed length equals the token's. truth maps
/// token -> keyword (harness-side ground truth), cluster_of maps keyword ->
/// cluster.
std::unordered_map<uint64_t, std::vector<std::string>> anonymity_sets(
    std::span<const TokenObservation> observations,
    const std::unordered_map<uint64_t, std::string>& truth,
    const std::unordered_map<std::string, size_t>& cluster_of);

/// Per-interval result-length view: slot -> observed length. Absent slots had
/// no published entries at that interval.
using LengthView = std::unordered_map<uint64_t, uint64_t>;

/// Persistent new-keyword detection across interval snapshots: flags
/// (slot, interval) when a slot turns from absent to present while some
/// same-cluster peer was already present earlier, which is exactly the
/// transition the first-batch gate is meant to hide.
std::set<std::pair<uint64_t, uint64_t>> p_new_keyword_detect(
    std::span<const LengthView> views, const std::unordered_map<uint64_t, size_t>& cluster_of_slot);

/// KL divergence with add-epsilon smoothing on both distributions.
double kl_divergence(std::span<const double> p, std::span<const double> q, double eps = 1e-9);

struct Metrics {
    uint64_t throughput_real_pairs = 0;
    uint64_t bogus_used = 0;
    double padding_overhead_ratio = 0.0;
    double mean_result_length = 0.0;
    std::vector<std::pair<uint64_t, uint64_t>> cache_load_series;  // (tick, pairs)
    std::vector<std::pair<uint64_t, uint64_t>> edb_size_series;
    std::vector<std::pair<uint64_t, double>> search_latency_series;  // (tick, ms)
    std::vector<std::pair<uint64_t, double>> kl_series;              // (tick, divergence)
};

/// Aggregates a run trace. The optional training distribution (slot -> mass)
/// enables the per-tick KL series of the streamed-real distribution.
Metrics metrics_report(const std::vector<nlohmann::json>& trace,
                       const std::unordered_map<uint64_t, double>* training_dist = nullptr);

nlohmann::json metrics_to_json(const Metrics& m);
void write_metrics_csv(const Metrics& m, const std::filesystem::path& dir);

}  // namespace veil::adversary
