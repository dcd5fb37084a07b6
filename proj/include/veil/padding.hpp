#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "veil/bogus.hpp"
#include "veil/clustering.hpp"
#include "veil/corpus.hpp"

namespace veil::padding {

enum class Strategy { kNonPersistent, kPersistent };
enum class Mode { kHigh, kLow };
enum class UnknownKeyword { kReject, kCatchAll };

const char* to_string(Strategy s);
const char* to_string(Mode m);
Strategy strategy_from_string(std::string_view s);
Mode mode_from_string(std::string_view s);

/// Controller-side keyword state: whether the keyword has ever occurred
/// (monotone) and how many real+bogus entries were uploaded for it so far.
struct KeywordState {
    bool flag = false;
    uint64_t uploaded = 0;
};

struct BatchKeyword {
    std::string keyword;
    std::vector<DocId> real;
    std::vector<DocId> bogus;
    uint64_t uploaded_after = 0;  // common cluster length after this batch
};

struct PaddedBatch {
    size_t cluster = 0;
    Mode mode = Mode::kHigh;
    Strategy strategy = Strategy::kNonPersistent;
    bool flushed = false;
    uint64_t tick = 0;
    uint64_t common_length = 0;
    std::vector<BatchKeyword> keywords;

    uint64_t real_count() const;
    uint64_t bogus_count() const;
    uint64_t entry_count() const;  // real + bogus (chain heads not included)
};

struct EngineConfig {
    Strategy strategy = Strategy::kNonPersistent;
    Mode mode = Mode::kHigh;
    uint64_t flush_window = 0;      // ticks; 0 disables windowed flushing
    double flush_fill_ratio = 0.75;
    UnknownKeyword unknown_policy = UnknownKeyword::kReject;
    uint64_t catch_all_threshold = 64;
};

/// Trusted padding service: per-cluster caches, keyword-state tracking, the
/// padding check with its non-persistent and persistent gates, high/low
/// padding modes, bogus-pool management and cache flushing.
///
/// Each cluster is a unit of mutual exclusion: ingest and checks on different
/// clusters run in parallel; a check atomically snapshots-and-drains one
/// cluster. There is no global lock.
class PaddingEngine {
public:
    PaddingEngine(const setup::Clustering& clustering, const setup::FrequencyTable& table,
                  const setup::CachePlan& plan, bogus::BogusPool pool, EngineConfig cfg);

    /// One ingest call advances the logical clock by one tick. Pending lists
    /// grow and every ingested keyword's flag turns (and stays) true.
    /// Unknown keywords are rejected unless routed to the catch-all cluster.
    void ingest(std::span<const corpus::Pair> pairs);

    /// Evaluates every cluster against the active strategy's gate and emits
    /// padded batches for the qualifying ones (ascending cluster index).
    std::vector<PaddedBatch> padding_check();

    /// High-mode emission for clusters that have been quiet for longer than
    /// the flush window and sit below the fill ratio. Strategy gates still
    /// apply.
    std::vector<PaddedBatch> flush(uint64_t now);

    /// High-mode emission of everything emittable, gates still applied.
    /// Used to drain at end of stream and by the manual flush action.
    std::vector<PaddedBatch> force_flush();

    std::vector<DocId> cached_ids(const std::string& keyword) const;
    uint64_t cache_load() const;
    uint64_t tick() const;
    uint64_t bogus_used() const;
    uint64_t batches_emitted() const;

    size_t cluster_count() const { return clusters_.size(); }
    std::optional<size_t> cluster_of(const std::string& keyword) const;
    std::vector<std::string> cluster_members(size_t cluster) const;
    KeywordState keyword_state(const std::string& keyword) const;

    struct ClusterSnapshot {
        size_t index = 0;
        bool first_batch_pending = true;
        uint64_t pending_pairs = 0;
        uint64_t threshold = 0;
        uint64_t last_emit_tick = 0;
        std::vector<std::pair<std::string, KeywordState>> members;
    };
    std::vector<ClusterSnapshot> snapshot() const;

    nlohmann::json metrics() const;  // {cache_load, bogus_used_total, batches_emitted}

    bogus::BogusPool& pool() { return pool_; }
    const bogus::BogusKey& bogus_key() const { return pool_.key(); }

    /// Exclusive per-cluster access for maintenance (re-encryption). Blocks
    /// emissions and ingest for that cluster while held.
    class ClusterGuard {
    public:
        const std::vector<std::string>& members() const;
        bool flag(const std::string& keyword) const;
        uint64_t uploaded(const std::string& keyword) const;
        void set_uploaded(const std::string& keyword, uint64_t value);
        std::vector<DocId> draw_bogus(const std::string& keyword, uint64_t n);
        bool first_batch_pending() const;

    private:
        friend class PaddingEngine;
        ClusterGuard(PaddingEngine& engine, size_t index);
        PaddingEngine& engine_;
        size_t index_;
        std::unique_lock<std::mutex> lock_;
    };
    ClusterGuard lock_cluster(size_t index);

    nlohmann::json save_state() const;
    void load_state(const nlohmann::json& j);

private:
    struct Cluster {
        std::vector<std::string> members;
        std::unordered_map<std::string, std::vector<DocId>> pending;
        std::unordered_map<std::string, KeywordState> states;
        uint64_t pending_pairs = 0;
        uint64_t threshold = 1;
        bool first_batch_pending = true;
        uint64_t last_emit_tick = 0;
        bool catch_all = false;
        mutable std::mutex mu;
    };

    bool gate_passes(const Cluster& c) const;  // cluster lock held
    std::optional<PaddedBatch> emit_locked(Cluster& c, size_t index, Mode mode, bool flushed);

    std::optional<size_t> route(const std::string& keyword) const;

    std::vector<std::unique_ptr<Cluster>> clusters_;
    std::unordered_map<std::string, size_t> cluster_of_;
    mutable std::shared_mutex route_mu_;  // cluster_of_ grows under catch-all routing
    bogus::BogusPool pool_;
    std::mutex pool_mu_;
    EngineConfig cfg_;
    std::atomic<uint64_t> tick_{0};
    std::atomic<uint64_t> cache_load_{0};
    std::atomic<uint64_t> bogus_used_{0};
    std::atomic<uint64_t> batches_emitted_{0};
};

}  // namespace veil::padding
