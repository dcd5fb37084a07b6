#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace veil::setup {

struct FrequencyEntry {
    std::string keyword;
    uint64_t count = 0;
};

/// Training keyword frequencies, sorted ascending by count (ties by keyword).
/// Group maxima are then always a group's last member.
class FrequencyTable {
public:
    static FrequencyTable from_counts(std::vector<std::pair<std::string, uint64_t>> counts);

    const std::vector<FrequencyEntry>& entries() const { return entries_; }
    size_t size() const { return entries_.size(); }
    uint64_t total() const { return total_; }
    const FrequencyEntry& operator[](size_t i) const { return entries_[i]; }

private:
    std::vector<FrequencyEntry> entries_;
    uint64_t total_ = 0;
};

/// Contiguous partition of the sorted table; every group spans [begin, end).
struct Clustering {
    struct Group {
        size_t begin = 0;
        size_t end = 0;
        size_t size() const { return end - begin; }
    };
    std::vector<Group> groups;
    size_t alpha = 2;
};

/// Padding overhead of a partition: per group, pairs needed to raise every
/// member to the group maximum. Rejects partitions that are not contiguous,
/// do not cover the table, or contain a group smaller than alpha.
uint64_t padding_overhead(const Clustering& clustering, const FrequencyTable& table);

/// Optimal contiguous partition (minimum overhead) with all groups >= alpha.
/// Interval DP over split points; ties broken by fewer groups, then by the
/// lexicographically smallest boundary vector.
Clustering cluster_keywords(const FrequencyTable& table, size_t alpha);

struct CachePlan {
    std::vector<uint64_t> thresholds;  // per cluster, each >= 1
    uint64_t total = 0;
};

/// Splits the total cache capacity across clusters proportionally to their
/// aggregated frequencies (floored, minimum 1).
CachePlan allocate_cache(const Clustering& clustering, const FrequencyTable& table,
                         uint64_t total);

struct BogusBudget {
    std::unordered_map<std::string, uint64_t> quota;  // per keyword
    uint64_t pool = 0;                                // |B|
    uint64_t total_quota = 0;
};

/// Per-keyword bogus quotas: pool * (relative cluster-max frequency - relative
/// keyword frequency), rounded to nearest. Keywords at their cluster maximum
/// get quota 0.
BogusBudget size_bogus_pool(const Clustering& clustering, const FrequencyTable& table,
                            uint64_t pool);

}  // namespace veil::setup
