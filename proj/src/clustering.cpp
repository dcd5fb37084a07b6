#include "veil/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace veil::setup {

FrequencyTable FrequencyTable::from_counts(std::vector<std::pair<std::string, uint64_t>> counts) {
    FrequencyTable t;
    t.entries_.reserve(counts.size());
    for (auto& [kw, c] : counts) {
        if (c == 0) throw std::invalid_argument("zero frequency for keyword " + kw);
        if (kw.empty()) throw std::invalid_argument("empty keyword");
        t.entries_.push_back({std::move(kw), c});
    }
    std::sort(t.entries_.begin(), t.entries_.end(), [](const auto& a, const auto& b) {
        if (a.count != b.count) return a.count < b.count;
        return a.keyword < b.keyword;
    });
    for (size_t i = 1; i < t.entries_.size(); ++i)
        if (t.entries_[i].keyword == t.entries_[i - 1].keyword)
            throw std::invalid_argument("duplicate keyword " + t.entries_[i].keyword);
    for (const auto& e : t.entries_) t.total_ += e.count;
    return t;
}

namespace {

// Overhead of one group over the sorted table: |group| * f_max - sum(f).
uint64_t group_overhead(const FrequencyTable& table, size_t begin, size_t end) {
    uint64_t sum = 0;
    for (size_t i = begin; i < end; ++i) sum += table[i].count;
    return (end - begin) * table[end - 1].count - sum;
}

}  // namespace

uint64_t padding_overhead(const Clustering& clustering, const FrequencyTable& table) {
    if (clustering.groups.empty()) throw std::invalid_argument("empty partition");
    size_t expected = 0;
    for (const auto& g : clustering.groups) {
        if (g.begin != expected || g.end <= g.begin || g.end > table.size())
            throw std::invalid_argument("partition not contiguous over the table");
        if (g.size() < clustering.alpha) throw std::invalid_argument("group below minimum size");
        expected = g.end;
    }
    if (expected != table.size()) throw std::invalid_argument("partition does not cover the table");

    uint64_t gamma = 0;
    for (const auto& g : clustering.groups) gamma += group_overhead(table, g.begin, g.end);
    return gamma;
}

Clustering cluster_keywords(const FrequencyTable& table, size_t alpha) {
    if (alpha < 2) throw std::invalid_argument("alpha must be >= 2");
    const size_t n = table.size();
    if (n < alpha) throw std::invalid_argument("fewer keywords than alpha");

    std::vector<uint64_t> prefix(n + 1, 0);
    for (size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + table[i].count;
    auto cost = [&](size_t b, size_t e) {  // overhead of group [b, e)
        return (e - b) * table[e - 1].count - (prefix[e] - prefix[b]);
    };

    // Suffix DP: best (overhead, group count) for partitioning [i, n).
    constexpr uint64_t kInf = std::numeric_limits<uint64_t>::max();
    std::vector<uint64_t> best(n + 1, kInf);
    std::vector<size_t> groups(n + 1, 0);
    best[n] = 0;
    for (size_t i = n; i-- > 0;) {
        for (size_t e = i + alpha; e <= n; ++e) {
            if (best[e] == kInf) continue;
            if (e != n && n - e < alpha) continue;  // remainder must host a full group
            uint64_t c = cost(i, e) + best[e];
            size_t g = groups[e] + 1;
            if (c < best[i] || (c == best[i] && g < groups[i])) {
                best[i] = c;
                groups[i] = g;
            }
        }
    }

    // Walk from the left taking the smallest feasible boundary at each step;
    // with the suffix DP fixed this yields the lexicographically smallest
    // boundary vector among (overhead, group-count) optimal partitions.
    Clustering out;
    out.alpha = alpha;
    size_t i = 0;
    while (i < n) {
        for (size_t e = i + alpha; e <= n; ++e) {
            if (best[e] == kInf) continue;
            if (e != n && n - e < alpha) continue;
            if (cost(i, e) + best[e] == best[i] && groups[e] + 1 == groups[i]) {
                out.groups.push_back({i, e});
                i = e;
                break;
            }
        }
    }
    return out;
}

CachePlan allocate_cache(const Clustering& clustering, const FrequencyTable& table,
                         uint64_t total) {
    if (total < clustering.groups.size())
        throw std::invalid_argument("cache total below cluster count");
    CachePlan plan;
    plan.total = total;
    const double denom = static_cast<double>(table.total());
    for (const auto& g : clustering.groups) {
        uint64_t sum = 0;
        for (size_t i = g.begin; i < g.end; ++i) sum += table[i].count;
        auto share = static_cast<uint64_t>(
            std::floor(static_cast<double>(total) * static_cast<double>(sum) / denom));
        plan.thresholds.push_back(std::max<uint64_t>(1, share));
    }
    return plan;
}

BogusBudget size_bogus_pool(const Clustering& clustering, const FrequencyTable& table,
                            uint64_t pool) {
    if (pool == 0) throw std::invalid_argument("pool must be positive");
    BogusBudget budget;
    budget.pool = pool;
    const double denom = static_cast<double>(table.total());
    for (const auto& g : clustering.groups) {
        const double f_max = static_cast<double>(table[g.end - 1].count) / denom;
        for (size_t i = g.begin; i < g.end; ++i) {
            const double f_w = static_cast<double>(table[i].count) / denom;
            auto q = static_cast<uint64_t>(
                std::llround(static_cast<double>(pool) * (f_max - f_w)));
            budget.quota[table[i].keyword] = q;
            budget.total_quota += q;
        }
    }
    return budget;
}

}  // namespace veil::setup
