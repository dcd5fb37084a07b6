#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "veil/clustering.hpp"
#include "veil/crypto.hpp"

using namespace veil;
using setup::Clustering;
using setup::FrequencyTable;

namespace {

FrequencyTable table_of(std::vector<uint64_t> freqs) {
    std::vector<std::pair<std::string, uint64_t>> counts;
    for (size_t i = 0; i < freqs.size(); ++i)
        counts.emplace_back("w" + std::to_string(i), freqs[i]);
    return FrequencyTable::from_counts(std::move(counts));
}

Clustering partition(std::vector<std::pair<size_t, size_t>> groups, size_t alpha = 2) {
    Clustering c;
    c.alpha = alpha;
    for (auto [b, e] : groups) c.groups.push_back({b, e});
    return c;
}

// Brute force over every contiguous partition with all groups >= alpha.
uint64_t brute_force_min(const FrequencyTable& t, size_t alpha) {
    const size_t n = t.size();
    uint64_t best = std::numeric_limits<uint64_t>::max();
    // A bit per interior boundary position.
    for (uint64_t mask = 0; mask < (1ULL << (n - 1)); ++mask) {
        uint64_t gamma = 0;
        size_t begin = 0;
        bool ok = true;
        for (size_t i = 0; i < n; ++i) {
            bool boundary = (i == n - 1) || (mask >> i) & 1;
            if (!boundary) continue;
            size_t end = i + 1;
            if (end - begin < alpha) {
                ok = false;
                break;
            }
            uint64_t sum = 0;
            for (size_t j = begin; j < end; ++j) sum += t[j].count;
            gamma += (end - begin) * t[end - 1].count - sum;
            begin = end;
        }
        if (ok) best = std::min(best, gamma);
    }
    return best;
}

}  // namespace

TEST_CASE("padding overhead of hand-checked partitions") {
    CHECK(setup::padding_overhead(partition({{0, 3}}), table_of({5, 5, 5})) == 0);
    auto t = table_of({1, 2, 10, 11});
    CHECK(setup::padding_overhead(partition({{0, 2}, {2, 4}}), t) == 2);
    CHECK(setup::padding_overhead(partition({{0, 4}}), t) == 20);
}

TEST_CASE("padding overhead rejects invalid partitions") {
    auto t = table_of({1, 2, 3, 4});
    CHECK_THROWS_AS(setup::padding_overhead(partition({{0, 2}}), t), std::invalid_argument);
    CHECK_THROWS_AS(setup::padding_overhead(partition({{0, 2}, {3, 4}}), t),
                    std::invalid_argument);
    CHECK_THROWS_AS(setup::padding_overhead(partition({{0, 1}, {1, 4}}), t),
                    std::invalid_argument);  // singleton group below alpha
}

TEST_CASE("overhead is additive over groups") {
    auto t = table_of({1, 3, 4, 9, 12, 20});
    auto whole = setup::padding_overhead(partition({{0, 2}, {2, 4}, {4, 6}}), t);
    uint64_t sum = 0;
    for (auto [b, e] : std::vector<std::pair<size_t, size_t>>{{0, 2}, {2, 4}, {4, 6}}) {
        uint64_t s = 0;
        for (size_t i = b; i < e; ++i) s += t[i].count;
        sum += (e - b) * t[e - 1].count - s;
    }
    CHECK(whole == sum);
}

TEST_CASE("clustering finds the hand-checked optimum") {
    auto t = table_of({1, 2, 10, 11});
    auto c = setup::cluster_keywords(t, 2);
    REQUIRE(c.groups.size() == 2);
    CHECK(c.groups[0].begin == 0);
    CHECK(c.groups[0].end == 2);
    CHECK(c.groups[1].end == 4);
    CHECK(setup::padding_overhead(c, t) == 2);
}

TEST_CASE("uniform frequencies collapse to a single group") {
    auto t = table_of({7, 7, 7, 7});
    auto c = setup::cluster_keywords(t, 2);
    CHECK(c.groups.size() == 1);
    CHECK(setup::padding_overhead(c, t) == 0);
}

TEST_CASE("clustering rejects undersized tables and alpha below two") {
    auto t = table_of({1, 2, 3});
    CHECK_THROWS_AS(setup::cluster_keywords(t, 4), std::invalid_argument);
    CHECK_THROWS_AS(setup::cluster_keywords(t, 1), std::invalid_argument);
}

TEST_CASE("clustering matches brute force on random tables") {
    auto rng = crypto::DeterministicRng::from_seed(101, "clustering-test");
    for (int round = 0; round < 200; ++round) {
        size_t n = 4 + rng.uniform(9);  // 4..12
        std::vector<uint64_t> freqs;
        for (size_t i = 0; i < n; ++i) freqs.push_back(1 + rng.uniform(40));
        auto t = table_of(freqs);
        for (size_t alpha : {2, 3, 4}) {
            if (n < alpha) continue;
            auto c = setup::cluster_keywords(t, alpha);
            CHECK(setup::padding_overhead(c, t) == brute_force_min(t, alpha));
        }
    }
}

TEST_CASE("merging adjacent groups with distinct maxima never lowers overhead") {
    auto rng = crypto::DeterministicRng::from_seed(103, "clustering-test");
    for (int round = 0; round < 100; ++round) {
        size_t n = 6 + rng.uniform(6);
        std::vector<uint64_t> freqs;
        for (size_t i = 0; i < n; ++i) freqs.push_back(1 + rng.uniform(30));
        auto t = table_of(freqs);
        size_t split = 2 + rng.uniform(n - 3);
        if (split < 2 || n - split < 2) continue;
        if (t[split - 1].count == t[n - 1].count) continue;  // equal maxima: merging is free
        auto apart = setup::padding_overhead(partition({{0, split}, {split, n}}), t);
        auto merged = setup::padding_overhead(partition({{0, n}}), t);
        CHECK(merged >= apart);
    }
}

TEST_CASE("cache allocation is proportional with floor and minimum one") {
    auto t = table_of({1, 2, 10, 11});  // sums {3, 21}
    auto c = setup::cluster_keywords(t, 2);
    auto plan = setup::allocate_cache(c, t, 100);
    REQUIRE(plan.thresholds.size() == 2);
    CHECK(plan.thresholds[0] == 12);
    CHECK(plan.thresholds[1] == 87);

    auto single = partition({{0, 4}});
    CHECK(setup::allocate_cache(single, t, 64).thresholds == std::vector<uint64_t>{64});

    auto even = table_of({1, 1});
    CHECK(setup::allocate_cache(partition({{0, 2}}, 2), even, 2).thresholds ==
          std::vector<uint64_t>{2});
    auto two = setup::cluster_keywords(table_of({1, 1, 50, 50}), 2);
    auto p2 = setup::allocate_cache(two, table_of({1, 1, 50, 50}), 2);
    CHECK(p2.thresholds[0] == 1);  // floor would give 0; minimum kicks in

    CHECK_THROWS_AS(setup::allocate_cache(two, table_of({1, 1, 50, 50}), 1),
                    std::invalid_argument);
}

TEST_CASE("bogus quotas follow the frequency gap, zero at the cluster maximum") {
    auto t = table_of({1, 2});
    auto c = setup::cluster_keywords(t, 2);
    auto b = setup::size_bogus_pool(c, t, 9);
    CHECK(b.quota.at("w0") == 3);  // 9 * (2/3 - 1/3)
    CHECK(b.quota.at("w1") == 0);
    CHECK_THROWS_AS(setup::size_bogus_pool(c, t, 0), std::invalid_argument);
}

TEST_CASE("pool sizing lands near the expected scale on a large skewed table") {
    // A 5000-keyword Zipf-like table at a few-million-pair scale, quota pool
    // set to the corpus size: the total bogus budget should land within an
    // order of magnitude of the corpus itself (it empirically does for real
    // email-style corpora).
    const size_t n = 5000;
    std::vector<std::pair<std::string, uint64_t>> counts;
    double norm = 0;
    for (size_t i = 1; i <= n; ++i) norm += 1.0 / static_cast<double>(i);
    const double total_pairs = 2418270.0;
    for (size_t i = 1; i <= n; ++i) {
        char name[16];
        std::snprintf(name, sizeof(name), "w%04zu", i);
        uint64_t c = std::max<uint64_t>(
            1, static_cast<uint64_t>(total_pairs / norm / static_cast<double>(i)));
        counts.emplace_back(name, c);
    }
    auto t = FrequencyTable::from_counts(std::move(counts));
    auto c = setup::cluster_keywords(t, 256);
    auto budget = setup::size_bogus_pool(c, t, t.total());
    MESSAGE("bogus pool for 5000-keyword table: ", budget.total_quota, " (corpus ", t.total(),
            " pairs, ", c.groups.size(), " clusters)");
    CHECK(budget.total_quota > 100000);
    CHECK(budget.total_quota < 30000000);
}

TEST_CASE("frequency table validation") {
    CHECK_THROWS_AS(table_of({0, 1}), std::invalid_argument);
    std::vector<std::pair<std::string, uint64_t>> dup{{"a", 1}, {"a", 2}};
    CHECK_THROWS_AS(FrequencyTable::from_counts(dup), std::invalid_argument);
    auto t = table_of({5, 3, 4});
    CHECK(t[0].count == 3);
    CHECK(t[2].count == 5);  // sorted ascending
}
