#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "veil/bogus.hpp"
#include "veil/clustering.hpp"
#include "veil/corpus.hpp"
#include "veil/padding.hpp"
#include "veil/sse.hpp"

namespace veil::config {

struct Config {
    size_t alpha = 2;
    std::string mode = "high";      // high | low
    std::string strategy = "np";    // np | p
    uint64_t cache_total = 1000;    // |L|
    uint64_t bogus_pool = 10000;    // |B|
    uint64_t flush_window_ticks = 0;
    double flush_fill_ratio = 0.75;
    size_t batch_docs = 10;
    std::string server_addr = "http://127.0.0.1:8200";
    uint64_t seed = 1;  // 0 draws keys from OS entropy
    bool stemming = false;

    static Config from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    static Config load(const std::filesystem::path& file);
    void save(const std::filesystem::path& file) const;
};

struct Keys {
    sse::MasterKeys master;
    bogus::BogusKey bogus{};

    static Keys from_seed(uint64_t seed);
    static Keys random();
    static Keys load(const std::filesystem::path& file);
    void save(const std::filesystem::path& file) const;
};

/// Setup artifacts: the trained frequency table (slot = table index), the
/// clustering, cache thresholds and bogus quotas.
struct SetupBundle {
    size_t alpha = 2;
    uint64_t gamma = 0;
    uint64_t cache_total = 0;
    uint64_t bogus_pool = 0;
    setup::FrequencyTable table;
    setup::Clustering clustering;
    setup::CachePlan plan;
    setup::BogusBudget budget;

    uint64_t slot_of(const std::string& keyword) const;
    const std::string& keyword_of(uint64_t slot) const { return table[slot].keyword; }
    std::unordered_map<std::string, uint64_t> slot_map() const;
    std::unordered_map<std::string, size_t> keyword_clusters() const;
    std::unordered_map<uint64_t, size_t> slot_clusters() const;
    /// Training distribution over slots (relative frequencies).
    std::unordered_map<uint64_t, double> training_distribution() const;

    static SetupBundle load(const std::filesystem::path& file);
    void save(const std::filesystem::path& file) const;
};

/// Clusters the training corpus and sizes the cache and bogus pool.
SetupBundle run_setup(const Config& cfg, std::span<const corpus::Document> training,
                      bool stemming);
SetupBundle run_setup(const Config& cfg,
                      std::vector<std::pair<std::string, uint64_t>> keyword_counts);

padding::EngineConfig engine_config(const Config& cfg);
std::unique_ptr<padding::PaddingEngine> make_engine(const SetupBundle& bundle, const Keys& keys,
                                                    const Config& cfg);

}  // namespace veil::config
