#include "veil/config.hpp"

#include <fstream>
#include <unordered_map>

#include "veil/crypto.hpp"

namespace veil::config {

using nlohmann::json;

namespace {

json load_json(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open " + file.string());
    json j;
    in >> j;
    return j;
}

void save_json(const std::filesystem::path& file, const json& j) {
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << j.dump(2) << '\n';
}

}  // namespace

Config Config::from_json(const json& j) {
    Config c;
    c.alpha = j.value("alpha", c.alpha);
    c.mode = j.value("mode", c.mode);
    c.strategy = j.value("strategy", c.strategy);
    c.cache_total = j.value("cache_total", c.cache_total);
    c.bogus_pool = j.value("bogus_pool", c.bogus_pool);
    c.flush_window_ticks = j.value("flush_window_ticks", c.flush_window_ticks);
    c.flush_fill_ratio = j.value("flush_fill_ratio", c.flush_fill_ratio);
    c.batch_docs = j.value("batch_docs", c.batch_docs);
    c.server_addr = j.value("server_addr", c.server_addr);
    c.seed = j.value("seed", c.seed);
    c.stemming = j.value("stemming", c.stemming);
    padding::mode_from_string(c.mode);          // validate
    padding::strategy_from_string(c.strategy);  // validate
    return c;
}

json Config::to_json() const {
    return json{{"alpha", alpha},
                {"mode", mode},
                {"strategy", strategy},
                {"cache_total", cache_total},
                {"bogus_pool", bogus_pool},
                {"flush_window_ticks", flush_window_ticks},
                {"flush_fill_ratio", flush_fill_ratio},
                {"batch_docs", batch_docs},
                {"server_addr", server_addr},
                {"seed", seed},
                {"stemming", stemming}};
}

Config Config::load(const std::filesystem::path& file) {
    return from_json(load_json(file));
}

void Config::save(const std::filesystem::path& file) const {
    save_json(file, to_json());
}

Keys Keys::from_seed(uint64_t seed) {
    std::array<uint8_t, 19 + 8> label{};
    std::memcpy(label.data(), "veildb-master-seed", 18);
    for (int k = 0; k < 8; ++k) label[19 + k] = static_cast<uint8_t>(seed >> (8 * (7 - k)));
    Block32 seed32 = crypto::sha256(label);

    Keys keys;
    keys.master = sse::gen_master_keys(seed32);
    std::array<uint8_t, 33> buf;
    buf[0] = 0x03;
    std::memcpy(buf.data() + 1, seed32.data(), 32);
    Block32 d = crypto::sha256(buf);
    std::memcpy(keys.bogus.data(), d.data(), 16);
    return keys;
}

Keys Keys::random() {
    Block32 seed32;
    crypto::secure_random(seed32);
    Keys keys;
    keys.master = sse::gen_master_keys(seed32);
    Block16 kb;
    crypto::secure_random(kb);
    keys.bogus = kb;
    return keys;
}

Keys Keys::load(const std::filesystem::path& file) {
    json j = load_json(file);
    Keys keys;
    keys.master.k1 = array_from_hex<16>(j.at("k1").get<std::string>());
    keys.master.k2 = array_from_hex<16>(j.at("k2").get<std::string>());
    keys.bogus = array_from_hex<16>(j.at("k_bogus").get<std::string>());
    return keys;
}

void Keys::save(const std::filesystem::path& file) const {
    save_json(file, json{{"k1", to_hex(master.k1)},
                         {"k2", to_hex(master.k2)},
                         {"k_bogus", to_hex(bogus)}});
}

uint64_t SetupBundle::slot_of(const std::string& keyword) const {
    for (size_t i = 0; i < table.size(); ++i)
        if (table[i].keyword == keyword) return i;
    throw std::out_of_range("keyword not in setup bundle: " + keyword);
}

std::unordered_map<std::string, uint64_t> SetupBundle::slot_map() const {
    std::unordered_map<std::string, uint64_t> out;
    for (size_t i = 0; i < table.size(); ++i) out[table[i].keyword] = i;
    return out;
}

std::unordered_map<std::string, size_t> SetupBundle::keyword_clusters() const {
    std::unordered_map<std::string, size_t> out;
    for (size_t g = 0; g < clustering.groups.size(); ++g)
        for (size_t i = clustering.groups[g].begin; i < clustering.groups[g].end; ++i)
            out[table[i].keyword] = g;
    return out;
}

std::unordered_map<uint64_t, size_t> SetupBundle::slot_clusters() const {
    std::unordered_map<uint64_t, size_t> out;
    for (size_t g = 0; g < clustering.groups.size(); ++g)
        for (size_t i = clustering.groups[g].begin; i < clustering.groups[g].end; ++i)
            out[i] = g;
    return out;
}

std::unordered_map<uint64_t, double> SetupBundle::training_distribution() const {
    std::unordered_map<uint64_t, double> out;
    const double total = static_cast<double>(table.total());
    for (size_t i = 0; i < table.size(); ++i)
        out[i] = static_cast<double>(table[i].count) / total;
    return out;
}

SetupBundle SetupBundle::load(const std::filesystem::path& file) {
    json j = load_json(file);
    SetupBundle b;
    b.alpha = j.at("alpha").get<size_t>();
    b.gamma = j.at("gamma").get<uint64_t>();
    b.cache_total = j.at("cache_total").get<uint64_t>();
    b.bogus_pool = j.at("bogus_pool").get<uint64_t>();
    std::vector<std::pair<std::string, uint64_t>> counts;
    for (const auto& e : j.at("table"))
        counts.emplace_back(e.at("keyword").get<std::string>(), e.at("count").get<uint64_t>());
    b.table = setup::FrequencyTable::from_counts(std::move(counts));
    b.clustering.alpha = b.alpha;
    for (const auto& g : j.at("groups"))
        b.clustering.groups.push_back({g.at(0).get<size_t>(), g.at(1).get<size_t>()});
    b.plan.total = b.cache_total;
    for (const auto& t : j.at("thresholds")) b.plan.thresholds.push_back(t.get<uint64_t>());
    b.budget.pool = b.bogus_pool;
    for (auto it = j.at("quotas").begin(); it != j.at("quotas").end(); ++it) {
        b.budget.quota[it.key()] = it.value().get<uint64_t>();
        b.budget.total_quota += it.value().get<uint64_t>();
    }
    return b;
}

void SetupBundle::save(const std::filesystem::path& file) const {
    json jtable = json::array();
    for (const auto& e : table.entries())
        jtable.push_back({{"keyword", e.keyword}, {"count", e.count}});
    json jgroups = json::array();
    for (const auto& g : clustering.groups) jgroups.push_back({g.begin, g.end});
    json jthresholds = json::array();
    for (auto t : plan.thresholds) jthresholds.push_back(t);
    json jquotas = json::object();
    for (const auto& [kw, q] : budget.quota) jquotas[kw] = q;
    save_json(file, json{{"alpha", alpha},
                         {"gamma", gamma},
                         {"cache_total", cache_total},
                         {"bogus_pool", bogus_pool},
                         {"table", jtable},
                         {"groups", jgroups},
                         {"thresholds", jthresholds},
                         {"quotas", jquotas}});
}

SetupBundle run_setup(const Config& cfg,
                      std::vector<std::pair<std::string, uint64_t>> keyword_counts) {
    if (keyword_counts.size() < cfg.alpha)
        throw std::invalid_argument("training corpus has fewer keywords than alpha");
    SetupBundle b;
    b.alpha = cfg.alpha;
    b.cache_total = cfg.cache_total;
    b.bogus_pool = cfg.bogus_pool;
    b.table = setup::FrequencyTable::from_counts(std::move(keyword_counts));
    b.clustering = setup::cluster_keywords(b.table, cfg.alpha);
    b.gamma = setup::padding_overhead(b.clustering, b.table);
    b.plan = setup::allocate_cache(b.clustering, b.table, cfg.cache_total);
    b.budget = setup::size_bogus_pool(b.clustering, b.table, cfg.bogus_pool);
    return b;
}

SetupBundle run_setup(const Config& cfg, std::span<const corpus::Document> training,
                      bool stemming) {
    std::unordered_map<std::string, uint64_t> counts;
    for (const auto& doc : training)
        for (const auto& kw : corpus::extract_keywords(doc.text, stemming)) counts[kw]++;
    std::vector<std::pair<std::string, uint64_t>> vec(counts.begin(), counts.end());
    return run_setup(cfg, std::move(vec));
}

padding::EngineConfig engine_config(const Config& cfg) {
    padding::EngineConfig ec;
    ec.strategy = padding::strategy_from_string(cfg.strategy);
    ec.mode = padding::mode_from_string(cfg.mode);
    ec.flush_window = cfg.flush_window_ticks;
    ec.flush_fill_ratio = cfg.flush_fill_ratio;
    return ec;
}

std::unique_ptr<padding::PaddingEngine> make_engine(const SetupBundle& bundle, const Keys& keys,
                                                    const Config& cfg) {
    bogus::BogusPool pool(keys.bogus, bundle.budget);
    return std::make_unique<padding::PaddingEngine>(bundle.clustering, bundle.table, bundle.plan,
                                                    std::move(pool), engine_config(cfg));
}

}  // namespace veil::config
