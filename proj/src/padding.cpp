#include "veil/padding.hpp"

#include <algorithm>
#include <atomic>
#include <shared_mutex>

namespace veil::padding {

const char* to_string(Strategy s) {
    return s == Strategy::kNonPersistent ? "np" : "p";
}

const char* to_string(Mode m) {
    return m == Mode::kHigh ? "high" : "low";
}

Strategy strategy_from_string(std::string_view s) {
    if (s == "np") return Strategy::kNonPersistent;
    if (s == "p") return Strategy::kPersistent;
    throw std::invalid_argument("unknown strategy: " + std::string(s));
}

Mode mode_from_string(std::string_view s) {
    if (s == "high") return Mode::kHigh;
    if (s == "low") return Mode::kLow;
    throw std::invalid_argument("unknown mode: " + std::string(s));
}

uint64_t PaddedBatch::real_count() const {
    uint64_t n = 0;
    for (const auto& k : keywords) n += k.real.size();
    return n;
}

uint64_t PaddedBatch::bogus_count() const {
    uint64_t n = 0;
    for (const auto& k : keywords) n += k.bogus.size();
    return n;
}

uint64_t PaddedBatch::entry_count() const {
    return real_count() + bogus_count();
}

PaddingEngine::PaddingEngine(const setup::Clustering& clustering,
                             const setup::FrequencyTable& table, const setup::CachePlan& plan,
                             bogus::BogusPool pool, EngineConfig cfg)
    : pool_(std::move(pool)), cfg_(cfg) {
    if (plan.thresholds.size() != clustering.groups.size())
        throw std::invalid_argument("cache plan does not match clustering");
    for (size_t g = 0; g < clustering.groups.size(); ++g) {
        auto cluster = std::make_unique<Cluster>();
        cluster->threshold = plan.thresholds[g];
        for (size_t i = clustering.groups[g].begin; i < clustering.groups[g].end; ++i) {
            const auto& kw = table[i].keyword;
            cluster->members.push_back(kw);
            cluster->states.emplace(kw, KeywordState{});
            cluster_of_.emplace(kw, g);
        }
        clusters_.push_back(std::move(cluster));
    }
    if (cfg_.unknown_policy == UnknownKeyword::kCatchAll) {
        auto cluster = std::make_unique<Cluster>();
        cluster->threshold = std::max<uint64_t>(1, cfg_.catch_all_threshold);
        cluster->catch_all = true;
        clusters_.push_back(std::move(cluster));
    }
}

std::optional<size_t> PaddingEngine::route(const std::string& keyword) const {
    std::shared_lock lk(route_mu_);
    auto it = cluster_of_.find(keyword);
    if (it == cluster_of_.end()) return std::nullopt;
    return it->second;
}

void PaddingEngine::ingest(std::span<const corpus::Pair> pairs) {
    tick_.fetch_add(1, std::memory_order_relaxed);

    // Resolve every pair first so a rejected keyword leaves no partial state.
    std::vector<std::pair<size_t, const corpus::Pair*>> routed;
    routed.reserve(pairs.size());
    for (const auto& p : pairs) {
        auto idx = route(p.keyword);
        if (!idx) {
            if (cfg_.unknown_policy == UnknownKeyword::kReject)
                throw std::invalid_argument("keyword outside the trained space: " + p.keyword);
            std::unique_lock lk(route_mu_);
            size_t catch_all = clusters_.size() - 1;
            auto it = cluster_of_.find(p.keyword);
            if (it == cluster_of_.end()) {
                std::lock_guard clk(clusters_[catch_all]->mu);
                clusters_[catch_all]->members.push_back(p.keyword);
                clusters_[catch_all]->states.emplace(p.keyword, KeywordState{});
                it = cluster_of_.emplace(p.keyword, catch_all).first;
            }
            idx = it->second;
        }
        routed.emplace_back(*idx, &p);
    }

    // Group per cluster so each cluster is locked once per call.
    std::sort(routed.begin(), routed.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    size_t i = 0;
    while (i < routed.size()) {
        size_t idx = routed[i].first;
        Cluster& c = *clusters_[idx];
        std::lock_guard lk(c.mu);
        while (i < routed.size() && routed[i].first == idx) {
            const corpus::Pair& p = *routed[i].second;
            c.pending[p.keyword].push_back(p.id);
            c.pending_pairs++;
            c.states[p.keyword].flag = true;
            cache_load_.fetch_add(1, std::memory_order_relaxed);
            ++i;
        }
    }
}

bool PaddingEngine::gate_passes(const Cluster& c) const {
    if (cfg_.strategy == Strategy::kNonPersistent) return c.pending_pairs >= c.threshold;
    if (c.first_batch_pending) {
        // First emission additionally requires that every member keyword has
        // occurred; otherwise the upload itself would reveal which keywords
        // do not exist yet.
        if (c.pending_pairs < c.threshold) return false;
        for (const auto& m : c.members)
            if (!c.states.at(m).flag) return false;
        return true;
    }
    return c.pending_pairs >= c.threshold;
}

std::optional<PaddedBatch> PaddingEngine::emit_locked(Cluster& c, size_t index, Mode mode,
                                                      bool flushed) {
    uint64_t st_max = 0;
    for (const auto& m : c.members) st_max = std::max(st_max, c.states.at(m).uploaded);

    uint64_t length;
    if (mode == Mode::kHigh) {
        uint64_t c_max = 0;
        for (const auto& m : c.members) {
            auto it = c.pending.find(m);
            if (it != c.pending.end()) c_max = std::max<uint64_t>(c_max, it->second.size());
        }
        length = c_max;
    } else {
        uint64_t c_min = 0;
        for (const auto& m : c.members) {
            auto it = c.pending.find(m);
            if (it == c.pending.end() || it->second.empty()) continue;
            if (c_min == 0 || it->second.size() < c_min) c_min = it->second.size();
        }
        if (c_min == 0) return std::nullopt;  // no positive cached length to equalise on
        length = c_min;
    }
    const uint64_t common = st_max + length;

    PaddedBatch batch;
    batch.cluster = index;
    batch.mode = mode;
    batch.strategy = cfg_.strategy;
    batch.flushed = flushed;
    batch.tick = tick_.load(std::memory_order_relaxed);
    batch.common_length = common;

    for (const auto& m : c.members) {
        auto& ks = c.states.at(m);
        if (!ks.flag) continue;  // never occurred: padding it would expose non-existence
        auto& pend = c.pending[m];

        BatchKeyword bk;
        bk.keyword = m;
        if (mode == Mode::kHigh) {
            const uint64_t need = common - ks.uploaded;
            bk.real = std::move(pend);
            pend.clear();
            const uint64_t nbogus = need - bk.real.size();
            if (nbogus > 0) {
                std::lock_guard plk(pool_mu_);
                bk.bogus = pool_.draw(m, nbogus);
            }
        } else {
            const uint64_t m_new = common - ks.uploaded;
            if (m_new > pend.size()) {
                bk.real = std::move(pend);
                pend.clear();
                const uint64_t nbogus = m_new - bk.real.size();
                std::lock_guard plk(pool_mu_);
                bk.bogus = pool_.draw(m, nbogus);
            } else {
                bk.real.assign(pend.begin(), pend.begin() + static_cast<ptrdiff_t>(m_new));
                pend.erase(pend.begin(), pend.begin() + static_cast<ptrdiff_t>(m_new));
            }
        }
        ks.uploaded = common;
        bk.uploaded_after = common;

        c.pending_pairs -= bk.real.size();
        cache_load_.fetch_sub(bk.real.size(), std::memory_order_relaxed);
        bogus_used_.fetch_add(bk.bogus.size(), std::memory_order_relaxed);
        if (!bk.real.empty() || !bk.bogus.empty()) batch.keywords.push_back(std::move(bk));
    }

    if (batch.keywords.empty()) return std::nullopt;
    c.first_batch_pending = false;
    c.last_emit_tick = tick_.load(std::memory_order_relaxed);
    batches_emitted_.fetch_add(1, std::memory_order_relaxed);
    return batch;
}

std::vector<PaddedBatch> PaddingEngine::padding_check() {
    std::vector<PaddedBatch> out;
    for (size_t i = 0; i < clusters_.size(); ++i) {
        Cluster& c = *clusters_[i];
        std::lock_guard lk(c.mu);
        if (!gate_passes(c)) continue;
        if (auto batch = emit_locked(c, i, cfg_.mode, false)) out.push_back(std::move(*batch));
    }
    return out;
}

std::vector<PaddedBatch> PaddingEngine::flush(uint64_t now) {
    std::vector<PaddedBatch> out;
    if (cfg_.flush_window == 0) return out;
    for (size_t i = 0; i < clusters_.size(); ++i) {
        Cluster& c = *clusters_[i];
        std::lock_guard lk(c.mu);
        if (now < c.last_emit_tick + cfg_.flush_window) continue;
        if (static_cast<double>(c.pending_pairs) >=
            cfg_.flush_fill_ratio * static_cast<double>(c.threshold))
            continue;
        if (cfg_.strategy == Strategy::kPersistent && c.first_batch_pending) {
            bool all = !c.members.empty();
            for (const auto& m : c.members)
                if (!c.states.at(m).flag) {
                    all = false;
                    break;
                }
            if (!all) continue;  // the first-batch gate survives flushing
        }
        if (auto batch = emit_locked(c, i, Mode::kHigh, true)) out.push_back(std::move(*batch));
    }
    return out;
}

std::vector<PaddedBatch> PaddingEngine::force_flush() {
    std::vector<PaddedBatch> out;
    for (size_t i = 0; i < clusters_.size(); ++i) {
        Cluster& c = *clusters_[i];
        std::lock_guard lk(c.mu);
        if (cfg_.strategy == Strategy::kPersistent && c.first_batch_pending) {
            bool all = !c.members.empty();
            for (const auto& m : c.members)
                if (!c.states.at(m).flag) {
                    all = false;
                    break;
                }
            if (!all) continue;
        }
        if (auto batch = emit_locked(c, i, Mode::kHigh, true)) out.push_back(std::move(*batch));
    }
    return out;
}

std::vector<DocId> PaddingEngine::cached_ids(const std::string& keyword) const {
    auto idx = route(keyword);
    if (!idx) return {};
    const Cluster& c = *clusters_[*idx];
    std::lock_guard lk(c.mu);
    auto p = c.pending.find(keyword);
    return p == c.pending.end() ? std::vector<DocId>{} : p->second;
}

uint64_t PaddingEngine::cache_load() const {
    return cache_load_.load(std::memory_order_relaxed);
}

uint64_t PaddingEngine::tick() const {
    return tick_.load(std::memory_order_relaxed);
}

uint64_t PaddingEngine::bogus_used() const {
    return bogus_used_.load(std::memory_order_relaxed);
}

uint64_t PaddingEngine::batches_emitted() const {
    return batches_emitted_.load(std::memory_order_relaxed);
}

std::optional<size_t> PaddingEngine::cluster_of(const std::string& keyword) const {
    return route(keyword);
}

std::vector<std::string> PaddingEngine::cluster_members(size_t cluster) const {
    const Cluster& c = *clusters_.at(cluster);
    std::lock_guard lk(c.mu);
    return c.members;
}

KeywordState PaddingEngine::keyword_state(const std::string& keyword) const {
    auto idx = route(keyword);
    if (!idx) return {};
    const Cluster& c = *clusters_[*idx];
    std::lock_guard lk(c.mu);
    auto s = c.states.find(keyword);
    return s == c.states.end() ? KeywordState{} : s->second;
}

std::vector<PaddingEngine::ClusterSnapshot> PaddingEngine::snapshot() const {
    std::vector<ClusterSnapshot> out;
    for (size_t i = 0; i < clusters_.size(); ++i) {
        const Cluster& c = *clusters_[i];
        std::lock_guard lk(c.mu);
        ClusterSnapshot s;
        s.index = i;
        s.first_batch_pending = c.first_batch_pending;
        s.pending_pairs = c.pending_pairs;
        s.threshold = c.threshold;
        s.last_emit_tick = c.last_emit_tick;
        for (const auto& m : c.members) s.members.emplace_back(m, c.states.at(m));
        out.push_back(std::move(s));
    }
    return out;
}

nlohmann::json PaddingEngine::metrics() const {
    return nlohmann::json{{"cache_load", cache_load()},
                          {"bogus_used_total", bogus_used()},
                          {"batches_emitted", batches_emitted()}};
}

PaddingEngine::ClusterGuard::ClusterGuard(PaddingEngine& engine, size_t index)
    : engine_(engine), index_(index), lock_(engine.clusters_.at(index)->mu) {}

const std::vector<std::string>& PaddingEngine::ClusterGuard::members() const {
    return engine_.clusters_[index_]->members;
}

bool PaddingEngine::ClusterGuard::flag(const std::string& keyword) const {
    return engine_.clusters_[index_]->states.at(keyword).flag;
}

uint64_t PaddingEngine::ClusterGuard::uploaded(const std::string& keyword) const {
    return engine_.clusters_[index_]->states.at(keyword).uploaded;
}

void PaddingEngine::ClusterGuard::set_uploaded(const std::string& keyword, uint64_t value) {
    engine_.clusters_[index_]->states.at(keyword).uploaded = value;
}

std::vector<DocId> PaddingEngine::ClusterGuard::draw_bogus(const std::string& keyword,
                                                           uint64_t n) {
    std::lock_guard plk(engine_.pool_mu_);
    auto ids = engine_.pool_.draw(keyword, n);
    engine_.bogus_used_.fetch_add(n, std::memory_order_relaxed);
    return ids;
}

bool PaddingEngine::ClusterGuard::first_batch_pending() const {
    return engine_.clusters_[index_]->first_batch_pending;
}

PaddingEngine::ClusterGuard PaddingEngine::lock_cluster(size_t index) {
    return ClusterGuard(*this, index);
}

nlohmann::json PaddingEngine::save_state() const {
    nlohmann::json j;
    j["tick"] = tick();
    j["bogus_used"] = bogus_used();
    j["batches_emitted"] = batches_emitted();
    j["clusters"] = nlohmann::json::array();
    for (const auto& cp : clusters_) {
        const Cluster& c = *cp;
        std::lock_guard lk(c.mu);
        nlohmann::json jc;
        jc["first_batch_pending"] = c.first_batch_pending;
        jc["last_emit_tick"] = c.last_emit_tick;
        jc["catch_all_members"] = nlohmann::json::array();
        if (c.catch_all)
            for (const auto& m : c.members) jc["catch_all_members"].push_back(m);
        nlohmann::json states = nlohmann::json::object();
        for (const auto& [kw, ks] : c.states)
            states[kw] = {{"flag", ks.flag}, {"uploaded", ks.uploaded}};
        jc["states"] = std::move(states);
        nlohmann::json pending = nlohmann::json::object();
        for (const auto& [kw, ids] : c.pending) {
            if (ids.empty()) continue;
            auto arr = nlohmann::json::array();
            for (const auto& id : ids) arr.push_back(to_hex(id));
            pending[kw] = std::move(arr);
        }
        jc["pending"] = std::move(pending);
        j["clusters"].push_back(std::move(jc));
    }
    nlohmann::json pool = nlohmann::json::object();
    for (const auto& [kw, s] : pool_.state())
        pool[kw] = {{"quota", s.quota},
                    {"remaining", s.remaining},
                    {"counter", s.counter},
                    {"tranches", s.tranches}};
    j["pool"] = std::move(pool);
    j["pool_total_drawn"] = pool_.total_drawn();
    return j;
}

void PaddingEngine::load_state(const nlohmann::json& j) {
    tick_.store(j.at("tick").get<uint64_t>());
    bogus_used_.store(j.at("bogus_used").get<uint64_t>());
    batches_emitted_.store(j.at("batches_emitted").get<uint64_t>());
    const auto& jclusters = j.at("clusters");
    if (jclusters.size() != clusters_.size())
        throw std::invalid_argument("state does not match engine layout");
    uint64_t load = 0;
    for (size_t i = 0; i < clusters_.size(); ++i) {
        Cluster& c = *clusters_[i];
        std::lock_guard lk(c.mu);
        const auto& jc = jclusters[i];
        c.first_batch_pending = jc.at("first_batch_pending").get<bool>();
        c.last_emit_tick = jc.at("last_emit_tick").get<uint64_t>();
        for (const auto& m : jc.at("catch_all_members")) {
            auto kw = m.get<std::string>();
            c.members.push_back(kw);
            c.states.emplace(kw, KeywordState{});
            cluster_of_.emplace(kw, i);
        }
        for (auto it = jc.at("states").begin(); it != jc.at("states").end(); ++it) {
            auto& ks = c.states.at(it.key());
            ks.flag = it.value().at("flag").get<bool>();
            ks.uploaded = it.value().at("uploaded").get<uint64_t>();
        }
        c.pending.clear();
        c.pending_pairs = 0;
        for (auto it = jc.at("pending").begin(); it != jc.at("pending").end(); ++it) {
            auto& ids = c.pending[it.key()];
            for (const auto& h : it.value())
                ids.push_back(array_from_hex<16>(h.get<std::string>()));
            c.pending_pairs += ids.size();
        }
        load += c.pending_pairs;
    }
    cache_load_.store(load);
    for (auto it = j.at("pool").begin(); it != j.at("pool").end(); ++it) {
        bogus::BogusPool::KeywordState s;
        s.quota = it.value().at("quota").get<uint64_t>();
        s.remaining = it.value().at("remaining").get<uint64_t>();
        s.counter = it.value().at("counter").get<uint64_t>();
        s.tranches = it.value().at("tranches").get<uint64_t>();
        pool_.restore(it.key(), s);
    }
    pool_.set_total_drawn(j.at("pool_total_drawn").get<uint64_t>());
}

}  // namespace veil::padding
