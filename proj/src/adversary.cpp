#include "veil/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

namespace veil::adversary {

uint64_t Knowledge::co_count(const std::string& a, const std::string& b) const {
    auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    auto it = cooccurrence.find(key);
    return it == cooccurrence.end() ? 0 : it->second;
}

namespace {

uint64_t observed_co(const TokenObservation& a, const TokenObservation& b) {
    std::unordered_set<DocId, ArrayHash> set(a.ids.begin(), a.ids.end());
    uint64_t n = 0;
    for (const auto& id : b.ids) n += set.count(id);
    return n;
}

}  // namespace

std::unordered_map<uint64_t, AttackOutcome> np_count_attack(
    const Knowledge& knowledge, std::span<const TokenObservation> observations,
    bool use_cooccurrence) {
    // Keywords bucketed by known count.
    std::unordered_map<uint64_t, std::vector<std::string>> by_count;
    for (const auto& [kw, c] : knowledge.counts) by_count[c].push_back(kw);
    for (auto& [_, kws] : by_count) std::sort(kws.begin(), kws.end());

    std::unordered_map<uint64_t, uint64_t> tokens_with_length;
    for (const auto& obs : observations) tokens_with_length[obs.length]++;

    std::unordered_map<uint64_t, AttackOutcome> out;
    std::unordered_map<uint64_t, std::vector<std::string>> candidates;
    for (const auto& obs : observations) {
        auto it = by_count.find(obs.length);
        candidates[obs.token] = it == by_count.end() ? std::vector<std::string>{} : it->second;
    }

    if (use_cooccurrence) {
        // Prune candidates that cannot explain the observed pairwise
        // co-counts against the known co-occurrence matrix; iterate to
        // fixpoint.
        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto& a : observations) {
                auto& cand_a = candidates[a.token];
                if (cand_a.empty()) continue;
                std::vector<std::string> kept;
                for (const auto& w : cand_a) {
                    bool consistent = true;
                    for (const auto& b : observations) {
                        if (b.token == a.token) continue;
                        if (a.ids.empty() || b.ids.empty()) continue;
                        uint64_t co = observed_co(a, b);
                        bool explained = false;
                        for (const auto& w2 : candidates[b.token]) {
                            if (w2 == w) continue;
                            if (knowledge.co_count(w, w2) == co) {
                                explained = true;
                                break;
                            }
                        }
                        if (!explained) {
                            consistent = false;
                            break;
                        }
                    }
                    if (consistent) kept.push_back(w);
                }
                if (kept.size() != cand_a.size()) {
                    cand_a = std::move(kept);
                    changed = true;
                }
            }
        }
    }

    for (const auto& obs : observations) {
        AttackOutcome outcome;
        outcome.candidates = candidates[obs.token];
        if (use_cooccurrence) {
            if (outcome.candidates.size() == 1) outcome.recovered = outcome.candidates.front();
        } else if (outcome.candidates.size() == 1 && tokens_with_length[obs.length] == 1) {
            // A length shared by several tokens cannot name any of them.
            outcome.recovered = outcome.candidates.front();
        }
        out[obs.token] = std::move(outcome);
    }
    return out;
}

std::unordered_map<uint64_t, std::vector<std::string>> anonymity_sets(
    std::span<const TokenObservation> observations,
    const std::unordered_map<uint64_t, std::string>& truth,
    const std::unordered_map<std::string, size_t>& cluster_of) {
    std::unordered_map<uint64_t, std::vector<std::string>> out;
    for (const auto& a : observations) {
        const auto& kw_a = truth.at(a.token);
        size_t cluster_a = cluster_of.at(kw_a);
        std::vector<std::string> peers;
        for (const auto& b : observations) {
            const auto& kw_b = truth.at(b.token);
            if (cluster_of.at(kw_b) == cluster_a && b.length == a.length) peers.push_back(kw_b);
        }
        std::sort(peers.begin(), peers.end());
        peers.erase(std::unique(peers.begin(), peers.end()), peers.end());
        out[a.token] = std::move(peers);
    }
    return out;
}

std::set<std::pair<uint64_t, uint64_t>> p_new_keyword_detect(
    std::span<const LengthView> views,
    const std::unordered_map<uint64_t, size_t>& cluster_of_slot) {
    std::set<std::pair<uint64_t, uint64_t>> out;
    if (views.size() < 2) return out;

    auto present = [](const LengthView& v, uint64_t slot) {
        auto it = v.find(slot);
        return it != v.end() && it->second > 0;
    };

    for (size_t t = 1; t < views.size(); ++t) {
        const auto& prev = views[t - 1];
        for (const auto& [slot, len] : views[t]) {
            if (len == 0 || present(prev, slot)) continue;
            auto cl = cluster_of_slot.find(slot);
            if (cl == cluster_of_slot.end()) continue;
            // Introduction is observable only when a peer of the same cluster
            // was already visible at the earlier snapshot.
            for (const auto& [other, cluster] : cluster_of_slot) {
                if (other == slot || cluster != cl->second) continue;
                if (present(prev, other)) {
                    out.emplace(slot, t);
                    break;
                }
            }
        }
    }
    return out;
}

double kl_divergence(std::span<const double> p, std::span<const double> q, double eps) {
    if (p.size() != q.size()) throw std::invalid_argument("distribution support mismatch");
    if (p.empty()) throw std::invalid_argument("empty distribution");
    double ps = 0, qs = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0 || q[i] < 0) throw std::invalid_argument("negative mass");
        ps += p[i] + eps;
        qs += q[i] + eps;
    }
    double kl = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        double pi = (p[i] + eps) / ps;
        double qi = (q[i] + eps) / qs;
        if (pi > 0) kl += pi * std::log(pi / qi);
    }
    return std::max(kl, 0.0);
}

Metrics metrics_report(const std::vector<nlohmann::json>& trace,
                       const std::unordered_map<uint64_t, double>* training_dist) {
    Metrics m;
    std::unordered_map<uint64_t, uint64_t> streamed_real;  // slot -> real pairs in EDB
    uint64_t query_count = 0;
    double length_sum = 0;

    std::vector<uint64_t> slots;
    if (training_dist)
        for (const auto& [slot, _] : *training_dist) slots.push_back(slot);
    std::sort(slots.begin(), slots.end());

    for (const auto& ev : trace) {
        const std::string kind = ev.value("kind", "");
        uint64_t t = ev.value("t", 0ULL);
        if (kind == "batch") {
            for (const auto& bk : ev.at("keywords"))
                streamed_real[bk.at("slot").get<uint64_t>()] += bk.at("real").get<uint64_t>();
        } else if (kind == "tick") {
            m.cache_load_series.emplace_back(t, ev.at("cache_load").get<uint64_t>());
            m.edb_size_series.emplace_back(t, ev.at("edb_size").get<uint64_t>());
            m.throughput_real_pairs = ev.at("real_streamed_total").get<uint64_t>();
            m.bogus_used = ev.at("bogus_used_total").get<uint64_t>();
            if (training_dist) {
                std::vector<double> p, q;
                p.reserve(slots.size());
                q.reserve(slots.size());
                for (uint64_t slot : slots) {
                    auto it = streamed_real.find(slot);
                    p.push_back(it == streamed_real.end() ? 0.0
                                                          : static_cast<double>(it->second));
                    q.push_back(training_dist->at(slot));
                }
                m.kl_series.emplace_back(t, kl_divergence(p, q));
            }
        } else if (kind == "query") {
            ++query_count;
            length_sum += ev.at("len").get<double>();
            m.search_latency_series.emplace_back(t, ev.value("lat_ms", 0.0));
        }
    }
    if (query_count > 0) m.mean_result_length = length_sum / static_cast<double>(query_count);
    if (m.throughput_real_pairs > 0)
        m.padding_overhead_ratio =
            static_cast<double>(m.bogus_used) / static_cast<double>(m.throughput_real_pairs);
    return m;
}

nlohmann::json metrics_to_json(const Metrics& m) {
    nlohmann::json j;
    j["throughput_real_pairs"] = m.throughput_real_pairs;
    j["bogus_used"] = m.bogus_used;
    j["padding_overhead_ratio"] = m.padding_overhead_ratio;
    j["mean_result_length"] = m.mean_result_length;
    j["ticks"] = m.cache_load_series.size();
    if (!m.kl_series.empty()) j["kl_final"] = m.kl_series.back().second;
    return j;
}

namespace {

template <typename T>
void dump_series(const std::filesystem::path& file, const char* header,
                 const std::vector<std::pair<uint64_t, T>>& series) {
    std::ofstream out(file, std::ios::trunc);
    out << header << '\n';
    for (const auto& [t, v] : series) out << t << ',' << v << '\n';
}

}  // namespace

void write_metrics_csv(const Metrics& m, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    dump_series(dir / "cache_load.csv", "tick,pairs", m.cache_load_series);
    dump_series(dir / "edb_size.csv", "tick,entries", m.edb_size_series);
    dump_series(dir / "search_latency.csv", "tick,ms", m.search_latency_series);
    dump_series(dir / "kl.csv", "tick,kl", m.kl_series);
    std::ofstream out(dir / "metrics.json", std::ios::trunc);
    out << metrics_to_json(m).dump(2) << '\n';
}

}  // namespace veil::adversary
