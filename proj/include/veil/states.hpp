#pragma once

#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "veil/bytes.hpp"
#include "veil/sse.hpp"

namespace veil::pipeline {

/// Published per-keyword encryption states. A state is published only after
/// the server acknowledged the batch that produced it, so clients can never
/// build tokens against data still in flight.
class StateRegistry {
public:
    std::optional<sse::KeywordEncState> get(const std::string& keyword) const {
        std::lock_guard lk(mu_);
        auto it = states_.find(keyword);
        if (it == states_.end()) return std::nullopt;
        return it->second;
    }

    void publish(const std::string& keyword, const sse::KeywordEncState& state) {
        std::lock_guard lk(mu_);
        states_[keyword] = state;
    }

    void unpublish(const std::string& keyword) {
        std::lock_guard lk(mu_);
        states_.erase(keyword);
    }

    std::vector<std::string> published_keywords() const {
        std::lock_guard lk(mu_);
        std::vector<std::string> out;
        out.reserve(states_.size());
        for (const auto& [kw, _] : states_) out.push_back(kw);
        std::sort(out.begin(), out.end());
        return out;
    }

    nlohmann::json save() const {
        std::lock_guard lk(mu_);
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [kw, s] : states_) j[kw] = {{"st", to_hex(s.st)}, {"c", s.c}};
        return j;
    }

    void load(const nlohmann::json& j) {
        std::lock_guard lk(mu_);
        states_.clear();
        for (auto it = j.begin(); it != j.end(); ++it) {
            sse::KeywordEncState s;
            s.st = array_from_hex<16>(it.value().at("st").get<std::string>());
            s.c = it.value().at("c").get<uint32_t>();
            states_[it.key()] = s;
        }
    }

private:
    mutable std::mutex mu_;
    std::unordered_map<std::string, sse::KeywordEncState> states_;
};

}  // namespace veil::pipeline
