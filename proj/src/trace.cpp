#include "veil/trace.hpp"

#include <stdexcept>

namespace veil::trace {

Writer::Writer(const std::filesystem::path& file, bool append) {
    open(file, append);
}

void Writer::open(const std::filesystem::path& file, bool append) {
    std::lock_guard lk(mu_);
    out_ = std::make_unique<std::ofstream>(file, append ? std::ios::app : std::ios::trunc);
    if (!*out_) throw std::runtime_error("cannot open trace file " + file.string());
}

void Writer::write(const nlohmann::json& event) {
    if (!out_) return;
    std::lock_guard lk(mu_);
    *out_ << event.dump() << '\n';
}

void Writer::flush() {
    if (!out_) return;
    std::lock_guard lk(mu_);
    out_->flush();
}

std::vector<nlohmann::json> read_trace(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open trace file " + file.string());
    std::vector<nlohmann::json> events;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        events.push_back(nlohmann::json::parse(line));
    }
    return events;
}

}  // namespace veil::trace
