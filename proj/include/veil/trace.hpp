#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <vector>

#include <nlohmann/json.hpp>

namespace veil::trace {

/// JSON-lines run trace; one event per line, every event carries "t" (logical
/// tick) and "kind".
class Writer {
public:
    Writer() = default;
    explicit Writer(const std::filesystem::path& file, bool append = false);

    void open(const std::filesystem::path& file, bool append = false);
    void write(const nlohmann::json& event);
    bool enabled() const { return static_cast<bool>(out_); }
    void flush();

private:
    std::mutex mu_;
    std::unique_ptr<std::ofstream> out_;
};

std::vector<nlohmann::json> read_trace(const std::filesystem::path& file);

}  // namespace veil::trace
