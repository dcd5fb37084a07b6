#include "veil/edb.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cstring>
#include <mutex>
#include <unordered_set>

namespace veil::edb {

namespace {
constexpr uint8_t kOpInsert = 0x01;
constexpr uint8_t kOpDelete = 0x02;
constexpr size_t kRecordHeader = 1 + kLabelSize + 1;
}  // namespace

Store::Store() = default;

Store::Store(const std::filesystem::path& log) {
    if (std::filesystem::exists(log)) replay(log);
    log_fd_ = ::open(log.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (log_fd_ < 0) throw std::runtime_error("cannot open log " + log.string());
}

Store::~Store() {
    if (log_fd_ >= 0) ::close(log_fd_);
}

void Store::replay(const std::filesystem::path& log) {
    int fd = ::open(log.c_str(), O_RDONLY);
    if (fd < 0) throw std::runtime_error("cannot read log " + log.string());
    std::vector<uint8_t> buf;
    {
        uint8_t chunk[1 << 16];
        ssize_t n;
        while ((n = ::read(fd, chunk, sizeof(chunk))) > 0)
            buf.insert(buf.end(), chunk, chunk + n);
        ::close(fd);
    }
    size_t off = 0;
    while (off + kRecordHeader <= buf.size()) {
        uint8_t op = buf[off];
        Block32 label;
        std::memcpy(label.data(), buf.data() + off + 1, kLabelSize);
        uint8_t vlen = buf[off + 1 + kLabelSize];
        if (off + kRecordHeader + vlen > buf.size()) break;  // torn tail record
        const uint8_t* v = buf.data() + off + kRecordHeader;
        if (op == kOpInsert && vlen == kPayloadSize) {
            Payload p;
            std::memcpy(p.data(), v, kPayloadSize);
            map_[label] = p;
            ++inserted_total_;
        } else if (op == kOpDelete && vlen == 0) {
            map_.erase(label);
            ++deleted_total_;
        } else {
            break;  // corrupt record; keep the consistent prefix
        }
        off += kRecordHeader + vlen;
    }
}

void Store::append_synced(const std::vector<uint8_t>& records) {
    if (log_fd_ < 0) return;
    size_t off = 0;
    while (off < records.size()) {
        ssize_t n = ::write(log_fd_, records.data() + off, records.size() - off);
        if (n < 0) throw std::runtime_error("log write failed");
        off += static_cast<size_t>(n);
    }
    if (::fsync(log_fd_) != 0) throw std::runtime_error("log sync failed");
}

uint64_t Store::insert_batch(std::span<const sse::EncryptedEntry> entries) {
    if (entries.empty()) return 0;
    std::lock_guard wlk(write_mu_);

    {
        std::shared_lock rlk(map_mu_);
        std::unordered_set<Block32, ArrayHash> fresh;
        fresh.reserve(entries.size());
        for (const auto& e : entries) {
            if (map_.count(e.u) || !fresh.insert(e.u).second)
                throw DuplicateLabel("duplicate label " + to_hex(e.u));
        }
    }

    std::vector<uint8_t> records;
    records.reserve(entries.size() * (kRecordHeader + kPayloadSize));
    for (const auto& e : entries) {
        records.push_back(kOpInsert);
        records.insert(records.end(), e.u.begin(), e.u.end());
        records.push_back(static_cast<uint8_t>(kPayloadSize));
        records.insert(records.end(), e.v.begin(), e.v.end());
    }
    append_synced(records);

    {
        std::unique_lock lk(map_mu_);
        for (const auto& e : entries) map_.emplace(e.u, e.v);
        inserted_total_ += entries.size();
    }
    return entries.size();
}

std::optional<Payload> Store::get(const Block32& label) const {
    std::shared_lock lk(map_mu_);
    auto it = map_.find(label);
    if (it == map_.end()) return std::nullopt;
    return it->second;
}

void Store::erase_batch(std::span<const Block32> labels) {
    if (labels.empty()) return;
    std::lock_guard wlk(write_mu_);
    {
        std::shared_lock rlk(map_mu_);
        for (const auto& u : labels)
            if (!map_.count(u)) throw sse::IntegrityError("missing label " + to_hex(u), u);
    }
    std::vector<uint8_t> records;
    records.reserve(labels.size() * kRecordHeader);
    for (const auto& u : labels) {
        records.push_back(kOpDelete);
        records.insert(records.end(), u.begin(), u.end());
        records.push_back(0);
    }
    append_synced(records);
    {
        std::unique_lock lk(map_mu_);
        for (const auto& u : labels) map_.erase(u);
        deleted_total_ += labels.size();
    }
}

Stats Store::stats() const {
    std::shared_lock lk(map_mu_);
    return Stats{map_.size(), inserted_total_, deleted_total_};
}

std::vector<sse::WalkEntry> Server::search(const sse::SearchToken& token) const {
    return sse::search_walk(token, [this](const Block32& u) -> std::optional<std::vector<uint8_t>> {
        auto v = store_.get(u);
        if (!v) return std::nullopt;
        return std::vector<uint8_t>(v->begin(), v->end());
    });
}

Server::FetchDeleteResult Server::fetch_and_delete(const sse::SearchToken& token) {
    std::vector<Block32> touched;
    auto entries =
        sse::search_walk(token, [&](const Block32& u) -> std::optional<std::vector<uint8_t>> {
            auto v = store_.get(u);
            if (!v) return std::nullopt;
            touched.push_back(u);
            return std::vector<uint8_t>(v->begin(), v->end());
        });
    store_.erase_batch(touched);
    FetchDeleteResult out;
    out.deleted = touched.size();
    out.ids.reserve(entries.size());
    for (const auto& e : entries) out.ids.push_back(e.id);
    return out;
}

}  // namespace veil::edb
