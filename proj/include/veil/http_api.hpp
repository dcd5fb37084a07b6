#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "veil/client.hpp"
#include "veil/edb.hpp"

namespace httplib {
class Server;
class Client;
}  // namespace httplib

namespace veil::api {

/// HTTP facade over the store: /v1/batch, /v1/search, /v1/fetch_delete,
/// /v1/stats. All hex lowercase, integers as plain JSON numbers.
class EdbService {
public:
    explicit EdbService(edb::Server& server);
    ~EdbService();

    /// Binds and serves on a background thread; returns the bound port.
    int start(const std::string& host, int port = 0);
    void stop();

    /// Blocking serve (used by the server process entry point).
    bool run(const std::string& host, int port);

private:
    void install_routes();
    edb::Server& server_;
    std::unique_ptr<httplib::Server> http_;
    std::thread thread_;
};

/// The padding service's loopback state mirror for out-of-process clients:
/// GET /v1/state/{keyword} -> {"st": hex, "c": n} or 404.
class StateMirror {
public:
    using Provider = std::function<std::optional<sse::KeywordEncState>(const std::string&)>;
    explicit StateMirror(Provider provider);
    ~StateMirror();

    int start(const std::string& host, int port = 0);
    void stop();

private:
    Provider provider_;
    std::unique_ptr<httplib::Server> http_;
    std::thread thread_;
};

/// client::ServerApi over the wire.
class EdbHttpClient : public client::ServerApi {
public:
    explicit EdbHttpClient(const std::string& base_url);
    ~EdbHttpClient() override;

    uint64_t insert_batch(std::span<const sse::EncryptedEntry> entries) override;
    SearchReply search(const sse::SearchToken& token) override;
    FetchDeleteReply fetch_delete(const sse::SearchToken& token) override;
    edb::Stats stats() override;

private:
    std::unique_ptr<httplib::Client> http_;
};

/// Fetches a published keyword state from a state mirror; nullopt on 404.
std::optional<sse::KeywordEncState> fetch_state(const std::string& base_url,
                                                const std::string& keyword);

}  // namespace veil::api
