#include "veil/http_api.hpp"

#include <nlohmann/json.hpp>

#include "httplib.h"

namespace veil::api {

using nlohmann::json;

namespace {

json error_body(const std::string& msg) {
    return json{{"error", msg}};
}

sse::SearchToken token_from_json(const json& j) {
    sse::SearchToken t;
    t.k_w = array_from_hex<16>(j.at("k_w").get<std::string>());
    t.k_id = array_from_hex<16>(j.at("k_id").get<std::string>());
    t.st = array_from_hex<16>(j.at("st").get<std::string>());
    t.c = j.at("c").get<uint32_t>();
    return t;
}

json token_to_json(const sse::SearchToken& t) {
    return json{{"k_w", to_hex(t.k_w)}, {"k_id", to_hex(t.k_id)}, {"st", to_hex(t.st)},
                {"c", t.c}};
}

}  // namespace

EdbService::EdbService(edb::Server& server)
    : server_(server), http_(std::make_unique<httplib::Server>()) {
    install_routes();
}

EdbService::~EdbService() {
    stop();
}

void EdbService::install_routes() {
    http_->Post("/v1/batch", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            json j = json::parse(req.body);
            std::vector<sse::EncryptedEntry> entries;
            for (const auto& e : j.at("entries")) {
                sse::EncryptedEntry entry;
                entry.u = array_from_hex<kLabelSize>(e.at("u").get<std::string>());
                entry.v = array_from_hex<kPayloadSize>(e.at("v").get<std::string>());
                entries.push_back(entry);
            }
            uint64_t n = server_.store().insert_batch(entries);
            res.set_content(json{{"inserted", n}}.dump(), "application/json");
        } catch (const edb::DuplicateLabel& e) {
            res.status = 409;
            res.set_content(error_body(e.what()).dump(), "application/json");
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(error_body(e.what()).dump(), "application/json");
        }
    });

    http_->Post("/v1/search", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            auto token = token_from_json(json::parse(req.body));
            auto entries = server_.search(token);
            json results = json::array();
            json ids = json::array();
            for (const auto& e : entries) {
                results.push_back({{"u", to_hex(e.u)}, {"v", to_hex(e.v)}});
                ids.push_back(to_hex(e.id));
            }
            res.set_content(json{{"results", results}, {"ids", ids}}.dump(), "application/json");
        } catch (const sse::IntegrityError& e) {
            res.status = 500;
            json body = error_body(e.what());
            body["integrity"] = true;
            body["missing"] = to_hex(e.missing_label);
            res.set_content(body.dump(), "application/json");
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(error_body(e.what()).dump(), "application/json");
        }
    });

    http_->Post("/v1/fetch_delete", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            auto token = token_from_json(json::parse(req.body));
            auto result = server_.fetch_and_delete(token);
            json ids = json::array();
            for (const auto& id : result.ids) ids.push_back(to_hex(id));
            res.set_content(json{{"ids", ids}, {"deleted", result.deleted}}.dump(),
                            "application/json");
        } catch (const sse::IntegrityError& e) {
            res.status = 500;
            json body = error_body(e.what());
            body["integrity"] = true;
            body["missing"] = to_hex(e.missing_label);
            res.set_content(body.dump(), "application/json");
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(error_body(e.what()).dump(), "application/json");
        }
    });

    http_->Get("/v1/stats", [this](const httplib::Request&, httplib::Response& res) {
        auto s = server_.stats();
        res.set_content(json{{"size", s.size},
                             {"inserted_total", s.inserted_total},
                             {"deleted_total", s.deleted_total}}
                            .dump(),
                        "application/json");
    });
}

int EdbService::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = http_->bind_to_any_port(host);
        if (bound < 0) throw std::runtime_error("cannot bind http server");
    } else if (!http_->bind_to_port(host, port)) {
        throw std::runtime_error("cannot bind http server to port " + std::to_string(port));
    }
    thread_ = std::thread([this] { http_->listen_after_bind(); });
    http_->wait_until_ready();
    return bound;
}

void EdbService::stop() {
    if (http_) http_->stop();
    if (thread_.joinable()) thread_.join();
}

bool EdbService::run(const std::string& host, int port) {
    return http_->listen(host, port);
}

StateMirror::StateMirror(Provider provider)
    : provider_(std::move(provider)), http_(std::make_unique<httplib::Server>()) {
    http_->Get("/v1/state/(.+)", [this](const httplib::Request& req, httplib::Response& res) {
        auto state = provider_(req.matches[1].str());
        if (!state) {
            res.status = 404;
            res.set_content(error_body("no published state").dump(), "application/json");
            return;
        }
        res.set_content(json{{"st", to_hex(state->st)}, {"c", state->c}}.dump(),
                        "application/json");
    });
}

StateMirror::~StateMirror() {
    stop();
}

int StateMirror::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = http_->bind_to_any_port(host);
        if (bound < 0) throw std::runtime_error("cannot bind state mirror");
    } else if (!http_->bind_to_port(host, port)) {
        throw std::runtime_error("cannot bind state mirror to port " + std::to_string(port));
    }
    thread_ = std::thread([this] { http_->listen_after_bind(); });
    http_->wait_until_ready();
    return bound;
}

void StateMirror::stop() {
    if (http_) http_->stop();
    if (thread_.joinable()) thread_.join();
}

EdbHttpClient::EdbHttpClient(const std::string& base_url)
    : http_(std::make_unique<httplib::Client>(base_url)) {
    http_->set_connection_timeout(5);
    http_->set_read_timeout(120);
}

EdbHttpClient::~EdbHttpClient() = default;

namespace {

json expect_json(const httplib::Result& res, const char* op) {
    if (!res)
        throw client::ServerUnreachable(std::string(op) + ": server unreachable (" +
                                        httplib::to_string(res.error()) + ")");
    json body;
    try {
        body = json::parse(res->body);
    } catch (...) {
        body = error_body("unparseable response");
    }
    if (res->status == 409) throw edb::DuplicateLabel(body.value("error", "duplicate"));
    if (res->status == 500 && body.value("integrity", false)) {
        Block32 missing{};
        if (body.contains("missing"))
            missing = array_from_hex<kLabelSize>(body["missing"].get<std::string>());
        throw sse::IntegrityError(body.value("error", "integrity error"), missing);
    }
    if (res->status != 200)
        throw std::runtime_error(std::string(op) + " failed: " + body.value("error", "http error"));
    return body;
}

}  // namespace

uint64_t EdbHttpClient::insert_batch(std::span<const sse::EncryptedEntry> entries) {
    json arr = json::array();
    for (const auto& e : entries) arr.push_back({{"u", to_hex(e.u)}, {"v", to_hex(e.v)}});
    auto res = http_->Post("/v1/batch", json{{"entries", arr}}.dump(), "application/json");
    return expect_json(res, "insert_batch").at("inserted").get<uint64_t>();
}

client::ServerApi::SearchReply EdbHttpClient::search(const sse::SearchToken& token) {
    auto res = http_->Post("/v1/search", token_to_json(token).dump(), "application/json");
    json body = expect_json(res, "search");
    SearchReply reply;
    for (const auto& r : body.at("results"))
        reply.results.emplace_back(array_from_hex<kLabelSize>(r.at("u").get<std::string>()),
                                   array_from_hex<kPayloadSize>(r.at("v").get<std::string>()));
    for (const auto& h : body.at("ids"))
        reply.ids.push_back(array_from_hex<16>(h.get<std::string>()));
    return reply;
}

client::ServerApi::FetchDeleteReply EdbHttpClient::fetch_delete(const sse::SearchToken& token) {
    auto res = http_->Post("/v1/fetch_delete", token_to_json(token).dump(), "application/json");
    json body = expect_json(res, "fetch_delete");
    FetchDeleteReply reply;
    for (const auto& h : body.at("ids"))
        reply.ids.push_back(array_from_hex<16>(h.get<std::string>()));
    reply.deleted = body.at("deleted").get<uint64_t>();
    return reply;
}

edb::Stats EdbHttpClient::stats() {
    auto res = http_->Get("/v1/stats");
    json body = expect_json(res, "stats");
    return edb::Stats{body.at("size").get<uint64_t>(), body.at("inserted_total").get<uint64_t>(),
                      body.at("deleted_total").get<uint64_t>()};
}

std::optional<sse::KeywordEncState> fetch_state(const std::string& base_url,
                                                const std::string& keyword) {
    httplib::Client http(base_url);
    http.set_connection_timeout(5);
    auto res = http.Get("/v1/state/" + keyword);
    if (!res) throw client::ServerUnreachable("state mirror unreachable");
    if (res->status == 404) return std::nullopt;
    json body = json::parse(res->body);
    sse::KeywordEncState s;
    s.st = array_from_hex<16>(body.at("st").get<std::string>());
    s.c = body.at("c").get<uint32_t>();
    return s;
}

}  // namespace veil::api
