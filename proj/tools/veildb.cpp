#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "veil/adversary.hpp"
#include "veil/client.hpp"
#include "veil/config.hpp"
#include "veil/corpus.hpp"
#include "veil/edb.hpp"
#include "veil/http_api.hpp"
#include "veil/pipeline.hpp"
#include "veil/reencrypt.hpp"
#include "veil/trace.hpp"

using nlohmann::json;
namespace fs = std::filesystem;
using namespace veil;

namespace {

std::vector<corpus::Document> load_corpus(const std::string& path) {
    fs::path p(path);
    if (fs::is_directory(p)) return corpus::load_directory(p);
    return corpus::load_jsonl(p);
}

struct Session {
    config::Config cfg;
    config::SetupBundle bundle;
    config::Keys keys;
    std::unique_ptr<padding::PaddingEngine> engine;
    std::unique_ptr<pipeline::StateRegistry> states = std::make_unique<pipeline::StateRegistry>();
    std::shared_ptr<client::DeletionList> deleted = std::make_shared<client::DeletionList>();
    uint64_t enc_rng_counter = 0;

    static Session open(const std::string& config_path, const std::string& bundle_dir,
                        const std::string& state_path) {
        Session s;
        s.cfg = config::Config::load(config_path);
        s.bundle = config::SetupBundle::load(fs::path(bundle_dir) / "setup.json");
        s.keys = config::Keys::load(fs::path(bundle_dir) / "keys.json");
        s.engine = config::make_engine(s.bundle, s.keys, s.cfg);
        if (!state_path.empty() && fs::exists(state_path)) {
            std::ifstream in(state_path);
            json j;
            in >> j;
            s.engine->load_state(j.at("engine"));
            s.states->load(j.at("states"));
            for (const auto& h : j.at("deleted"))
                s.deleted->insert(array_from_hex<16>(h.get<std::string>()));
            s.enc_rng_counter = j.at("enc_rng_counter").get<uint64_t>();
        }
        return s;
    }

    void save(const std::string& state_path) const {
        if (state_path.empty()) return;
        json j;
        j["engine"] = engine->save_state();
        j["states"] = states->save();
        json del = json::array();
        for (const auto& id : deleted->snapshot()) del.push_back(to_hex(id));
        j["deleted"] = std::move(del);
        j["enc_rng_counter"] = enc_rng_counter;
        fs::path tmp = state_path + ".tmp";
        {
            std::ofstream out(tmp, std::ios::trunc);
            out << j.dump() << '\n';
        }
        fs::rename(tmp, state_path);
    }

    crypto::DeterministicRng enc_rng() const {
        auto rng = crypto::DeterministicRng::from_seed(cfg.seed, "stream-enc");
        rng.set_counter(enc_rng_counter);
        return rng;
    }
};

json id_list(const std::vector<DocId>& ids) {
    json out = json::array();
    for (const auto& id : ids) out.push_back(to_hex(id));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"veildb: encrypted document index with padded streaming"};
    app.require_subcommand(1);

    // gen-corpus
    auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic Zipf corpus");
    corpus::ZipfSpec zipf;
    std::string gen_out;
    double zipf_exp = 1.0;
    gen->add_option("--keywords", zipf.keywords, "keyword space size");
    gen->add_option("--docs", zipf.docs, "number of documents");
    gen->add_option("--zipf", zipf_exp, "Zipf exponent");
    gen->add_option("--min-kw", zipf.min_keywords_per_doc, "min distinct keywords per doc");
    gen->add_option("--max-kw", zipf.max_keywords_per_doc, "max distinct keywords per doc");
    gen->add_option("--seed", zipf.seed, "generator seed");
    gen->add_flag("--coverage", zipf.ensure_coverage, "force every keyword to occur");
    gen->add_option("--out", gen_out, "output JSON-lines file")->required();

    // setup
    auto* setup_cmd = app.add_subcommand("setup", "cluster the training corpus, size caches");
    std::string cfg_path = "config.json", corpus_path, bundle_dir = "bundle";
    setup_cmd->add_option("--config", cfg_path, "config file");
    setup_cmd->add_option("--corpus", corpus_path, "training corpus (.jsonl or directory)")
        ->required();
    setup_cmd->add_option("--out-dir", bundle_dir, "bundle output directory");

    // serve
    auto* serve = app.add_subcommand("serve", "run the storage server");
    std::string host = "127.0.0.1", log_path = "edb.log";
    int port = 8200;
    serve->add_option("--host", host, "bind host");
    serve->add_option("--port", port, "bind port");
    serve->add_option("--log", log_path, "append-only log file");

    // stream
    auto* stream = app.add_subcommand("stream", "stream a corpus through the padding service");
    std::string state_path = "state.json", trace_path, stream_corpus;
    uint64_t snapshot_every = 0;
    bool sync_mode = false;
    stream->add_option("--config", cfg_path, "config file");
    stream->add_option("--bundle", bundle_dir, "bundle directory");
    stream->add_option("--corpus", stream_corpus, "stream corpus")->required();
    stream->add_option("--state", state_path, "service state file");
    stream->add_option("--trace", trace_path, "run trace output (JSON lines)");
    stream->add_option("--snapshot-every", snapshot_every, "observable-length snapshot period");
    stream->add_flag("--sync", sync_mode, "run the encryption stage inline");

    // search
    auto* search = app.add_subcommand("search", "query keywords");
    std::vector<std::string> keywords;
    double random_frac = 0.0;
    std::string query_trace;
    search->add_option("--config", cfg_path, "config file");
    search->add_option("--bundle", bundle_dir, "bundle directory");
    search->add_option("--state", state_path, "service state file");
    search->add_option("--keywords", keywords, "keywords to query")->delimiter(',');
    search->add_option("--random-frac", random_frac, "query a random fraction of the space");
    search->add_option("--trace", query_trace, "append query events to this trace file");

    // delete
    auto* del = app.add_subcommand("delete", "mark document ids as deleted");
    std::vector<std::string> del_ids;
    del->add_option("--config", cfg_path, "config file");
    del->add_option("--bundle", bundle_dir, "bundle directory");
    del->add_option("--state", state_path, "service state file");
    del->add_option("--ids", del_ids, "hex document ids")->required()->delimiter(',');

    // flush
    auto* flush = app.add_subcommand("flush", "force a gated high-mode flush of all clusters");
    flush->add_option("--config", cfg_path, "config file");
    flush->add_option("--bundle", bundle_dir, "bundle directory");
    flush->add_option("--state", state_path, "service state file");
    flush->add_option("--trace", trace_path, "run trace output");

    // reencrypt
    auto* reencrypt = app.add_subcommand("reencrypt", "re-encrypt one cluster");
    size_t cluster_id = 0;
    reencrypt->add_option("--config", cfg_path, "config file");
    reencrypt->add_option("--bundle", bundle_dir, "bundle directory");
    reencrypt->add_option("--state", state_path, "service state file");
    reencrypt->add_option("--cluster", cluster_id, "cluster index")->required();

    // attack
    auto* attack = app.add_subcommand("attack", "run the empirical adversaries over a trace");
    std::string attack_trace, attack_corpus, queries_trace;
    bool use_co = false;
    attack->add_option("--config", cfg_path, "config file");
    attack->add_option("--bundle", bundle_dir, "bundle directory");
    attack->add_option("--trace", attack_trace, "stream trace")->required();
    attack->add_option("--queries", queries_trace, "extra trace with query events");
    attack->add_option("--corpus", attack_corpus, "plaintext corpus (adversary knowledge)")
        ->required();
    attack->add_flag("--cooccurrence", use_co, "enable co-occurrence refinement");

    // report
    auto* report = app.add_subcommand("report", "aggregate run metrics from a trace");
    std::string out_dir = "metrics";
    report->add_option("--config", cfg_path, "config file");
    report->add_option("--bundle", bundle_dir, "bundle directory");
    report->add_option("--trace", attack_trace, "run trace")->required();
    report->add_option("--out-dir", out_dir, "output directory for CSV series");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            zipf.exponent = zipf_exp;
            auto docs = corpus::generate_zipf(zipf);
            corpus::save_jsonl(gen_out, docs);
            std::cout << json{{"docs", docs.size()}, {"keywords", zipf.keywords}}.dump() << "\n";
            return 0;
        }

        if (*setup_cmd) {
            auto cfg = config::Config::load(cfg_path);
            auto docs = load_corpus(corpus_path);
            auto bundle = config::run_setup(cfg, docs, cfg.stemming);
            auto keys = cfg.seed == 0 ? config::Keys::random() : config::Keys::from_seed(cfg.seed);
            fs::create_directories(bundle_dir);
            bundle.save(fs::path(bundle_dir) / "setup.json");
            keys.save(fs::path(bundle_dir) / "keys.json");
            std::cout << json{{"keywords", bundle.table.size()},
                              {"clusters", bundle.clustering.groups.size()},
                              {"alpha", bundle.alpha},
                              {"gamma", bundle.gamma},
                              {"bogus_quota_total", bundle.budget.total_quota}}
                             .dump()
                      << "\n";
            return 0;
        }

        if (*serve) {
            edb::Store store{fs::path(log_path)};
            edb::Server server(store);
            api::EdbService service(server);
            std::cerr << json{{"listening", host + ":" + std::to_string(port)}}.dump() << "\n";
            if (!service.run(host, port)) throw std::runtime_error("server failed to listen");
            return 0;
        }

        if (*stream) {
            auto session = Session::open(cfg_path, bundle_dir, state_path);
            auto docs = load_corpus(stream_corpus);
            api::EdbHttpClient server(session.cfg.server_addr);
            trace::Writer tracer;
            if (!trace_path.empty()) tracer.open(trace_path);
            pipeline::PipelineOptions opts;
            opts.batch_docs = session.cfg.batch_docs;
            opts.stemming = session.cfg.stemming;
            opts.threaded = !sync_mode;
            opts.snapshot_every = snapshot_every;
            opts.slots = session.bundle.slot_map();
            pipeline::Pipeline pipe(session.keys.master, *session.engine, *session.states, server,
                                    session.enc_rng(), tracer.enabled() ? &tracer : nullptr,
                                    opts);
            pipe.stream_documents(docs);
            pipe.drain();
            tracer.flush();
            session.enc_rng_counter = pipe.enc_rng_counter();
            session.save(state_path);
            std::cout << json{{"docs", docs.size()},
                              {"ticks", session.engine->tick()},
                              {"real_streamed", pipe.real_streamed_total()},
                              {"entries_uploaded", pipe.entries_uploaded_total()},
                              {"bogus_used", session.engine->bogus_used()},
                              {"cache_load", session.engine->cache_load()},
                              {"metrics", session.engine->metrics()}}
                             .dump()
                      << "\n";
            return 0;
        }

        if (*search) {
            auto session = Session::open(cfg_path, bundle_dir, state_path);
            api::EdbHttpClient server(session.cfg.server_addr);
            client::QueryClient qc(
                session.keys.master, session.keys.bogus,
                [&](const std::string& w) { return session.states->get(w); },
                [&](const std::string& w) { return session.engine->cached_ids(w); }, server,
                session.deleted);
            if (random_frac > 0) {
                auto rng = crypto::DeterministicRng::from_seed(session.cfg.seed, "query-pick");
                size_t want = std::max<size_t>(
                    1, static_cast<size_t>(random_frac *
                                           static_cast<double>(session.bundle.table.size())));
                while (keywords.size() < want)
                    keywords.push_back(
                        session.bundle.table[rng.uniform(session.bundle.table.size())].keyword);
            }
            trace::Writer tracer;
            if (!query_trace.empty()) tracer.open(query_trace, /*append=*/true);
            json results = json::object();
            json latencies = json::object();
            for (const auto& w : keywords) {
                auto t0 = std::chrono::steady_clock::now();
                auto ids = qc.search_keyword(w);
                double ms = std::chrono::duration<double, std::milli>(
                                std::chrono::steady_clock::now() - t0)
                                .count();
                results[w] = id_list(ids);
                latencies[w] = ms;
                if (tracer.enabled()) {
                    uint64_t slot = session.bundle.slot_of(w);
                    tracer.write(json{{"t", session.engine->tick()},
                                      {"kind", "query"},
                                      {"slot", slot},
                                      {"len", ids.size()},
                                      {"lat_ms", ms},
                                      {"ids", id_list(ids)}});
                }
            }
            std::cout << json{{"results", results}, {"latency_ms", latencies}}.dump() << "\n";
            return 0;
        }

        if (*del) {
            auto session = Session::open(cfg_path, bundle_dir, state_path);
            for (const auto& h : del_ids) session.deleted->insert(array_from_hex<16>(h));
            session.save(state_path);
            std::cout << json{{"deleted_listed", session.deleted->size()}}.dump() << "\n";
            return 0;
        }

        if (*flush) {
            auto session = Session::open(cfg_path, bundle_dir, state_path);
            api::EdbHttpClient server(session.cfg.server_addr);
            trace::Writer tracer;
            if (!trace_path.empty()) tracer.open(trace_path, /*append=*/true);
            pipeline::PipelineOptions opts;
            opts.threaded = false;
            opts.slots = session.bundle.slot_map();
            pipeline::Pipeline pipe(session.keys.master, *session.engine, *session.states, server,
                                    session.enc_rng(), tracer.enabled() ? &tracer : nullptr,
                                    opts);
            pipe.flush_now();
            pipe.drain();
            session.enc_rng_counter = pipe.enc_rng_counter();
            session.save(state_path);
            std::cout << json{{"cache_load", session.engine->cache_load()},
                              {"entries_uploaded", pipe.entries_uploaded_total()}}
                             .dump()
                      << "\n";
            return 0;
        }

        if (*reencrypt) {
            auto session = Session::open(cfg_path, bundle_dir, state_path);
            api::EdbHttpClient server(session.cfg.server_addr);
            auto rng = crypto::DeterministicRng::from_seed(session.cfg.seed, "reencrypt");
            auto rep = reenc::reencrypt_cluster(*session.engine, *session.states, server,
                                                session.keys.master, *session.deleted, rng,
                                                cluster_id);
            session.save(state_path);
            std::cout << json{{"cluster", cluster_id},
                              {"real_kept", rep.real_kept},
                              {"bogus_before", rep.bogus_before},
                              {"bogus_after", rep.bogus_after},
                              {"deleted_purged", rep.deleted_purged},
                              {"common_length", rep.common_length}}
                             .dump()
                      << "\n";
            return 0;
        }

        if (*attack) {
            auto cfg = config::Config::load(cfg_path);
            auto bundle = config::SetupBundle::load(fs::path(bundle_dir) / "setup.json");
            auto events = trace::read_trace(attack_trace);
            if (!queries_trace.empty())
                for (auto& ev : trace::read_trace(queries_trace)) events.push_back(std::move(ev));

            adversary::Knowledge knowledge;
            for (const auto& doc : load_corpus(attack_corpus))
                for (const auto& kw : corpus::extract_keywords(doc.text, cfg.stemming))
                    knowledge.counts[kw]++;

            std::vector<adversary::TokenObservation> observations;
            std::vector<adversary::LengthView> views;
            for (const auto& ev : events) {
                if (ev.value("kind", "") == "query") {
                    adversary::TokenObservation obs;
                    obs.token = ev.at("slot").get<uint64_t>();
                    obs.length = ev.at("len").get<uint64_t>();
                    if (ev.contains("ids"))
                        for (const auto& h : ev["ids"])
                            obs.ids.push_back(array_from_hex<16>(h.get<std::string>()));
                    observations.push_back(std::move(obs));
                } else if (ev.value("kind", "") == "snapshot") {
                    adversary::LengthView view;
                    for (auto it = ev.at("view").begin(); it != ev.at("view").end(); ++it)
                        view[std::stoull(it.key())] = it.value().get<uint64_t>();
                    views.push_back(std::move(view));
                }
            }

            auto outcome = adversary::np_count_attack(knowledge, observations, use_co);
            std::unordered_map<uint64_t, std::string> truth;
            for (const auto& obs : observations)
                truth[obs.token] = bundle.keyword_of(obs.token);
            auto cluster_of = bundle.keyword_clusters();
            auto anon = adversary::anonymity_sets(observations, truth, cluster_of);

            uint64_t unique = 0, correct = 0;
            size_t min_anon = observations.empty() ? 0 : SIZE_MAX;
            for (const auto& obs : observations) {
                const auto& oc = outcome.at(obs.token);
                if (oc.recovered) {
                    ++unique;
                    if (*oc.recovered == truth[obs.token]) ++correct;
                }
                min_anon = std::min(min_anon, anon.at(obs.token).size());
            }
            auto detections = adversary::p_new_keyword_detect(views, bundle.slot_clusters());
            json jdet = json::array();
            for (const auto& [slot, interval] : detections)
                jdet.push_back({{"slot", slot}, {"interval", interval}});
            std::cout << json{{"tokens", observations.size()},
                              {"unique_matches", unique},
                              {"correct_recoveries", correct},
                              {"min_anonymity_set", observations.empty() ? 0 : min_anon},
                              {"alpha", bundle.alpha},
                              {"new_keyword_detections", jdet},
                              {"intervals", views.size()}}
                             .dump()
                      << "\n";
            return 0;
        }

        if (*report) {
            auto bundle = config::SetupBundle::load(fs::path(bundle_dir) / "setup.json");
            auto events = trace::read_trace(attack_trace);
            auto training = bundle.training_distribution();
            auto metrics = adversary::metrics_report(events, &training);
            adversary::write_metrics_csv(metrics, out_dir);
            std::cout << adversary::metrics_to_json(metrics).dump() << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << json{{"error", e.what()}}.dump() << "\n";
        return 1;
    }
    return 0;
}
