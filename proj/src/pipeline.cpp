#include "veil/pipeline.hpp"

#include <chrono>

namespace veil::pipeline {

using nlohmann::json;

Pipeline::Pipeline(const sse::MasterKeys& mk, padding::PaddingEngine& engine,
                   StateRegistry& states, client::ServerApi& server,
                   crypto::DeterministicRng enc_rng, trace::Writer* trace, PipelineOptions opts)
    : mk_(mk),
      engine_(engine),
      states_(states),
      server_(server),
      enc_rng_(std::move(enc_rng)),
      trace_(trace),
      opts_(std::move(opts)) {
    if (opts_.threaded) worker_ = std::thread([this] { worker_loop(); });
}

Pipeline::~Pipeline() {
    {
        std::lock_guard lk(mu_);
        stopping_ = true;
    }
    cv_.notify_all();
    if (worker_.joinable()) worker_.join();
}

void Pipeline::stream_documents(std::span<const corpus::Document> docs) {
    size_t off = 0;
    while (off < docs.size()) {
        size_t n = std::min(opts_.batch_docs, docs.size() - off);
        auto pairs = corpus::parse_documents(docs.subspan(off, n), opts_.corpus_name,
                                             opts_.stemming);
        ingest_pairs(pairs);
        off += n;
        if (opts_.snapshot_every > 0 && engine_.tick() % opts_.snapshot_every == 0) snapshot();
    }
}

void Pipeline::ingest_pairs(std::span<const corpus::Pair> pairs) {
    rethrow_if_failed();
    engine_.ingest(pairs);
    Work work;
    work.tick = engine_.tick();
    work.batches = engine_.padding_check();
    for (auto& b : engine_.flush(work.tick)) work.batches.push_back(std::move(b));
    work.cache_load = engine_.cache_load();
    work.bogus_used = engine_.bogus_used();
    work.batches_emitted = engine_.batches_emitted();
    enqueue(std::move(work));
}

void Pipeline::flush_now() {
    rethrow_if_failed();
    Work work;
    work.tick = engine_.tick();
    work.batches = engine_.force_flush();
    work.cache_load = engine_.cache_load();
    work.bogus_used = engine_.bogus_used();
    work.batches_emitted = engine_.batches_emitted();
    enqueue(std::move(work));
}

void Pipeline::snapshot() {
    rethrow_if_failed();
    Work work;
    work.tick = engine_.tick();
    work.is_snapshot = true;
    enqueue(std::move(work));
}

void Pipeline::enqueue(Work work) {
    if (!opts_.threaded) {
        process(work);
        return;
    }
    {
        std::lock_guard lk(mu_);
        queue_.push_back(std::move(work));
    }
    cv_.notify_one();
}

void Pipeline::worker_loop() {
    for (;;) {
        Work work;
        {
            std::unique_lock lk(mu_);
            cv_.wait(lk, [this] { return stopping_ || !queue_.empty(); });
            if (queue_.empty()) {
                if (stopping_) return;
                continue;
            }
            work = std::move(queue_.front());
            queue_.pop_front();
            busy_ = true;
        }
        try {
            process(work);
        } catch (...) {
            std::lock_guard lk(mu_);
            failure_ = std::current_exception();
            queue_.clear();
        }
        {
            std::lock_guard lk(mu_);
            busy_ = false;
        }
        idle_cv_.notify_all();
    }
}

void Pipeline::drain() {
    if (opts_.threaded) {
        std::unique_lock lk(mu_);
        idle_cv_.wait(lk, [this] { return (queue_.empty() && !busy_) || failure_; });
    }
    rethrow_if_failed();
}

void Pipeline::rethrow_if_failed() {
    std::exception_ptr f;
    uint64_t pending = 0;
    {
        std::lock_guard lk(mu_);
        f = failure_;
        pending = queue_.size();
    }
    if (!f) return;
    try {
        std::rethrow_exception(f);
    } catch (const client::ServerUnreachable& e) {
        throw StreamAborted(std::string("stream aborted, cache preserved: ") + e.what(), pending);
    }
}

void Pipeline::process(Work& work) {
    if (work.is_snapshot) {
        take_snapshot(work.tick);
        return;
    }
    for (const auto& batch : work.batches) upload_batch(batch);
    if (trace_) {
        trace_->write(json{{"t", work.tick},
                           {"kind", "tick"},
                           {"cache_load", work.cache_load},
                           {"bogus_used_total", work.bogus_used},
                           {"batches_emitted", work.batches_emitted},
                           {"edb_size", entries_uploaded_},
                           {"real_streamed_total", real_streamed_}});
    }
}

void Pipeline::upload_batch(const padding::PaddedBatch& batch) {
    std::vector<sse::EncryptedEntry> entries;
    std::vector<std::pair<std::string, sse::KeywordEncState>> to_publish;
    json jkeywords = json::array();

    for (const auto& bk : batch.keywords) {
        std::vector<DocId> ids = bk.real;
        ids.insert(ids.end(), bk.bogus.begin(), bk.bogus.end());

        sse::KeywordEncState prev;
        if (auto published = states_.get(bk.keyword)) {
            prev = *published;
        } else {
            prev.st = enc_rng_.block();  // fresh chain root
            prev.c = 0;
        }
        Block16 k_e = enc_rng_.block();
        auto [k_w, k_id] = sse::derive_keyword_keys(mk_, bk.keyword);
        auto enc = sse::encrypt_batch(k_w, k_id, prev, ids, k_e);
        entries.insert(entries.end(), enc.entries.begin(), enc.entries.end());
        to_publish.emplace_back(bk.keyword, enc.next);

        if (trace_) {
            uint64_t slot = bk.keyword.size();  // fallback when no slot map given
            auto it = opts_.slots.find(bk.keyword);
            if (it != opts_.slots.end()) slot = it->second;
            jkeywords.push_back({{"slot", slot},
                                 {"real", bk.real.size()},
                                 {"bogus", bk.bogus.size()},
                                 {"c_after", bk.uploaded_after}});
        }
    }

    int attempt = 0;
    for (;;) {
        try {
            server_.insert_batch(entries);
            break;
        } catch (const client::ServerUnreachable&) {
            if (++attempt > opts_.upload_retries) throw;
            std::this_thread::sleep_for(std::chrono::milliseconds(100) * (1 << attempt));
        }
    }

    // Acknowledged: only now do the new states become visible to clients.
    for (const auto& [kw, st] : to_publish) states_.publish(kw, st);
    entries_uploaded_ += entries.size();
    real_streamed_ += batch.real_count();

    if (trace_) {
        trace_->write(json{{"t", batch.tick},
                           {"kind", "batch"},
                           {"cluster", batch.cluster},
                           {"mode", padding::to_string(batch.mode)},
                           {"strategy", padding::to_string(batch.strategy)},
                           {"flushed", batch.flushed},
                           {"common_length", batch.common_length},
                           {"real", batch.real_count()},
                           {"bogus", batch.bogus_count()},
                           {"entries", batch.entry_count()},
                           {"keywords", jkeywords}});
    }
}

void Pipeline::take_snapshot(uint64_t tick) {
    json view = json::object();
    for (const auto& kw : states_.published_keywords()) {
        auto token = sse::make_search_token(mk_, kw, states_.get(kw));
        if (!token) continue;
        auto reply = server_.search(*token);
        uint64_t slot = kw.size();
        auto it = opts_.slots.find(kw);
        if (it != opts_.slots.end()) slot = it->second;
        view[std::to_string(slot)] = reply.ids.size();
    }
    ++snapshots_;
    if (trace_)
        trace_->write(
            json{{"t", tick}, {"kind", "snapshot"}, {"interval", snapshots_}, {"view", view}});
}

void Pipeline::log_query(uint64_t slot, uint64_t length, double latency_ms,
                         const std::vector<DocId>& ids) {
    if (!trace_) return;
    json jids = json::array();
    for (const auto& id : ids) jids.push_back(to_hex(id));
    trace_->write(json{{"t", engine_.tick()},
                       {"kind", "query"},
                       {"slot", slot},
                       {"len", length},
                       {"lat_ms", latency_ms},
                       {"ids", jids}});
}

}  // namespace veil::pipeline
