#pragma once

#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <thread>

#include "veil/client.hpp"
#include "veil/corpus.hpp"
#include "veil/crypto.hpp"
#include "veil/padding.hpp"
#include "veil/states.hpp"
#include "veil/trace.hpp"

namespace veil::pipeline {

struct StreamAborted : std::runtime_error {
    StreamAborted(const std::string& what, uint64_t pending)
        : std::runtime_error(what), pending_batches(pending) {}
    uint64_t pending_batches = 0;
};

struct PipelineOptions {
    size_t batch_docs = 10;
    bool stemming = false;
    std::string corpus_name = "corpus";
    bool threaded = true;       // encryption/upload overlaps ingest
    uint64_t snapshot_every = 0;  // snapshot the observable lengths every N ticks
    int upload_retries = 3;
    std::unordered_map<std::string, uint64_t> slots;  // keyword -> trace slot
};

/// Streaming driver: parse -> ingest -> padding check -> encrypt -> upload ->
/// publish. The ingest side runs the padding checks (one tick per ingest
/// call) and hands emitted batches to the encryption worker through an
/// order-preserving queue, so encryption and upload overlap ingest while the
/// trace stays byte-identical for a fixed seed. Keyword states are published
/// only after the server acknowledged the batch.
class Pipeline {
public:
    Pipeline(const sse::MasterKeys& mk, padding::PaddingEngine& engine, StateRegistry& states,
             client::ServerApi& server, crypto::DeterministicRng enc_rng, trace::Writer* trace,
             PipelineOptions opts);
    ~Pipeline();

    void stream_documents(std::span<const corpus::Document> docs);
    /// One logical tick: ingest the pairs, run the padding check and the
    /// windowed flush, enqueue whatever was emitted.
    void ingest_pairs(std::span<const corpus::Pair> pairs);
    /// Drain the cache through a forced high-mode flush (strategy gates kept).
    void flush_now();
    /// Enqueue an observable-lengths snapshot of all published keywords.
    void snapshot();
    /// Barrier: returns when every queued batch is uploaded and published.
    void drain();

    void log_query(uint64_t slot, uint64_t length, double latency_ms,
                   const std::vector<DocId>& ids);

    uint64_t real_streamed_total() const { return real_streamed_; }
    uint64_t entries_uploaded_total() const { return entries_uploaded_; }
    uint64_t snapshots_taken() const { return snapshots_; }
    uint64_t enc_rng_counter() const { return enc_rng_.counter(); }
    void set_enc_rng_counter(uint64_t c) { enc_rng_.set_counter(c); }

private:
    struct Work {
        uint64_t tick = 0;
        bool is_snapshot = false;
        uint64_t cache_load = 0;
        uint64_t bogus_used = 0;
        uint64_t batches_emitted = 0;
        std::vector<padding::PaddedBatch> batches;
    };

    void enqueue(Work work);
    void process(Work& work);
    void upload_batch(const padding::PaddedBatch& batch);
    void take_snapshot(uint64_t tick);
    void worker_loop();
    void rethrow_if_failed();

    sse::MasterKeys mk_;
    padding::PaddingEngine& engine_;
    StateRegistry& states_;
    client::ServerApi& server_;
    crypto::DeterministicRng enc_rng_;
    trace::Writer* trace_;
    PipelineOptions opts_;

    std::deque<Work> queue_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable idle_cv_;
    bool stopping_ = false;
    bool busy_ = false;
    std::exception_ptr failure_;
    std::thread worker_;

    uint64_t real_streamed_ = 0;
    uint64_t entries_uploaded_ = 0;
    uint64_t snapshots_ = 0;
};

}  // namespace veil::pipeline
