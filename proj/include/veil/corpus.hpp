#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "veil/bytes.hpp"
#include "veil/crypto.hpp"

namespace veil::corpus {

struct Document {
    std::string key;  // caller-supplied unique identifier (filename, record id)
    std::string text;
};

struct Pair {
    std::string keyword;
    DocId id;
};

/// Real document ids: first 16 bytes of a hash over (corpus name || key).
DocId doc_id(std::string_view corpus_name, std::string_view key);

std::string porter_stem(std::string word);

/// Lowercases, splits on non-alphanumerics, de-duplicates per document,
/// optionally stems.
std::vector<std::string> extract_keywords(std::string_view text, bool stem);

std::vector<Pair> parse_documents(std::span<const Document> docs, std::string_view corpus_name,
                                  bool stem);

struct ZipfSpec {
    size_t keywords = 100;
    size_t docs = 1000;
    double exponent = 1.0;
    size_t min_keywords_per_doc = 3;
    size_t max_keywords_per_doc = 12;
    uint64_t seed = 1;
    // Appends every never-sampled keyword to two documents so the whole
    // trained space occurs in the stream.
    bool ensure_coverage = false;
};

/// Synthetic corpus: Zipf-weighted keyword draws, distinct per document.
/// Keywords are named kw000..kwNNN.
std::vector<Document> generate_zipf(const ZipfSpec& spec);

std::vector<Document> load_jsonl(const std::filesystem::path& file);
void save_jsonl(const std::filesystem::path& file, std::span<const Document> docs);
std::vector<Document> load_directory(const std::filesystem::path& dir);

}  // namespace veil::corpus
