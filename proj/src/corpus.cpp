#include "veil/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace veil::corpus {

using nlohmann::json;

DocId doc_id(std::string_view corpus_name, std::string_view key) {
    std::string buf;
    buf.reserve(corpus_name.size() + 1 + key.size());
    buf.append(corpus_name);
    buf.push_back('/');
    buf.append(key);
    Block32 d = crypto::sha256(
        std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(buf.data()), buf.size()));
    DocId id{};
    std::memcpy(id.data(), d.data(), 16);
    return id;
}

namespace {

// Porter stemmer, classic five-step suffix stripping.
struct Stemmer {
    std::string w;

    bool cons(size_t i) const {
        char c = w[i];
        if (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u') return false;
        if (c == 'y') return i == 0 ? true : !cons(i - 1);
        return true;
    }

    // Measure of w[0..end): number of VC sequences.
    size_t measure(size_t end) const {
        size_t n = 0, i = 0;
        while (i < end && cons(i)) ++i;
        while (i < end) {
            while (i < end && !cons(i)) ++i;
            if (i >= end) break;
            ++n;
            while (i < end && cons(i)) ++i;
        }
        return n;
    }

    bool has_vowel(size_t end) const {
        for (size_t i = 0; i < end; ++i)
            if (!cons(i)) return true;
        return false;
    }

    bool double_cons(size_t end) const {
        return end >= 2 && w[end - 1] == w[end - 2] && cons(end - 1);
    }

    // Consonant-vowel-consonant ending, last not w/x/y.
    bool cvc(size_t end) const {
        if (end < 3) return false;
        if (!cons(end - 3) || cons(end - 2) || !cons(end - 1)) return false;
        char c = w[end - 1];
        return c != 'w' && c != 'x' && c != 'y';
    }

    bool ends(std::string_view suf) const {
        return w.size() >= suf.size() && w.compare(w.size() - suf.size(), suf.size(), suf) == 0;
    }

    size_t stem_len(std::string_view suf) const { return w.size() - suf.size(); }

    bool replace(std::string_view suf, std::string_view rep, size_t min_m) {
        if (!ends(suf)) return false;
        size_t st = stem_len(suf);
        if (measure(st) <= min_m) return true;  // matched but measure too small
        w.resize(st);
        w.append(rep);
        return true;
    }

    void step1a() {
        if (ends("sses")) w.resize(w.size() - 2);
        else if (ends("ies")) w.resize(w.size() - 2);
        else if (!ends("ss") && ends("s")) w.resize(w.size() - 1);
    }

    void step1b() {
        if (ends("eed")) {
            if (measure(stem_len("eed")) > 0) w.resize(w.size() - 1);
            return;
        }
        bool hit = false;
        if (ends("ed") && has_vowel(stem_len("ed"))) {
            w.resize(stem_len("ed"));
            hit = true;
        } else if (ends("ing") && has_vowel(stem_len("ing"))) {
            w.resize(stem_len("ing"));
            hit = true;
        }
        if (!hit) return;
        if (ends("at") || ends("bl") || ends("iz")) {
            w.push_back('e');
        } else if (double_cons(w.size()) && !ends("l") && !ends("s") && !ends("z")) {
            w.resize(w.size() - 1);
        } else if (measure(w.size()) == 1 && cvc(w.size())) {
            w.push_back('e');
        }
    }

    void step1c() {
        if (ends("y") && has_vowel(w.size() - 1)) w.back() = 'i';
    }

    void step2() {
        static constexpr std::pair<std::string_view, std::string_view> rules[] = {
            {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"}, {"anci", "ance"},
            {"izer", "ize"},    {"abli", "able"},   {"alli", "al"},   {"entli", "ent"},
            {"eli", "e"},       {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
            {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"}, {"fulness", "ful"},
            {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},   {"biliti", "ble"}};
        for (auto [suf, rep] : rules)
            if (replace(suf, rep, 0)) return;
    }

    void step3() {
        static constexpr std::pair<std::string_view, std::string_view> rules[] = {
            {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
            {"ical", "ic"},  {"ful", ""},   {"ness", ""}};
        for (auto [suf, rep] : rules)
            if (replace(suf, rep, 0)) return;
    }

    void step4() {
        static constexpr std::string_view sufs[] = {"al",    "ance", "ence", "er",  "ic",  "able",
                                                    "ible",  "ant",  "ement", "ment", "ent", "ou",
                                                    "ism",   "ate",  "iti",  "ous", "ive", "ize"};
        for (auto suf : sufs) {
            if (!ends(suf)) continue;
            size_t st = stem_len(suf);
            if (measure(st) > 1) w.resize(st);
            return;
        }
        if (ends("ion")) {
            size_t st = stem_len("ion");
            if (st > 0 && (w[st - 1] == 's' || w[st - 1] == 't') && measure(st) > 1) w.resize(st);
        }
    }

    void step5() {
        if (ends("e")) {
            size_t st = w.size() - 1;
            size_t m = measure(st);
            if (m > 1 || (m == 1 && !cvc(st))) w.resize(st);
        }
        if (double_cons(w.size()) && w.back() == 'l' && measure(w.size()) > 1)
            w.resize(w.size() - 1);
    }
};

}  // namespace

std::string porter_stem(std::string word) {
    if (word.size() <= 2) return word;
    Stemmer s{std::move(word)};
    s.step1a();
    s.step1b();
    s.step1c();
    s.step2();
    s.step3();
    s.step4();
    s.step5();
    return std::move(s.w);
}

std::vector<std::string> extract_keywords(std::string_view text, bool stem) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) return;
        std::string kw = stem ? porter_stem(cur) : cur;
        if (seen.insert(kw).second) out.push_back(std::move(kw));
        cur.clear();
    };
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

std::vector<Pair> parse_documents(std::span<const Document> docs, std::string_view corpus_name,
                                  bool stem) {
    std::vector<Pair> out;
    for (const auto& doc : docs) {
        DocId id = doc_id(corpus_name, doc.key);
        for (auto& kw : extract_keywords(doc.text, stem)) out.push_back({std::move(kw), id});
    }
    return out;
}

std::vector<Document> generate_zipf(const ZipfSpec& spec) {
    if (spec.keywords == 0 || spec.docs == 0) throw std::invalid_argument("empty corpus spec");
    if (spec.min_keywords_per_doc == 0 || spec.min_keywords_per_doc > spec.max_keywords_per_doc)
        throw std::invalid_argument("bad keywords-per-doc range");

    auto rng = crypto::DeterministicRng::from_seed(spec.seed, "zipf-corpus");

    std::vector<double> cdf(spec.keywords);
    double acc = 0;
    for (size_t i = 0; i < spec.keywords; ++i) {
        acc += 1.0 / std::pow(static_cast<double>(i + 1), spec.exponent);
        cdf[i] = acc;
    }
    for (auto& v : cdf) v /= acc;

    auto name = [&](size_t i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "kw%03zu", i);
        return std::string(buf);
    };
    auto sample = [&]() -> size_t {
        double u = rng.uniform01();
        return std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
    };

    std::vector<Document> docs(spec.docs);
    std::vector<bool> used(spec.keywords, false);
    for (size_t d = 0; d < spec.docs; ++d) {
        size_t want = spec.min_keywords_per_doc +
                      rng.uniform(spec.max_keywords_per_doc - spec.min_keywords_per_doc + 1);
        want = std::min(want, spec.keywords);
        std::unordered_set<size_t> picked;
        std::vector<size_t> order;
        size_t attempts = 0;
        while (picked.size() < want && attempts < want * 64) {
            size_t k = sample();
            if (picked.insert(k).second) {
                used[k] = true;
                order.push_back(k);
            }
            ++attempts;
        }
        std::string text;
        for (size_t k : order) {
            if (!text.empty()) text.push_back(' ');
            text += name(k);
        }
        char key[24];
        std::snprintf(key, sizeof(key), "doc%06zu", d);
        docs[d] = {key, std::move(text)};
    }

    if (spec.ensure_coverage) {
        for (size_t k = 0; k < spec.keywords; ++k) {
            if (used[k]) continue;
            for (int rep = 0; rep < 2; ++rep) {
                auto& doc = docs[rng.uniform(docs.size())];
                doc.text.push_back(' ');
                doc.text += name(k);
            }
        }
    }
    return docs;
}

std::vector<Document> load_jsonl(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open corpus file " + file.string());
    std::vector<Document> docs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        docs.push_back({j.at("id").get<std::string>(), j.at("text").get<std::string>()});
    }
    return docs;
}

void save_jsonl(const std::filesystem::path& file, std::span<const Document> docs) {
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write corpus file " + file.string());
    for (const auto& d : docs) {
        json j{{"id", d.key}, {"text", d.text}};
        out << j.dump() << '\n';
    }
}

std::vector<Document> load_directory(const std::filesystem::path& dir) {
    std::vector<Document> docs;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".txt")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        std::ifstream in(f);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        docs.push_back({f.filename().string(), std::move(text)});
    }
    return docs;
}

}  // namespace veil::corpus
