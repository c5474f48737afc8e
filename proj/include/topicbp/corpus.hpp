#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "topicbp/common.hpp"

namespace topicbp {

// One nonzero cell of the document-word matrix.
struct Entry {
    int32_t doc = 0;
    int32_t word = 0;
    double weight = 0.0;
};

enum class WeightingScheme { raw_count, tf, tf_idf };

// Sparse document-word matrix with two iteration views: entries are stored
// sorted by (doc, word), so each document is a contiguous slice, and a
// CSC-style index groups entry ids by word. Immutable after construction.
class BagOfWords {
public:
    BagOfWords(int32_t num_docs, int32_t vocab_size, std::vector<Entry> entries)
        : num_docs_(num_docs), vocab_size_(vocab_size), entries_(std::move(entries)) {
        if (num_docs_ <= 0) throw IoError("corpus: number of documents must be positive");
        if (vocab_size_ <= 0) throw IoError("corpus: vocabulary size must be positive");
        std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
            return a.doc != b.doc ? a.doc < b.doc : a.word < b.word;
        });
        for (size_t i = 0; i < entries_.size(); ++i) {
            const Entry& e = entries_[i];
            if (e.doc < 0 || e.doc >= num_docs_)
                throw IoError("corpus: document id " + std::to_string(e.doc) + " out of range");
            if (e.word < 0 || e.word >= vocab_size_)
                throw IoError("corpus: word id " + std::to_string(e.word) + " out of range");
            if (!(e.weight > 0.0))
                throw IoError("corpus: nonpositive weight at document " + std::to_string(e.doc));
            if (i > 0 && entries_[i - 1].doc == e.doc && entries_[i - 1].word == e.word)
                throw IoError("corpus: duplicate entry (" + std::to_string(e.doc) + ", " + std::to_string(e.word) + ")");
        }
        build_views();
    }

    int32_t num_docs() const { return num_docs_; }
    int32_t vocab_size() const { return vocab_size_; }
    int64_t num_entries() const { return static_cast<int64_t>(entries_.size()); }
    std::span<const Entry> entries() const { return entries_; }
    const Entry& entry(int64_t i) const { return entries_[static_cast<size_t>(i)]; }

    int64_t doc_begin(int32_t d) const { return doc_offsets_[static_cast<size_t>(d)]; }
    int64_t doc_end(int32_t d) const { return doc_offsets_[static_cast<size_t>(d) + 1]; }
    std::span<const Entry> doc_entries(int32_t d) const {
        return std::span<const Entry>(entries_).subspan(static_cast<size_t>(doc_begin(d)),
                                                        static_cast<size_t>(doc_end(d) - doc_begin(d)));
    }
    // Entry ids touching word w, ascending.
    std::span<const int64_t> word_entry_ids(int32_t w) const {
        const size_t lo = static_cast<size_t>(word_offsets_[static_cast<size_t>(w)]);
        const size_t hi = static_cast<size_t>(word_offsets_[static_cast<size_t>(w) + 1]);
        return std::span<const int64_t>(by_word_).subspan(lo, hi - lo);
    }

    // N_d: total token weight of document d.
    double doc_tokens(int32_t d) const { return doc_tokens_[static_cast<size_t>(d)]; }
    // W_d: number of distinct words in document d.
    int32_t doc_width(int32_t d) const { return static_cast<int32_t>(doc_end(d) - doc_begin(d)); }
    double total_tokens() const { return total_tokens_; }
    // Documents with no entries are legal but flagged; learners give them the
    // pure-prior topic proportion.
    const std::vector<int32_t>& empty_docs() const { return empty_docs_; }

    bool has_integer_weights() const {
        for (const Entry& e : entries_)
            if (std::floor(e.weight) != e.weight) return false;
        return true;
    }

private:
    void build_views() {
        doc_offsets_.assign(static_cast<size_t>(num_docs_) + 1, 0);
        for (const Entry& e : entries_) ++doc_offsets_[static_cast<size_t>(e.doc) + 1];
        for (size_t d = 0; d < static_cast<size_t>(num_docs_); ++d) doc_offsets_[d + 1] += doc_offsets_[d];

        word_offsets_.assign(static_cast<size_t>(vocab_size_) + 1, 0);
        for (const Entry& e : entries_) ++word_offsets_[static_cast<size_t>(e.word) + 1];
        for (size_t w = 0; w < static_cast<size_t>(vocab_size_); ++w) word_offsets_[w + 1] += word_offsets_[w];
        by_word_.assign(entries_.size(), 0);
        std::vector<int64_t> cursor(word_offsets_.begin(), word_offsets_.end() - 1);
        for (size_t i = 0; i < entries_.size(); ++i)
            by_word_[static_cast<size_t>(cursor[static_cast<size_t>(entries_[i].word)]++)] = static_cast<int64_t>(i);

        doc_tokens_.assign(static_cast<size_t>(num_docs_), 0.0);
        total_tokens_ = 0.0;
        for (const Entry& e : entries_) {
            doc_tokens_[static_cast<size_t>(e.doc)] += e.weight;
            total_tokens_ += e.weight;
        }
        empty_docs_.clear();
        for (int32_t d = 0; d < num_docs_; ++d)
            if (doc_begin(d) == doc_end(d)) empty_docs_.push_back(d);
    }

    int32_t num_docs_;
    int32_t vocab_size_;
    std::vector<Entry> entries_;
    std::vector<int64_t> doc_offsets_;
    std::vector<int64_t> word_offsets_;
    std::vector<int64_t> by_word_;
    std::vector<double> doc_tokens_;
    std::vector<int32_t> empty_docs_;
    double total_tokens_ = 0.0;
};

// Word id -> token string table.
struct Vocabulary {
    std::vector<std::string> tokens;
    int32_t size() const { return static_cast<int32_t>(tokens.size()); }
};

// Optional per-document metadata: author lists, undirected links, label sets.
struct SideData {
    std::optional<std::vector<std::vector<int32_t>>> authors;  // indexed by doc
    int32_t num_authors = 0;                                   // A
    std::optional<std::vector<std::pair<int32_t, int32_t>>> links;  // normalized lo < hi
    std::optional<std::vector<std::vector<int32_t>>> labels;   // indexed by doc, sorted
};

namespace detail {

inline bool blank(const std::string& s) {
    return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

inline int64_t parse_int(const std::string& tok, int line_no, const char* what) {
    size_t pos = 0;
    int64_t v = 0;
    try {
        v = std::stoll(tok, &pos);
    } catch (const std::exception&) {
        throw IoError(std::string("line ") + std::to_string(line_no) + ": malformed " + what + " '" + tok + "'");
    }
    if (pos != tok.size())
        throw IoError(std::string("line ") + std::to_string(line_no) + ": malformed " + what + " '" + tok + "'");
    return v;
}

inline double parse_real(const std::string& tok, int line_no, const char* what) {
    size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &pos);
    } catch (const std::exception&) {
        throw IoError(std::string("line ") + std::to_string(line_no) + ": malformed " + what + " '" + tok + "'");
    }
    if (pos != tok.size())
        throw IoError(std::string("line ") + std::to_string(line_no) + ": malformed " + what + " '" + tok + "'");
    return v;
}

}  // namespace detail

// UCI bag-of-words format: three header lines D, W, NNZ followed by NNZ lines
// "docID wordID count" with 1-based indices. Errors name the offending line.
inline BagOfWords load_uci_bow(std::istream& in) {
    std::string line;
    int line_no = 0;
    auto next_line = [&](const char* what) {
        while (std::getline(in, line)) {
            ++line_no;
            if (!detail::blank(line)) return;
        }
        throw IoError(std::string("unexpected end of corpus stream, expected ") + what);
    };

    next_line("document count");
    const int64_t num_docs = detail::parse_int(detail::split_ws(line).at(0), line_no, "document count");
    next_line("vocabulary size");
    const int64_t vocab_size = detail::parse_int(detail::split_ws(line).at(0), line_no, "vocabulary size");
    next_line("entry count");
    const int64_t nnz = detail::parse_int(detail::split_ws(line).at(0), line_no, "entry count");
    if (num_docs <= 0 || vocab_size <= 0 || nnz < 0)
        throw IoError("line " + std::to_string(line_no) + ": nonpositive corpus header value");

    std::vector<Entry> entries;
    entries.reserve(static_cast<size_t>(nnz));
    std::unordered_set<int64_t> seen;
    seen.reserve(static_cast<size_t>(nnz) * 2);
    for (int64_t i = 0; i < nnz; ++i) {
        next_line("entry line");
        const auto toks = detail::split_ws(line);
        if (toks.size() != 3)
            throw IoError("line " + std::to_string(line_no) + ": expected 'docID wordID count'");
        const int64_t d = detail::parse_int(toks[0], line_no, "document id") - 1;
        const int64_t w = detail::parse_int(toks[1], line_no, "word id") - 1;
        const double x = detail::parse_real(toks[2], line_no, "count");
        if (d < 0 || d >= num_docs)
            throw IoError("line " + std::to_string(line_no) + ": document id out of range");
        if (w < 0 || w >= vocab_size)
            throw IoError("line " + std::to_string(line_no) + ": word id out of range");
        if (!(x > 0.0))
            throw IoError("line " + std::to_string(line_no) + ": nonpositive count");
        const int64_t key = d * vocab_size + w;
        if (!seen.insert(key).second)
            throw IoError("line " + std::to_string(line_no) + ": duplicate entry (" + toks[0] + ", " + toks[1] + ")");
        entries.push_back({static_cast<int32_t>(d), static_cast<int32_t>(w), x});
    }
    while (std::getline(in, line)) {
        ++line_no;
        if (!detail::blank(line))
            throw IoError("line " + std::to_string(line_no) + ": content past declared entry count");
    }
    return BagOfWords(static_cast<int32_t>(num_docs), static_cast<int32_t>(vocab_size), std::move(entries));
}

// Writes the UCI format back out (1-based ids). Loaded raw-count corpora
// round-trip exactly; real weights are written with full precision.
inline void save_uci_bow(const BagOfWords& bow, std::ostream& out) {
    out << bow.num_docs() << "\n" << bow.vocab_size() << "\n" << bow.num_entries() << "\n";
    char buf[64];
    for (const Entry& e : bow.entries()) {
        std::snprintf(buf, sizeof(buf), "%.17g", e.weight);
        out << (e.doc + 1) << " " << (e.word + 1) << " " << buf << "\n";
    }
}

// raw_count is the identity; tf rescales each document to unit weight;
// tf_idf multiplies tf by ln(D / df_w) and drops words present in every
// document (their weight would be exactly zero).
inline BagOfWords apply_weighting(const BagOfWords& bow, WeightingScheme scheme) {
    if (scheme == WeightingScheme::raw_count)
        return BagOfWords(bow.num_docs(), bow.vocab_size(),
                          std::vector<Entry>(bow.entries().begin(), bow.entries().end()));

    std::vector<Entry> out;
    out.reserve(static_cast<size_t>(bow.num_entries()));
    std::vector<int32_t> doc_freq;
    if (scheme == WeightingScheme::tf_idf) {
        doc_freq.assign(static_cast<size_t>(bow.vocab_size()), 0);
        for (const Entry& e : bow.entries()) ++doc_freq[static_cast<size_t>(e.word)];
    }
    const double d_total = static_cast<double>(bow.num_docs());
    for (const Entry& e : bow.entries()) {
        double w = e.weight / bow.doc_tokens(e.doc);
        if (scheme == WeightingScheme::tf_idf) {
            const int32_t df = doc_freq[static_cast<size_t>(e.word)];
            if (df == bow.num_docs()) continue;  // ln(D/df) = 0, prune
            w *= std::log(d_total / static_cast<double>(df));
        }
        out.push_back({e.doc, e.word, w});
    }
    return BagOfWords(bow.num_docs(), bow.vocab_size(), std::move(out));
}

// One token per line; the line number minus one is the word id.
inline Vocabulary load_vocabulary(std::istream& in) {
    Vocabulary vocab;
    std::unordered_set<std::string> seen;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (detail::blank(line))
            throw IoError("vocabulary line " + std::to_string(line_no) + ": empty token");
        if (!seen.insert(line).second)
            throw IoError("vocabulary line " + std::to_string(line_no) + ": duplicate token '" + line + "'");
        vocab.tokens.push_back(line);
    }
    return vocab;
}

namespace detail {

// "docID: id id ..." lines, 0-based; used for both author and label files.
inline std::vector<std::vector<int32_t>> load_doc_id_lists(std::istream& in, int32_t num_docs,
                                                           const char* kind, bool require_cover) {
    std::vector<std::vector<int32_t>> lists(static_cast<size_t>(num_docs));
    std::vector<bool> present(static_cast<size_t>(num_docs), false);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        const size_t colon = line.find(':');
        if (colon == std::string::npos)
            throw IoError(std::string(kind) + " line " + std::to_string(line_no) + ": missing ':'");
        const int64_t d = parse_int(split_ws(line.substr(0, colon)).at(0), line_no, "document id");
        if (d < 0 || d >= num_docs)
            throw IoError(std::string(kind) + " line " + std::to_string(line_no) + ": document id out of range");
        if (present[static_cast<size_t>(d)])
            throw IoError(std::string(kind) + " line " + std::to_string(line_no) + ": duplicate document " + std::to_string(d));
        present[static_cast<size_t>(d)] = true;
        std::vector<int32_t> ids;
        for (const std::string& tok : split_ws(line.substr(colon + 1))) {
            const int64_t id = parse_int(tok, line_no, "id");
            if (id < 0)
                throw IoError(std::string(kind) + " line " + std::to_string(line_no) + ": negative id");
            ids.push_back(static_cast<int32_t>(id));
        }
        if (ids.empty())
            throw IoError(std::string(kind) + " line " + std::to_string(line_no) + ": empty id list");
        std::sort(ids.begin(), ids.end());
        if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
            throw IoError(std::string(kind) + " line " + std::to_string(line_no) + ": repeated id");
        lists[static_cast<size_t>(d)] = std::move(ids);
    }
    if (require_cover) {
        for (int32_t d = 0; d < num_docs; ++d)
            if (!present[static_cast<size_t>(d)])
                throw IoError(std::string(kind) + ": document " + std::to_string(d) + " has no entry");
    }
    return lists;
}

}  // namespace detail

// Authors: "docID: authorID ..." per line, every document covered.
// Links: "docID docID" per line, undirected, no self-links or duplicates.
// Labels: "docID: topicID ..." per line, every document covered.
inline SideData load_side_data(int32_t num_docs, std::istream* authors_in, std::istream* links_in,
                               std::istream* labels_in) {
    SideData side;
    if (authors_in != nullptr) {
        auto lists = detail::load_doc_id_lists(*authors_in, num_docs, "authors", /*require_cover=*/true);
        int32_t max_author = -1;
        for (const auto& l : lists)
            for (int32_t a : l) max_author = std::max(max_author, a);
        side.num_authors = max_author + 1;
        side.authors = std::move(lists);
    }
    if (links_in != nullptr) {
        std::vector<std::pair<int32_t, int32_t>> links;
        std::unordered_set<int64_t> seen;
        std::string line;
        int line_no = 0;
        while (std::getline(*links_in, line)) {
            ++line_no;
            if (detail::blank(line)) continue;
            const auto toks = detail::split_ws(line);
            if (toks.size() != 2)
                throw IoError("links line " + std::to_string(line_no) + ": expected 'docID docID'");
            const int64_t a = detail::parse_int(toks[0], line_no, "document id");
            const int64_t b = detail::parse_int(toks[1], line_no, "document id");
            if (a < 0 || a >= num_docs || b < 0 || b >= num_docs)
                throw IoError("links line " + std::to_string(line_no) + ": document id out of range");
            if (a == b)
                throw IoError("links line " + std::to_string(line_no) + ": self-link " + std::to_string(a));
            const int32_t lo = static_cast<int32_t>(std::min(a, b));
            const int32_t hi = static_cast<int32_t>(std::max(a, b));
            if (!seen.insert(static_cast<int64_t>(lo) * num_docs + hi).second)
                throw IoError("links line " + std::to_string(line_no) + ": duplicate link {" + std::to_string(lo) +
                              ", " + std::to_string(hi) + "}");
            links.emplace_back(lo, hi);
        }
        side.links = std::move(links);
    }
    if (labels_in != nullptr)
        side.labels = detail::load_doc_id_lists(*labels_in, num_docs, "labels", /*require_cover=*/true);
    return side;
}

}  // namespace topicbp
