#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "topicbp/common.hpp"
#include "topicbp/corpus.hpp"
#include "topicbp/numeric.hpp"
#include "topicbp/rng.hpp"

namespace topicbp {

struct Hyperparams {
    int32_t num_topics = 10;  // K
    double alpha = 0.01;
    double beta = 0.01;
    double xi = 0.15;          // link-message blend weight (RTM only)
    double lambda = 1e-5;      // message-delta convergence threshold
    int32_t max_iters = 1000;  // T
    uint64_t seed = 0;

    void validate() const {
        if (num_topics < 1) throw ConfigError("K must be at least 1");
        if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
        if (!(beta > 0.0)) throw ConfigError("beta must be positive");
        if (!(xi >= 0.0 && xi <= 1.0)) throw ConfigError("xi must lie in [0, 1]");
        if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
        if (max_iters < 1) throw ConfigError("max-iters must be at least 1");
    }
};

enum class Schedule { synchronous, asynchronous };

// One normalized K-vector per nonzero corpus entry (or per word token, for
// the token-level learners). Row-major, contiguous.
class MessageState {
public:
    MessageState() = default;
    MessageState(int64_t rows, int32_t num_topics)
        : rows_(rows), num_topics_(num_topics),
          data_(static_cast<size_t>(rows) * static_cast<size_t>(num_topics), 0.0) {}

    int64_t rows() const { return rows_; }
    int32_t num_topics() const { return num_topics_; }
    std::span<double> row(int64_t i) {
        return std::span<double>(data_).subspan(static_cast<size_t>(i) * num_topics_, static_cast<size_t>(num_topics_));
    }
    std::span<const double> row(int64_t i) const {
        return std::span<const double>(data_).subspan(static_cast<size_t>(i) * num_topics_,
                                                      static_cast<size_t>(num_topics_));
    }
    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

private:
    int64_t rows_ = 0;
    int32_t num_topics_ = 0;
    std::vector<double> data_;
};

// Full-sum topic aggregates kept consistent with a MessageState. The -w,-d
// exclusions of the update rules are applied at read time by subtracting the
// current entry's own contribution.
struct CountCache {
    int32_t num_docs = 0;
    int32_t vocab_size = 0;
    int32_t num_topics = 0;
    std::vector<double> doc_topic;    // D x K
    std::vector<double> word_topic;   // W x K
    std::vector<double> topic_total;  // K

    CountCache() = default;
    CountCache(int32_t d, int32_t w, int32_t k)
        : num_docs(d), vocab_size(w), num_topics(k),
          doc_topic(static_cast<size_t>(d) * k, 0.0),
          word_topic(static_cast<size_t>(w) * k, 0.0),
          topic_total(static_cast<size_t>(k), 0.0) {}

    std::span<double> doc_row(int32_t d) {
        return std::span<double>(doc_topic).subspan(static_cast<size_t>(d) * num_topics, static_cast<size_t>(num_topics));
    }
    std::span<const double> doc_row(int32_t d) const {
        return std::span<const double>(doc_topic).subspan(static_cast<size_t>(d) * num_topics,
                                                          static_cast<size_t>(num_topics));
    }
    std::span<double> word_row(int32_t w) {
        return std::span<double>(word_topic).subspan(static_cast<size_t>(w) * num_topics,
                                                     static_cast<size_t>(num_topics));
    }
    std::span<const double> word_row(int32_t w) const {
        return std::span<const double>(word_topic).subspan(static_cast<size_t>(w) * num_topics,
                                                           static_cast<size_t>(num_topics));
    }
};

// Per-entry K independent uniforms on (0,1), normalized. Deterministic for a
// given seed; the stream is consumed in ascending entry order.
inline MessageState init_messages(const BagOfWords& bow, int32_t num_topics, uint64_t seed) {
    MessageState msgs(bow.num_entries(), num_topics);
    Rng rng(seed);
    for (int64_t i = 0; i < msgs.rows(); ++i) {
        auto row = msgs.row(i);
        double sum = 0.0;
        for (double& v : row) {
            v = rng.uniform01();
            sum += v;
        }
        const double inv = 1.0 / sum;
        for (double& v : row) v *= inv;
    }
    return msgs;
}

// Masked variant for L-LDA: the same uniform stream is drawn, then disallowed
// topics are zeroed and the allowed block renormalized, so masked and
// unmasked runs stay seed-aligned.
inline MessageState init_messages_masked(const BagOfWords& bow, int32_t num_topics, uint64_t seed,
                                         std::span<const std::vector<int32_t>> allowed_by_doc) {
    MessageState msgs = init_messages(bow, num_topics, seed);
    for (int64_t i = 0; i < msgs.rows(); ++i) {
        const auto& allowed = allowed_by_doc[static_cast<size_t>(bow.entry(i).doc)];
        floor_and_normalize_masked(msgs.row(i), allowed);
    }
    return msgs;
}

// Definitional sums over the message state, accumulated in ascending entry
// order; topic_total is then summed over words in ascending word order.
inline CountCache rebuild_counts(const BagOfWords& bow, const MessageState& msgs) {
    CountCache cache(bow.num_docs(), bow.vocab_size(), msgs.num_topics());
    const int32_t k_count = msgs.num_topics();
    for (int64_t i = 0; i < bow.num_entries(); ++i) {
        const Entry& e = bow.entry(i);
        const auto msg = msgs.row(i);
        auto dt = cache.doc_row(e.doc);
        auto wt = cache.word_row(e.word);
        for (int32_t k = 0; k < k_count; ++k) {
            const double v = e.weight * msg[static_cast<size_t>(k)];
            dt[static_cast<size_t>(k)] += v;
            wt[static_cast<size_t>(k)] += v;
        }
    }
    for (int32_t w = 0; w < bow.vocab_size(); ++w) {
        const auto wt = cache.word_row(w);
        for (int32_t k = 0; k < k_count; ++k) cache.topic_total[static_cast<size_t>(k)] += wt[static_cast<size_t>(k)];
    }
    return cache;
}

namespace detail {

// Cheap consistency probe: the first nonempty document's aggregate must sum
// to N_d. Catches caches that drifted from their message state.
inline void spot_check_cache(const BagOfWords& bow, const CountCache& cache) {
    for (int32_t d = 0; d < bow.num_docs(); ++d) {
        if (bow.doc_begin(d) == bow.doc_end(d)) continue;
        double sum = 0.0;
        for (double v : cache.doc_row(d)) sum += v;
        const double expected = bow.doc_tokens(d);
        if (std::abs(sum - expected) > 1e-6 * std::max(1.0, expected))
            throw std::logic_error("count cache inconsistent with message state");
        return;
    }
}

}  // namespace detail

// Synchronous sweep: every new message is computed from the iteration-start
// cache into `scratch`, then messages are swapped in and the cache rebuilt
// once. Returns the max absolute per-component message change.
//
// Rule signature: rule(entry_index, entry, cache, own_message, out_message);
// the rule writes a final (floored, normalized) message into out_message.
template <typename Rule>
double sweep_synchronous(const BagOfWords& bow, MessageState& msgs, MessageState& scratch, CountCache& cache,
                         Rule&& rule) {
    detail::spot_check_cache(bow, cache);
    const int32_t k_count = msgs.num_topics();
    double max_delta = 0.0;
    for (int64_t i = 0; i < bow.num_entries(); ++i) {
        const Entry& e = bow.entry(i);
        const auto own = msgs.row(i);
        auto out = scratch.row(i);
        rule(i, e, cache, own, out);
        for (int32_t k = 0; k < k_count; ++k) {
            const double d = std::abs(out[static_cast<size_t>(k)] - own[static_cast<size_t>(k)]);
            if (d > max_delta) max_delta = d;
        }
    }
    std::swap(msgs.data(), scratch.data());
    cache = rebuild_counts(bow, msgs);
    return max_delta;
}

// Asynchronous sweep: entries are visited in ascending (doc, word) order and
// the cache is updated immediately after each entry (subtract the old
// contribution, add the new one).
template <typename Rule>
double sweep_asynchronous(const BagOfWords& bow, MessageState& msgs, CountCache& cache, Rule&& rule) {
    detail::spot_check_cache(bow, cache);
    const int32_t k_count = msgs.num_topics();
    std::vector<double> fresh(static_cast<size_t>(k_count));
    double max_delta = 0.0;
    for (int64_t i = 0; i < bow.num_entries(); ++i) {
        const Entry& e = bow.entry(i);
        auto own = msgs.row(i);
        rule(i, e, cache, own, std::span<double>(fresh));
        auto dt = cache.doc_row(e.doc);
        auto wt = cache.word_row(e.word);
        for (int32_t k = 0; k < k_count; ++k) {
            const size_t ks = static_cast<size_t>(k);
            const double old_part = e.weight * own[ks];
            const double new_part = e.weight * fresh[ks];
            dt[ks] = dt[ks] - old_part + new_part;
            wt[ks] = wt[ks] - old_part + new_part;
            cache.topic_total[ks] = cache.topic_total[ks] - old_part + new_part;
            const double d = std::abs(fresh[ks] - own[ks]);
            if (d > max_delta) max_delta = d;
            own[ks] = fresh[ks];
        }
    }
    return max_delta;
}

template <typename Rule>
double sweep(const BagOfWords& bow, MessageState& msgs, MessageState& scratch, CountCache& cache, Rule&& rule,
             Schedule schedule) {
    if (schedule == Schedule::synchronous) return sweep_synchronous(bow, msgs, scratch, cache, rule);
    return sweep_asynchronous(bow, msgs, cache, rule);
}

// Per-iteration training record.
struct IterationStats {
    int32_t iteration = 0;       // 1-based
    double perplexity = 0.0;     // training perplexity after this iteration
    double max_delta = 0.0;      // max message change during this iteration
    double seconds = 0.0;        // wall time of this iteration
};

// Stops when successive training perplexities differ by less than one, when
// the message delta drops below lambda, or when the iteration budget is
// exhausted.
inline bool has_converged(std::span<const IterationStats> history, const Hyperparams& hp) {
    if (history.empty()) return false;
    const IterationStats& last = history.back();
    if (last.iteration >= hp.max_iters) return true;
    if (last.max_delta < hp.lambda) return true;
    if (history.size() >= 2) {
        const double prev = history[history.size() - 2].perplexity;
        if (std::abs(last.perplexity - prev) < 1.0) return true;
    }
    return false;
}

}  // namespace topicbp
