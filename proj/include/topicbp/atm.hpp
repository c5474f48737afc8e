#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "topicbp/corpus.hpp"
#include "topicbp/engine.hpp"
#include "topicbp/lda.hpp"
#include "topicbp/numeric.hpp"
#include "topicbp/rng.hpp"

namespace topicbp {

// Per nonzero entry (w,d), an |a_d| x K block normalized over all (author,
// topic) combinations. Blocks are stored flat with per-entry offsets.
class AuthorMessageState {
public:
    AuthorMessageState(const BagOfWords& bow, std::span<const std::vector<int32_t>> authors, int32_t num_topics)
        : num_topics_(num_topics) {
        offsets_.assign(static_cast<size_t>(bow.num_entries()) + 1, 0);
        for (int64_t i = 0; i < bow.num_entries(); ++i) {
            const auto& a_d = authors[static_cast<size_t>(bow.entry(i).doc)];
            offsets_[static_cast<size_t>(i) + 1] =
                offsets_[static_cast<size_t>(i)] + static_cast<int64_t>(a_d.size()) * num_topics;
        }
        data_.assign(static_cast<size_t>(offsets_.back()), 0.0);
    }

    int32_t num_topics() const { return num_topics_; }
    int32_t block_authors(int64_t i) const {
        return static_cast<int32_t>((offsets_[static_cast<size_t>(i) + 1] - offsets_[static_cast<size_t>(i)]) /
                                    num_topics_);
    }
    std::span<double> block(int64_t i) {
        return std::span<double>(data_).subspan(static_cast<size_t>(offsets_[static_cast<size_t>(i)]),
                                                static_cast<size_t>(offsets_[static_cast<size_t>(i) + 1] -
                                                                    offsets_[static_cast<size_t>(i)]));
    }
    std::span<const double> block(int64_t i) const {
        return std::span<const double>(data_).subspan(static_cast<size_t>(offsets_[static_cast<size_t>(i)]),
                                                      static_cast<size_t>(offsets_[static_cast<size_t>(i) + 1] -
                                                                          offsets_[static_cast<size_t>(i)]));
    }
    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

private:
    int32_t num_topics_;
    std::vector<int64_t> offsets_;
    std::vector<double> data_;
};

// Author aggregates plus the LDA-side caches built from marginalized word
// messages.
struct AtmCaches {
    std::vector<double> author_topic;  // A x K
    CountCache lda;                    // doc_topic / word_topic / topic_total
    int32_t num_authors = 0;

    std::span<double> author_row(int32_t a) {
        return std::span<double>(author_topic).subspan(static_cast<size_t>(a) * lda.num_topics,
                                                       static_cast<size_t>(lda.num_topics));
    }
    std::span<const double> author_row(int32_t a) const {
        return std::span<const double>(author_topic).subspan(static_cast<size_t>(a) * lda.num_topics,
                                                             static_cast<size_t>(lda.num_topics));
    }
};

// mu_{w,d}(k) = sum over the document's authors of mu^a_{w,d}(k).
inline void marginalize_word_message(std::span<const double> block, int32_t num_topics, std::span<double> out) {
    for (int32_t k = 0; k < num_topics; ++k) out[static_cast<size_t>(k)] = 0.0;
    const int32_t n_auth = static_cast<int32_t>(block.size()) / num_topics;
    for (int32_t a = 0; a < n_auth; ++a)
        for (int32_t k = 0; k < num_topics; ++k)
            out[static_cast<size_t>(k)] += block[static_cast<size_t>(a) * num_topics + static_cast<size_t>(k)];
}

// Same draw sequence as the LDA initializer: K uniforms per (author, topic)
// block row, normalized over the whole block, so a one-author-per-document
// corpus initializes exactly like LDA under the same seed.
inline AuthorMessageState init_author_messages(const BagOfWords& bow,
                                               std::span<const std::vector<int32_t>> authors, int32_t num_topics,
                                               uint64_t seed) {
    AuthorMessageState msgs(bow, authors, num_topics);
    Rng rng(seed);
    for (int64_t i = 0; i < bow.num_entries(); ++i) {
        auto block = msgs.block(i);
        double sum = 0.0;
        for (double& v : block) {
            v = rng.uniform01();
            sum += v;
        }
        const double inv = 1.0 / sum;
        for (double& v : block) v *= inv;
    }
    return msgs;
}

inline AtmCaches rebuild_author_counts(const BagOfWords& bow, std::span<const std::vector<int32_t>> authors,
                                       int32_t num_authors, const AuthorMessageState& msgs) {
    AtmCaches caches;
    caches.num_authors = num_authors;
    caches.lda = CountCache(bow.num_docs(), bow.vocab_size(), msgs.num_topics());
    caches.author_topic.assign(static_cast<size_t>(num_authors) * msgs.num_topics(), 0.0);
    const int32_t k_count = msgs.num_topics();
    std::vector<double> marg(static_cast<size_t>(k_count));
    for (int64_t i = 0; i < bow.num_entries(); ++i) {
        const Entry& e = bow.entry(i);
        const auto block = msgs.block(i);
        const auto& a_d = authors[static_cast<size_t>(e.doc)];
        for (size_t a = 0; a < a_d.size(); ++a) {
            auto at = caches.author_row(a_d[a]);
            for (int32_t k = 0; k < k_count; ++k)
                at[static_cast<size_t>(k)] += e.weight * block[a * static_cast<size_t>(k_count) + static_cast<size_t>(k)];
        }
        marginalize_word_message(block, k_count, marg);
        auto dt = caches.lda.doc_row(e.doc);
        auto wt = caches.lda.word_row(e.word);
        for (int32_t k = 0; k < k_count; ++k) {
            const double v = e.weight * marg[static_cast<size_t>(k)];
            dt[static_cast<size_t>(k)] += v;
            wt[static_cast<size_t>(k)] += v;
        }
    }
    for (int32_t w = 0; w < bow.vocab_size(); ++w) {
        const auto wt = caches.lda.word_row(w);
        for (int32_t k = 0; k < k_count; ++k)
            caches.lda.topic_total[static_cast<size_t>(k)] += wt[static_cast<size_t>(k)];
    }
    return caches;
}

// ATM message update for one entry: per-author theta factors (own entry
// contribution excluded) times the shared phi factor computed from the
// marginalized word message, normalized over all (author, topic) pairs.
inline void atm_message(const Entry& e, std::span<const int32_t> a_d, const AtmCaches& caches,
                        std::span<const double> own_block, const Hyperparams& hp, double wbeta,
                        std::span<double> marg, std::span<double> phi_fac, std::span<double> out_block) {
    const int32_t k_count = caches.lda.num_topics;
    marginalize_word_message(own_block, k_count, marg);
    const auto dt = caches.lda.doc_row(e.doc);
    const auto wt = caches.lda.word_row(e.word);
    for (int32_t k = 0; k < k_count; ++k) {
        const size_t ks = static_cast<size_t>(k);
        phi_fac[ks] = (wt[ks] - e.weight * marg[ks] + hp.beta) /
                      (caches.lda.topic_total[ks] - dt[ks] + wbeta);
    }
    for (size_t a = 0; a < a_d.size(); ++a) {
        const auto at = caches.author_row(a_d[a]);
        const auto own = own_block.subspan(a * static_cast<size_t>(k_count), static_cast<size_t>(k_count));
        auto out = out_block.subspan(a * static_cast<size_t>(k_count), static_cast<size_t>(k_count));
        double sa = 0.0;
        for (int32_t k = 0; k < k_count; ++k) {
            const size_t ks = static_cast<size_t>(k);
            const double v = at[ks] - e.weight * own[ks] + hp.alpha;
            out[ks] = v;
            sa += v;
        }
        const double inv_sa = 1.0 / sa;
        for (int32_t k = 0; k < k_count; ++k) {
            const size_t ks = static_cast<size_t>(k);
            out[ks] = out[ks] * inv_sa * phi_fac[ks];
        }
    }
    floor_and_normalize(out_block);
}

// theta_a(k) = (author_topic[a][k]+alpha) / sum_k(...).
inline std::vector<double> estimate_theta_author(const AtmCaches& caches, const Hyperparams& hp) {
    const int32_t k_count = caches.lda.num_topics;
    std::vector<double> theta(static_cast<size_t>(caches.num_authors) * k_count, 0.0);
    for (int32_t a = 0; a < caches.num_authors; ++a) {
        const auto at = caches.author_row(a);
        auto out = std::span<double>(theta).subspan(static_cast<size_t>(a) * k_count, static_cast<size_t>(k_count));
        double sum = 0.0;
        for (int32_t k = 0; k < k_count; ++k) sum += at[static_cast<size_t>(k)] + hp.alpha;
        for (int32_t k = 0; k < k_count; ++k) out[static_cast<size_t>(k)] = (at[static_cast<size_t>(k)] + hp.alpha) / sum;
    }
    return theta;
}

struct AtmResult {
    std::vector<double> theta_author;  // A x K
    ModelParams params;                // document-level theta plus phi
    std::vector<IterationStats> history;
    int32_t iterations = 0;
    bool converged = false;
};

namespace detail {

inline double atm_sweep(const BagOfWords& bow, std::span<const std::vector<int32_t>> authors,
                        AuthorMessageState& msgs, AuthorMessageState& scratch, AtmCaches& caches,
                        const Hyperparams& hp, Schedule schedule) {
    const int32_t k_count = msgs.num_topics();
    const double wbeta = static_cast<double>(bow.vocab_size()) * hp.beta;
    std::vector<double> marg(static_cast<size_t>(k_count)), phi_fac(static_cast<size_t>(k_count));
    std::vector<double> marg_new(static_cast<size_t>(k_count));
    double max_delta = 0.0;
    if (schedule == Schedule::synchronous) {
        for (int64_t i = 0; i < bow.num_entries(); ++i) {
            const Entry& e = bow.entry(i);
            const auto own = msgs.block(i);
            auto out = scratch.block(i);
            atm_message(e, authors[static_cast<size_t>(e.doc)], caches, own, hp, wbeta, marg, phi_fac, out);
            for (size_t j = 0; j < own.size(); ++j) {
                const double d = std::abs(out[j] - own[j]);
                if (d > max_delta) max_delta = d;
            }
        }
        std::swap(msgs.data(), scratch.data());
        caches = rebuild_author_counts(bow, authors, caches.num_authors, msgs);
        return max_delta;
    }
    std::vector<double> fresh;
    for (int64_t i = 0; i < bow.num_entries(); ++i) {
        const Entry& e = bow.entry(i);
        auto own = msgs.block(i);
        fresh.resize(own.size());
        const auto& a_d = authors[static_cast<size_t>(e.doc)];
        atm_message(e, a_d, caches, own, hp, wbeta, marg, phi_fac, std::span<double>(fresh));
        marginalize_word_message(own, k_count, marg);
        marginalize_word_message(fresh, k_count, marg_new);
        for (size_t a = 0; a < a_d.size(); ++a) {
            auto at = caches.author_row(a_d[a]);
            for (int32_t k = 0; k < k_count; ++k) {
                const size_t j = a * static_cast<size_t>(k_count) + static_cast<size_t>(k);
                at[static_cast<size_t>(k)] = at[static_cast<size_t>(k)] - e.weight * own[j] + e.weight * fresh[j];
            }
        }
        auto dt = caches.lda.doc_row(e.doc);
        auto wt = caches.lda.word_row(e.word);
        for (int32_t k = 0; k < k_count; ++k) {
            const size_t ks = static_cast<size_t>(k);
            const double old_part = e.weight * marg[ks];
            const double new_part = e.weight * marg_new[ks];
            dt[ks] = dt[ks] - old_part + new_part;
            wt[ks] = wt[ks] - old_part + new_part;
            caches.lda.topic_total[ks] = caches.lda.topic_total[ks] - old_part + new_part;
        }
        for (size_t j = 0; j < own.size(); ++j) {
            const double d = std::abs(fresh[j] - own[j]);
            if (d > max_delta) max_delta = d;
            own[j] = fresh[j];
        }
    }
    return max_delta;
}

}  // namespace detail

// BP training for the author-topic model. Requires author lists covering
// every document.
inline AtmResult train_atm(const BagOfWords& bow, const SideData& side, const Hyperparams& hp,
                           const TrainOptions& opts = {}) {
    hp.validate();
    if (!side.authors.has_value()) throw ConfigError("atm requires author metadata");
    if (side.num_authors < 1) throw ConfigError("atm requires at least one author");
    const auto& authors = *side.authors;
    for (int32_t d = 0; d < bow.num_docs(); ++d)
        if (authors[static_cast<size_t>(d)].empty())
            throw ConfigError("atm: document " + std::to_string(d) + " has no authors");

    AuthorMessageState msgs =
        init_author_messages(bow, authors, hp.num_topics, derive_seed(hp.seed, SeedTag::message_init));
    AuthorMessageState scratch(bow, authors, hp.num_topics);
    AtmCaches caches = rebuild_author_counts(bow, authors, side.num_authors, msgs);

    AtmResult result;
    std::vector<IterationStats>& history = result.history;
    for (int32_t t = 1; t <= hp.max_iters; ++t) {
        const auto t0 = std::chrono::steady_clock::now();
        const double delta = detail::atm_sweep(bow, authors, msgs, scratch, caches, hp, opts.schedule);
        result.params.num_topics = hp.num_topics;
        result.params.theta = estimate_theta(caches.lda, hp);
        result.params.phi = estimate_phi(caches.lda, hp);
        const double perp = training_perplexity(bow, result.params);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        history.push_back({t, perp, delta, secs});
        result.iterations = t;
        if (!opts.run_to_max && has_converged(history, hp)) break;
    }
    result.converged = detail::stop_criterion_met(history, hp);
    result.theta_author = estimate_theta_author(caches, hp);
    return result;
}

}  // namespace topicbp
