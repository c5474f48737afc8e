#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "topicbp/corpus.hpp"
#include "topicbp/engine.hpp"
#include "topicbp/lda.hpp"
#include "topicbp/numeric.hpp"

namespace topicbp {

// Row-stochastic K x K table: f[k][k'] is the likelihood of topic k in a
// document whose linked document carries topic k'.
struct LinkFactor {
    int32_t num_topics = 0;
    std::vector<double> f;  // K x K row-major

    std::span<double> row(int32_t k) {
        return std::span<double>(f).subspan(static_cast<size_t>(k) * num_topics, static_cast<size_t>(num_topics));
    }
    std::span<const double> row(int32_t k) const {
        return std::span<const double>(f).subspan(static_cast<size_t>(k) * num_topics,
                                                  static_cast<size_t>(num_topics));
    }
};

// Accumulates doc_topic outer products over both orientations of every
// undirected link, then normalizes each row over k'.
inline LinkFactor build_link_factor(const CountCache& cache,
                                    std::span<const std::pair<int32_t, int32_t>> links) {
    if (links.empty()) throw ConfigError("link factor undefined without links; use xi = 0");
    const int32_t k_count = cache.num_topics;
    LinkFactor factor;
    factor.num_topics = k_count;
    factor.f.assign(static_cast<size_t>(k_count) * k_count, 0.0);
    for (const auto& [d1, d2] : links) {
        const auto a = cache.doc_row(d1);
        const auto b = cache.doc_row(d2);
        for (int32_t k = 0; k < k_count; ++k) {
            auto row = factor.row(k);
            const double ak = a[static_cast<size_t>(k)];
            const double bk = b[static_cast<size_t>(k)];
            for (int32_t k2 = 0; k2 < k_count; ++k2)
                row[static_cast<size_t>(k2)] += ak * b[static_cast<size_t>(k2)] + bk * a[static_cast<size_t>(k2)];
        }
    }
    for (int32_t k = 0; k < k_count; ++k) {
        auto row = factor.row(k);
        double sum = 0.0;
        for (double v : row) sum += v;
        if (sum > 0.0) {
            const double inv = 1.0 / sum;
            for (double& v : row) v *= inv;
        } else {
            // degenerate aggregates (e.g. all-empty documents)
            for (double& v : row) v = 1.0 / static_cast<double>(k_count);
        }
    }
    return factor;
}

// Message from the link factors into document d:
// out[k] = sum over linked d' and k' of f[k][k'] * doc_topic[d'][k'].
// Documents without links receive the zero vector.
inline void link_message(int32_t d, const LinkFactor& factor, const CountCache& cache,
                         std::span<const std::vector<int32_t>> neighbors, std::span<double> out,
                         std::span<double> scratch) {
    const int32_t k_count = cache.num_topics;
    for (int32_t k = 0; k < k_count; ++k) scratch[static_cast<size_t>(k)] = 0.0;
    for (int32_t d2 : neighbors[static_cast<size_t>(d)]) {
        const auto dt = cache.doc_row(d2);
        for (int32_t k = 0; k < k_count; ++k) scratch[static_cast<size_t>(k)] += dt[static_cast<size_t>(k)];
    }
    for (int32_t k = 0; k < k_count; ++k) {
        const auto row = factor.row(k);
        double v = 0.0;
        for (int32_t k2 = 0; k2 < k_count; ++k2) v += row[static_cast<size_t>(k2)] * scratch[static_cast<size_t>(k2)];
        out[static_cast<size_t>(k)] = v;
    }
}

// Weighted blend of the theta-side and (normalized) link messages, times the
// phi-side factor. With xi = 0 this is exactly the plain BP update.
inline void rtm_message(std::span<const double> theta_fac, std::span<const double> link_msg_normalized, double xi,
                        std::span<const double> phi_fac, std::span<double> out) {
    for (size_t k = 0; k < out.size(); ++k)
        out[k] = ((1.0 - xi) * theta_fac[k] + xi * link_msg_normalized[k]) * phi_fac[k];
    floor_and_normalize(out);
}

struct RtmResult {
    ModelParams params;
    LinkFactor factor;  // empty (num_topics 0) when xi = 0
    std::vector<IterationStats> history;
    int32_t iterations = 0;
    bool converged = false;
};

// BP training for the relational topic model. The link factor is rebuilt
// once per iteration from the current document aggregates; per-document link
// messages are normalized to sum one before blending so xi weighs comparable
// quantities.
inline RtmResult train_rtm(const BagOfWords& bow, const SideData& side, const Hyperparams& hp,
                           const TrainOptions& opts = {}) {
    hp.validate();
    if (hp.xi == 0.0) {
        // exact reduction to LDA-BP
        TrainResult lda = train_bp_like(bow, hp, Algo::bp, opts);
        RtmResult result;
        result.params = std::move(lda.params);
        result.history = std::move(lda.history);
        result.iterations = lda.iterations;
        result.converged = lda.converged;
        return result;
    }
    if (!side.links.has_value() || side.links->empty())
        throw ConfigError("rtm with xi > 0 requires link metadata");
    const auto& links = *side.links;

    std::vector<std::vector<int32_t>> neighbors(static_cast<size_t>(bow.num_docs()));
    for (const auto& [d1, d2] : links) {
        neighbors[static_cast<size_t>(d1)].push_back(d2);
        neighbors[static_cast<size_t>(d2)].push_back(d1);
    }

    const int32_t k_count = hp.num_topics;
    const double wbeta = static_cast<double>(bow.vocab_size()) * hp.beta;
    MessageState msgs;
    if (opts.initial_messages != nullptr) {
        if (opts.initial_messages->rows() != bow.num_entries() || opts.initial_messages->num_topics() != k_count)
            throw ConfigError("initial message state has the wrong shape");
        msgs = *opts.initial_messages;
    } else {
        msgs = init_messages(bow, k_count, derive_seed(hp.seed, SeedTag::message_init));
    }
    MessageState scratch(bow.num_entries(), k_count);
    CountCache cache = rebuild_counts(bow, msgs);

    LinkFactor factor;
    std::vector<double> tf(static_cast<size_t>(k_count)), pf(static_cast<size_t>(k_count));
    std::vector<double> lm(static_cast<size_t>(k_count)), lm_scratch(static_cast<size_t>(k_count));
    int32_t current_doc = -1;
    // The link message is refreshed at the first entry of each document; under
    // the synchronous schedule the cache is frozen for the whole sweep, so
    // this is exact, and under the asynchronous one it tracks the live cache
    // at document granularity.
    auto rule = [&](int64_t, const Entry& e, const CountCache& c, std::span<const double> own,
                    std::span<double> out) {
        if (e.doc != current_doc) {
            link_message(e.doc, factor, c, neighbors, lm, lm_scratch);
            double sum = 0.0;
            for (double v : lm) sum += v;
            if (sum > 0.0) {
                const double inv = 1.0 / sum;
                for (double& v : lm) v *= inv;
            }
            current_doc = e.doc;
        }
        bp_factors(c.doc_row(e.doc), c.word_row(e.word), c.topic_total, own, e.weight, hp.alpha, hp.beta, wbeta,
                   tf, pf);
        rtm_message(tf, lm, hp.xi, pf, out);
    };

    RtmResult result;
    for (int32_t t = 1; t <= hp.max_iters; ++t) {
        const auto t0 = std::chrono::steady_clock::now();
        factor = build_link_factor(cache, links);
        current_doc = -1;
        const double delta = sweep(bow, msgs, scratch, cache, rule, opts.schedule);
        result.params.num_topics = k_count;
        result.params.theta = estimate_theta(cache, hp);
        result.params.phi = estimate_phi(cache, hp);
        const double perp = training_perplexity(bow, result.params);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back({t, perp, delta, secs});
        result.iterations = t;
        if (!opts.run_to_max && has_converged(result.history, hp)) break;
    }
    result.converged = detail::stop_criterion_met(result.history, hp);
    result.factor = build_link_factor(cache, links);
    return result;
}

}  // namespace topicbp
