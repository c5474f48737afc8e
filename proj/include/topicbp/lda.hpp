#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "topicbp/corpus.hpp"
#include "topicbp/engine.hpp"
#include "topicbp/numeric.hpp"
#include "topicbp/rng.hpp"

namespace topicbp {

enum class Algo { bp, sibp, vb, gs, cvb0 };

inline const char* algo_name(Algo a) {
    switch (a) {
        case Algo::bp: return "bp";
        case Algo::sibp: return "sibp";
        case Algo::vb: return "vb";
        case Algo::gs: return "gs";
        case Algo::cvb0: return "cvb0";
    }
    return "?";
}

// Point estimates of the multinomial parameters. theta is D x K (rows sum to
// one), phi is W x K (each topic column sums to one over words).
struct ModelParams {
    int32_t num_topics = 0;
    std::vector<double> theta;
    std::vector<double> phi;

    std::span<const double> theta_row(int32_t d) const {
        return std::span<const double>(theta).subspan(static_cast<size_t>(d) * num_topics,
                                                      static_cast<size_t>(num_topics));
    }
    std::span<const double> phi_row(int32_t w) const {
        return std::span<const double>(phi).subspan(static_cast<size_t>(w) * num_topics,
                                                    static_cast<size_t>(num_topics));
    }
};

// Per-document allowed-topic sets for labeled training.
struct LabelMask {
    std::vector<std::vector<int32_t>> allowed;  // indexed by doc, sorted

    void validate(int32_t num_docs, int32_t num_topics) const {
        if (static_cast<int32_t>(allowed.size()) != num_docs)
            throw ConfigError("label mask must cover every document");
        for (const auto& list : allowed) {
            if (list.empty()) throw ConfigError("label mask: empty topic set");
            for (int32_t k : list)
                if (k < 0 || k >= num_topics) throw ConfigError("label mask: topic id out of range");
        }
    }
};

namespace detail {

// The two factors of the collapsed update, computed from already-excluded
// aggregates: theta_fac[k] = (a[k]+alpha) / sum_k(a[k]+alpha) and
// phi_fac[k] = (b[k]+beta) / (c[k]+W*beta).
inline void collapsed_factors(std::span<const double> a, std::span<const double> b, std::span<const double> c,
                              double alpha, double beta, double wbeta, std::span<double> theta_fac,
                              std::span<double> phi_fac) {
    double sa = 0.0;
    for (size_t k = 0; k < a.size(); ++k) {
        const double v = a[k] + alpha;
        theta_fac[k] = v;
        sa += v;
        phi_fac[k] = (b[k] + beta) / (c[k] + wbeta);
    }
    const double inv_sa = 1.0 / sa;
    for (size_t k = 0; k < a.size(); ++k) theta_fac[k] *= inv_sa;
}

}  // namespace detail

// Factors of the BP update for one entry: the entry's own contribution
// weight*own is excluded from both numerators, and the entire document d is
// excluded from the per-topic normalizer of the phi-side factor.
inline void bp_factors(std::span<const double> doc_row, std::span<const double> word_row,
                       std::span<const double> totals, std::span<const double> own, double weight, double alpha,
                       double beta, double wbeta, std::span<double> theta_fac, std::span<double> phi_fac) {
    double sa = 0.0;
    for (size_t k = 0; k < own.size(); ++k) {
        const double self = weight * own[k];
        const double v = doc_row[k] - self + alpha;
        theta_fac[k] = v;
        sa += v;
        phi_fac[k] = (word_row[k] - self + beta) / (totals[k] - doc_row[k] + wbeta);
    }
    const double inv_sa = 1.0 / sa;
    for (size_t k = 0; k < own.size(); ++k) theta_fac[k] *= inv_sa;
}

// BP message update for one entry, given the current cache and the entry's
// own message. Writes a floored, normalized K-vector.
inline void bp_message(std::span<const double> doc_row, std::span<const double> word_row,
                       std::span<const double> totals, std::span<const double> own, double weight,
                       const Hyperparams& hp, double wbeta, std::span<double> theta_fac, std::span<double> phi_fac,
                       std::span<double> out, std::span<const int32_t> allowed = {}) {
    bp_factors(doc_row, word_row, totals, own, weight, hp.alpha, hp.beta, wbeta, theta_fac, phi_fac);
    for (size_t k = 0; k < out.size(); ++k) out[k] = theta_fac[k] * phi_fac[k];
    if (allowed.empty())
        floor_and_normalize(out);
    else
        floor_and_normalize_masked(out, allowed);
}

// Simplified BP: no self-exclusion anywhere, so the update is the product of
// the current theta and phi point estimates.
inline void sibp_message(std::span<const double> doc_row, std::span<const double> word_row,
                         std::span<const double> totals, const Hyperparams& hp, double wbeta,
                         std::span<double> theta_fac, std::span<double> phi_fac, std::span<double> out,
                         std::span<const int32_t> allowed = {}) {
    detail::collapsed_factors(doc_row, word_row, totals, hp.alpha, hp.beta, wbeta, theta_fac, phi_fac);
    for (size_t k = 0; k < out.size(); ++k) out[k] = theta_fac[k] * phi_fac[k];
    if (allowed.empty())
        floor_and_normalize(out);
    else
        floor_and_normalize_masked(out, allowed);
}

// Variational message: exp(digamma) on the live document aggregates, phi-side
// statistics frozen at the last M-step. The exp(digamma(sum)) denominator is
// constant over k and cancels in the normalization.
inline void vb_message(std::span<const double> doc_row, std::span<const double> word_row_m,
                       std::span<const double> totals_m, const Hyperparams& hp, double wbeta,
                       std::span<double> out) {
    for (size_t k = 0; k < out.size(); ++k)
        out[k] = std::exp(digamma(doc_row[k] + hp.alpha)) * (word_row_m[k] + hp.beta) / (totals_m[k] + wbeta);
    floor_and_normalize(out);
}

// Word-token state for the token-level learners (GS, CVB0). Tokens are
// enumerated entry-major: entry i contributes round(x_i) consecutive tokens.
struct TokenState {
    std::vector<int64_t> token_offsets;  // per entry, size NNZ+1
    std::vector<int32_t> token_doc;
    std::vector<int32_t> token_word;
    int64_t num_tokens = 0;

    explicit TokenState(const BagOfWords& bow) {
        if (!bow.has_integer_weights())
            throw ConfigError("token-level learners require integer word counts (raw_count weighting)");
        token_offsets.assign(static_cast<size_t>(bow.num_entries()) + 1, 0);
        for (int64_t i = 0; i < bow.num_entries(); ++i)
            token_offsets[static_cast<size_t>(i) + 1] =
                token_offsets[static_cast<size_t>(i)] + static_cast<int64_t>(bow.entry(i).weight);
        num_tokens = token_offsets.back();
        token_doc.resize(static_cast<size_t>(num_tokens));
        token_word.resize(static_cast<size_t>(num_tokens));
        for (int64_t i = 0; i < bow.num_entries(); ++i) {
            const Entry& e = bow.entry(i);
            for (int64_t t = token_offsets[static_cast<size_t>(i)]; t < token_offsets[static_cast<size_t>(i) + 1]; ++t) {
                token_doc[static_cast<size_t>(t)] = e.doc;
                token_word[static_cast<size_t>(t)] = e.word;
            }
        }
    }
};

// Hard topic labels plus integer count caches for collapsed Gibbs sampling.
struct GsState {
    TokenState tokens;
    std::vector<int32_t> labels;
    std::vector<int32_t> n_doc_topic;   // D x K
    std::vector<int32_t> n_word_topic;  // W x K
    std::vector<int32_t> n_topic;       // K
    int32_t num_docs, vocab_size, num_topics;

    GsState(const BagOfWords& bow, int32_t k, uint64_t seed)
        : tokens(bow), num_docs(bow.num_docs()), vocab_size(bow.vocab_size()), num_topics(k) {
        labels.resize(static_cast<size_t>(tokens.num_tokens));
        n_doc_topic.assign(static_cast<size_t>(num_docs) * k, 0);
        n_word_topic.assign(static_cast<size_t>(vocab_size) * k, 0);
        n_topic.assign(static_cast<size_t>(k), 0);
        Rng rng(seed);
        for (int64_t t = 0; t < tokens.num_tokens; ++t) {
            const int32_t z = static_cast<int32_t>(rng.uniform_int(static_cast<uint64_t>(k)));
            labels[static_cast<size_t>(t)] = z;
            bump(t, z, +1);
        }
    }

    void bump(int64_t t, int32_t z, int32_t delta) {
        n_doc_topic[static_cast<size_t>(token_dock(t)) + z] += delta;
        n_word_topic[static_cast<size_t>(token_wordk(t)) + z] += delta;
        n_topic[static_cast<size_t>(z)] += delta;
    }
    size_t token_dock(int64_t t) const {
        return static_cast<size_t>(tokens.token_doc[static_cast<size_t>(t)]) * num_topics;
    }
    size_t token_wordk(int64_t t) const {
        return static_cast<size_t>(tokens.token_word[static_cast<size_t>(t)]) * num_topics;
    }

    CountCache to_cache() const {
        CountCache cache(num_docs, vocab_size, num_topics);
        for (size_t i = 0; i < n_doc_topic.size(); ++i) cache.doc_topic[i] = n_doc_topic[i];
        for (size_t i = 0; i < n_word_topic.size(); ++i) cache.word_topic[i] = n_word_topic[i];
        for (size_t i = 0; i < n_topic.size(); ++i) cache.topic_total[i] = n_topic[i];
        return cache;
    }
};

// Samples a topic for token t whose current label has already been removed
// from the counts; re-increments the counts at the sampled topic.
inline int32_t gs_step(GsState& gs, int64_t t, const Hyperparams& hp, double wbeta, Rng& rng,
                       std::span<double> scratch) {
    const int32_t* nd = gs.n_doc_topic.data() + gs.token_dock(t);
    const int32_t* nw = gs.n_word_topic.data() + gs.token_wordk(t);
    for (int32_t k = 0; k < gs.num_topics; ++k)
        scratch[static_cast<size_t>(k)] = (nd[k] + hp.alpha) * (nw[k] + hp.beta) /
                                          (gs.n_topic[static_cast<size_t>(k)] + wbeta);
    const int32_t z = sample_categorical(scratch, rng);
    gs.bump(t, z, +1);
    return z;
}

// One full Gibbs sweep in ascending (doc, word, token) order. Returns the
// fraction of tokens whose label changed (the delta proxy recorded in the
// training history).
inline double gs_sweep(GsState& gs, const Hyperparams& hp, Rng& rng) {
    const double wbeta = static_cast<double>(gs.vocab_size) * hp.beta;
    std::vector<double> scratch(static_cast<size_t>(gs.num_topics));
    int64_t changed = 0;
    for (int64_t t = 0; t < gs.tokens.num_tokens; ++t) {
        const int32_t old = gs.labels[static_cast<size_t>(t)];
        gs.bump(t, old, -1);
        const int32_t z = gs_step(gs, t, hp, wbeta, rng, scratch);
        gs.labels[static_cast<size_t>(t)] = z;
        if (z != old) ++changed;
    }
    return gs.tokens.num_tokens == 0 ? 0.0 : static_cast<double>(changed) / static_cast<double>(gs.tokens.num_tokens);
}

// Soft per-token assignments for CVB0: token-level BP over the same kernel.
struct Cvb0State {
    TokenState tokens;
    MessageState msgs;  // one row per token
    CountCache cache;   // soft counts built from token messages
    int32_t num_docs, vocab_size;

    Cvb0State(const BagOfWords& bow, int32_t k, uint64_t seed)
        : tokens(bow), msgs(tokens.num_tokens, k), num_docs(bow.num_docs()), vocab_size(bow.vocab_size()) {
        Rng rng(seed);
        for (int64_t t = 0; t < msgs.rows(); ++t) {
            auto row = msgs.row(t);
            double sum = 0.0;
            for (double& v : row) {
                v = rng.uniform01();
                sum += v;
            }
            const double inv = 1.0 / sum;
            for (double& v : row) v *= inv;
        }
        rebuild();
    }

    void rebuild() {
        CountCache fresh(num_docs, vocab_size, msgs.num_topics());
        const int32_t k_count = msgs.num_topics();
        for (int64_t t = 0; t < tokens.num_tokens; ++t) {
            auto dt = fresh.doc_row(tokens.token_doc[static_cast<size_t>(t)]);
            auto wt = fresh.word_row(tokens.token_word[static_cast<size_t>(t)]);
            const auto msg = msgs.row(t);
            for (int32_t k = 0; k < k_count; ++k) {
                const double v = 1.0 * msg[static_cast<size_t>(k)];
                dt[static_cast<size_t>(k)] += v;
                wt[static_cast<size_t>(k)] += v;
            }
        }
        for (int32_t w = 0; w < fresh.vocab_size; ++w) {
            const auto wt = fresh.word_row(w);
            for (int32_t k = 0; k < k_count; ++k) fresh.topic_total[static_cast<size_t>(k)] += wt[static_cast<size_t>(k)];
        }
        cache = std::move(fresh);
    }
};

// Token-level update: the BP kernel applied to the soft token counts with
// unit weight.
inline void cvb0_message(const Cvb0State& st, int64_t t, const Hyperparams& hp, double wbeta,
                         std::span<double> theta_fac, std::span<double> phi_fac, std::span<double> out) {
    bp_message(st.cache.doc_row(st.tokens.token_doc[static_cast<size_t>(t)]),
               st.cache.word_row(st.tokens.token_word[static_cast<size_t>(t)]), st.cache.topic_total,
               st.msgs.row(t), 1.0, hp, wbeta, theta_fac, phi_fac, out);
}

inline double cvb0_sweep(Cvb0State& st, const Hyperparams& hp, Schedule schedule, MessageState& scratch) {
    const int32_t k_count = st.msgs.num_topics();
    const double wbeta = static_cast<double>(st.cache.vocab_size) * hp.beta;
    std::vector<double> tf(static_cast<size_t>(k_count)), pf(static_cast<size_t>(k_count));
    double max_delta = 0.0;
    if (schedule == Schedule::synchronous) {
        for (int64_t t = 0; t < st.tokens.num_tokens; ++t) {
            auto out = scratch.row(t);
            cvb0_message(st, t, hp, wbeta, tf, pf, out);
            const auto own = st.msgs.row(t);
            for (int32_t k = 0; k < k_count; ++k) {
                const double d = std::abs(out[static_cast<size_t>(k)] - own[static_cast<size_t>(k)]);
                if (d > max_delta) max_delta = d;
            }
        }
        std::swap(st.msgs.data(), scratch.data());
        st.rebuild();
        return max_delta;
    }
    std::vector<double> fresh(static_cast<size_t>(k_count));
    for (int64_t t = 0; t < st.tokens.num_tokens; ++t) {
        cvb0_message(st, t, hp, wbeta, tf, pf, fresh);
        auto own = st.msgs.row(t);
        auto dt = st.cache.doc_row(st.tokens.token_doc[static_cast<size_t>(t)]);
        auto wt = st.cache.word_row(st.tokens.token_word[static_cast<size_t>(t)]);
        for (int32_t k = 0; k < k_count; ++k) {
            const size_t ks = static_cast<size_t>(k);
            const double old_part = 1.0 * own[ks];
            const double new_part = 1.0 * fresh[ks];
            dt[ks] = dt[ks] - old_part + new_part;
            wt[ks] = wt[ks] - old_part + new_part;
            st.cache.topic_total[ks] = st.cache.topic_total[ks] - old_part + new_part;
            const double d = std::abs(fresh[ks] - own[ks]);
            if (d > max_delta) max_delta = d;
            own[ks] = fresh[ks];
        }
    }
    return max_delta;
}

// theta_d(k) = (doc_topic[d][k]+alpha) / sum_k(...). With a mask, disallowed
// topics get exactly zero and alpha is added on the allowed block only.
inline std::vector<double> estimate_theta(const CountCache& cache, const Hyperparams& hp,
                                          const LabelMask* mask = nullptr) {
    const int32_t k_count = cache.num_topics;
    std::vector<double> theta(static_cast<size_t>(cache.num_docs) * k_count, 0.0);
    for (int32_t d = 0; d < cache.num_docs; ++d) {
        const auto dt = cache.doc_row(d);
        auto out = std::span<double>(theta).subspan(static_cast<size_t>(d) * k_count, static_cast<size_t>(k_count));
        if (mask != nullptr) {
            const auto& allowed = mask->allowed[static_cast<size_t>(d)];
            double sum = 0.0;
            for (int32_t k : allowed) sum += dt[static_cast<size_t>(k)] + hp.alpha;
            for (int32_t k : allowed) out[static_cast<size_t>(k)] = (dt[static_cast<size_t>(k)] + hp.alpha) / sum;
        } else {
            double sum = 0.0;
            for (int32_t k = 0; k < k_count; ++k) sum += dt[static_cast<size_t>(k)] + hp.alpha;
            for (int32_t k = 0; k < k_count; ++k) out[static_cast<size_t>(k)] = (dt[static_cast<size_t>(k)] + hp.alpha) / sum;
        }
    }
    return theta;
}

// phi_w(k) = (word_topic[w][k]+beta) / (topic_total[k]+W*beta).
inline std::vector<double> estimate_phi(const CountCache& cache, const Hyperparams& hp) {
    const int32_t k_count = cache.num_topics;
    const double wbeta = static_cast<double>(cache.vocab_size) * hp.beta;
    std::vector<double> phi(static_cast<size_t>(cache.vocab_size) * k_count, 0.0);
    for (int32_t w = 0; w < cache.vocab_size; ++w) {
        const auto wt = cache.word_row(w);
        auto out = std::span<double>(phi).subspan(static_cast<size_t>(w) * k_count, static_cast<size_t>(k_count));
        for (int32_t k = 0; k < k_count; ++k)
            out[static_cast<size_t>(k)] = (wt[static_cast<size_t>(k)] + hp.beta) /
                                          (cache.topic_total[static_cast<size_t>(k)] + wbeta);
    }
    return phi;
}

// Collapsed log joint probability of counts and observations, up to the
// constant dropped by proportionality. Accepts soft or hard count caches.
inline double log_joint(const BagOfWords& bow, const CountCache& cache, const Hyperparams& hp) {
    const int32_t k_count = cache.num_topics;
    double result = 0.0;
    for (int32_t d = 0; d < cache.num_docs; ++d) {
        const auto dt = cache.doc_row(d);
        for (int32_t k = 0; k < k_count; ++k) result += std::lgamma(dt[static_cast<size_t>(k)] + hp.alpha);
        result -= std::lgamma(bow.doc_tokens(d) + k_count * hp.alpha);
    }
    const double wbeta = static_cast<double>(cache.vocab_size) * hp.beta;
    for (int32_t k = 0; k < k_count; ++k) {
        for (int32_t w = 0; w < cache.vocab_size; ++w)
            result += std::lgamma(cache.word_row(w)[static_cast<size_t>(k)] + hp.beta);
        result -= std::lgamma(cache.topic_total[static_cast<size_t>(k)] + wbeta);
    }
    return result;
}

// Training perplexity over the full (weighted) training matrix.
inline double training_perplexity(const BagOfWords& bow, const ModelParams& params) {
    double log_sum = 0.0;
    double weight_sum = 0.0;
    for (const Entry& e : bow.entries()) {
        const auto th = params.theta_row(e.doc);
        const auto ph = params.phi_row(e.word);
        double p = 0.0;
        for (int32_t k = 0; k < params.num_topics; ++k) p += th[static_cast<size_t>(k)] * ph[static_cast<size_t>(k)];
        if (!(p > 0.0) || !std::isfinite(p)) throw NumericError("nonpositive predicted word probability");
        log_sum += e.weight * std::log(p);
        weight_sum += e.weight;
    }
    if (weight_sum <= 0.0) return 1.0;
    return std::exp(-log_sum / weight_sum);
}

struct TrainOptions {
    Schedule schedule = Schedule::synchronous;
    std::optional<LabelMask> mask;                    // bp/sibp only
    bool run_to_max = false;                          // disable early stopping
    const MessageState* initial_messages = nullptr;   // override seeded init (entry- or token-level)
};

struct TrainResult {
    ModelParams params;
    std::vector<IterationStats> history;
    int32_t iterations = 0;
    bool converged = false;
    MessageState messages;  // final entry messages (bp/sibp/vb) or token messages (cvb0)
    CountCache counts;      // final aggregates (token-level for gs/cvb0)
};

namespace detail {

inline bool stop_criterion_met(std::span<const IterationStats> history, const Hyperparams& hp) {
    if (history.empty()) return false;
    if (history.back().max_delta < hp.lambda) return true;
    if (history.size() >= 2 &&
        std::abs(history.back().perplexity - history[history.size() - 2].perplexity) < 1.0)
        return true;
    return false;
}

template <typename StepFn, typename EstimateFn>
void run_training_loop(const Hyperparams& hp, const TrainOptions& opts, StepFn&& step, EstimateFn&& estimate,
                       TrainResult& result, const BagOfWords& bow) {
    result.history.clear();
    for (int32_t t = 1; t <= hp.max_iters; ++t) {
        const auto t0 = std::chrono::steady_clock::now();
        const double delta = step();
        result.params = estimate();
        const double perp = training_perplexity(bow, result.params);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back({t, perp, delta, secs});
        result.iterations = t;
        if (!opts.run_to_max && has_converged(result.history, hp)) break;
    }
    result.converged = stop_criterion_met(result.history, hp);
}

}  // namespace detail

// Entry-level BP/siBP training (synchronous or asynchronous).
inline TrainResult train_bp_like(const BagOfWords& bow, const Hyperparams& hp, Algo algo, const TrainOptions& opts) {
    const int32_t k_count = hp.num_topics;
    const double wbeta = static_cast<double>(bow.vocab_size()) * hp.beta;
    MessageState msgs;
    if (opts.initial_messages != nullptr) {
        if (opts.initial_messages->rows() != bow.num_entries() || opts.initial_messages->num_topics() != k_count)
            throw ConfigError("initial message state has the wrong shape");
        msgs = *opts.initial_messages;
    } else if (opts.mask.has_value()) {
        msgs = init_messages_masked(bow, k_count, derive_seed(hp.seed, SeedTag::message_init), opts.mask->allowed);
    } else {
        msgs = init_messages(bow, k_count, derive_seed(hp.seed, SeedTag::message_init));
    }
    MessageState scratch(bow.num_entries(), k_count);
    CountCache cache = rebuild_counts(bow, msgs);

    std::vector<double> tf(static_cast<size_t>(k_count)), pf(static_cast<size_t>(k_count));
    const LabelMask* mask = opts.mask.has_value() ? &*opts.mask : nullptr;
    auto rule = [&](int64_t, const Entry& e, const CountCache& c, std::span<const double> own,
                    std::span<double> out) {
        const std::span<const int32_t> allowed =
            mask != nullptr ? std::span<const int32_t>(mask->allowed[static_cast<size_t>(e.doc)])
                            : std::span<const int32_t>{};
        if (algo == Algo::bp)
            bp_message(c.doc_row(e.doc), c.word_row(e.word), c.topic_total, own, e.weight, hp, wbeta, tf, pf, out,
                       allowed);
        else
            sibp_message(c.doc_row(e.doc), c.word_row(e.word), c.topic_total, hp, wbeta, tf, pf, out, allowed);
    };

    TrainResult result;
    detail::run_training_loop(
        hp, opts, [&] { return sweep(bow, msgs, scratch, cache, rule, opts.schedule); },
        [&] {
            ModelParams p;
            p.num_topics = k_count;
            p.theta = estimate_theta(cache, hp, mask);
            p.phi = estimate_phi(cache, hp);
            return p;
        },
        result, bow);
    result.messages = std::move(msgs);
    result.counts = std::move(cache);
    return result;
}

// Variational Bayes with the variational EM schedule: per document, messages
// and the document aggregate are updated together (up to 20 passes or until
// the in-document message delta falls below 1e-6) against phi-side statistics
// frozen at the last M-step; the M-step then rebuilds those statistics.
inline TrainResult train_vb(const BagOfWords& bow, const Hyperparams& hp, const TrainOptions& opts) {
    constexpr int kMaxInnerPasses = 20;
    constexpr double kInnerDelta = 1e-6;
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
    CountCache cache = rebuild_counts(bow, msgs);

    std::vector<double> fresh(static_cast<size_t>(k_count));
    auto step = [&]() {
        double max_delta = 0.0;
        for (int32_t d = 0; d < bow.num_docs(); ++d) {
            const int64_t begin = bow.doc_begin(d), end = bow.doc_end(d);
            if (begin == end) continue;
            auto dt = cache.doc_row(d);
            for (int pass = 0; pass < kMaxInnerPasses; ++pass) {
                double pass_delta = 0.0;
                for (int64_t i = begin; i < end; ++i) {
                    const Entry& e = bow.entry(i);
                    vb_message(dt, cache.word_row(e.word), cache.topic_total, hp, wbeta, fresh);
                    auto own = msgs.row(i);
                    for (int32_t k = 0; k < k_count; ++k) {
                        const size_t ks = static_cast<size_t>(k);
                        dt[ks] += e.weight * (fresh[ks] - own[ks]);
                        const double delta = std::abs(fresh[ks] - own[ks]);
                        if (delta > pass_delta) pass_delta = delta;
                        own[ks] = fresh[ks];
                    }
                }
                if (pass_delta > max_delta) max_delta = pass_delta;
                if (pass_delta < kInnerDelta) break;
            }
        }
        // M-step: refresh the phi-side statistics (full rebuild also clears
        // incremental drift in the document aggregates).
        cache = rebuild_counts(bow, msgs);
        return max_delta;
    };

    TrainResult result;
    detail::run_training_loop(
        hp, opts, step,
        [&] {
            ModelParams p;
            p.num_topics = k_count;
            p.theta = estimate_theta(cache, hp);
            p.phi = estimate_phi(cache, hp);
            return p;
        },
        result, bow);
    result.messages = std::move(msgs);
    result.counts = std::move(cache);
    return result;
}

inline TrainResult train_gs(const BagOfWords& bow, const Hyperparams& hp, const TrainOptions& opts) {
    GsState gs(bow, hp.num_topics, derive_seed(hp.seed, SeedTag::token_init));
    Rng rng(derive_seed(hp.seed, SeedTag::gs_sampling));
    TrainResult result;
    detail::run_training_loop(
        hp, opts, [&] { return gs_sweep(gs, hp, rng); },
        [&] {
            const CountCache cache = gs.to_cache();
            ModelParams p;
            p.num_topics = hp.num_topics;
            p.theta = estimate_theta(cache, hp);
            p.phi = estimate_phi(cache, hp);
            return p;
        },
        result, bow);
    result.counts = gs.to_cache();
    return result;
}

inline TrainResult train_cvb0(const BagOfWords& bow, const Hyperparams& hp, const TrainOptions& opts) {
    Cvb0State st(bow, hp.num_topics, derive_seed(hp.seed, SeedTag::message_init));
    if (opts.initial_messages != nullptr) {
        if (opts.initial_messages->rows() != st.tokens.num_tokens ||
            opts.initial_messages->num_topics() != hp.num_topics)
            throw ConfigError("initial message state has the wrong shape");
        st.msgs = *opts.initial_messages;
        st.rebuild();
    }
    MessageState scratch(st.tokens.num_tokens, hp.num_topics);
    TrainResult result;
    detail::run_training_loop(
        hp, opts, [&] { return cvb0_sweep(st, hp, opts.schedule, scratch); },
        [&] {
            ModelParams p;
            p.num_topics = hp.num_topics;
            p.theta = estimate_theta(st.cache, hp);
            p.phi = estimate_phi(st.cache, hp);
            return p;
        },
        result, bow);
    result.messages = std::move(st.msgs);
    result.counts = std::move(st.cache);
    return result;
}

// Trains LDA with the requested learning rule. GS and CVB0 require integer
// raw counts; the label mask is valid for BP and siBP only.
inline TrainResult train_lda(const BagOfWords& bow, const Hyperparams& hp, Algo algo,
                             const TrainOptions& opts = {}) {
    hp.validate();
    if (opts.mask.has_value()) {
        if (algo != Algo::bp && algo != Algo::sibp)
            throw ConfigError("label mask requires algo bp or sibp");
        opts.mask->validate(bow.num_docs(), hp.num_topics);
    }
    switch (algo) {
        case Algo::bp:
        case Algo::sibp:
            return train_bp_like(bow, hp, algo, opts);
        case Algo::vb:
            return train_vb(bow, hp, opts);
        case Algo::gs:
            return train_gs(bow, hp, opts);
        case Algo::cvb0:
            return train_cvb0(bow, hp, opts);
    }
    throw ConfigError("unknown algorithm");
}

}  // namespace topicbp
