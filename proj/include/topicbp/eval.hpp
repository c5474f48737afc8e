#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <thread>
#include <unordered_set>
#include <utility>
#include <vector>

#include "topicbp/atm.hpp"
#include "topicbp/corpus.hpp"
#include "topicbp/lda.hpp"
#include "topicbp/numeric.hpp"
#include "topicbp/rng.hpp"
#include "topicbp/rtm.hpp"

namespace topicbp {

enum class ModelKind { lda, atm, rtm };

inline const char* model_name(ModelKind m) {
    switch (m) {
        case ModelKind::lda: return "lda";
        case ModelKind::atm: return "atm";
        case ModelKind::rtm: return "rtm";
    }
    return "?";
}

namespace detail {

template <typename Fn>
void parallel_for(int32_t n, int threads, Fn&& fn) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
    threads = std::min<int>(threads, n);
    if (threads <= 1) {
        for (int32_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int32_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (int32_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace detail

// Exponentiated negative mean log-likelihood per held-out token.
inline double perplexity(std::span<const double> theta, std::span<const double> phi, int32_t num_topics,
                         std::span<const Entry> eval_entries) {
    double log_sum = 0.0, weight_sum = 0.0;
    for (const Entry& e : eval_entries) {
        const double* th = theta.data() + static_cast<size_t>(e.doc) * num_topics;
        const double* ph = phi.data() + static_cast<size_t>(e.word) * num_topics;
        double p = 0.0;
        for (int32_t k = 0; k < num_topics; ++k) p += th[k] * ph[k];
        if (!(p > 0.0) || !std::isfinite(p)) throw NumericError("nonpositive predicted word probability");
        log_sum += e.weight * std::log(p);
        weight_sum += e.weight;
    }
    if (weight_sum <= 0.0) throw ConfigError("perplexity requires a nonempty evaluation set");
    return std::exp(-log_sum / weight_sum);
}

// Per-document 90/10 (in general 1-h / h) partition of word occurrences.
// Counts are split proportionally per entry; leftover occurrences are
// assigned by a seeded draw weighted by the fractional remainders. Documents
// whose evaluation share rounds to zero are excluded and counted.
struct SplitEntry {
    int32_t word = 0;
    int32_t est_count = 0;
    int32_t eval_count = 0;
};

struct DocHoldout {
    std::vector<SplitEntry> entries;
    bool scored = false;
};

struct HoldoutSplit {
    std::vector<DocHoldout> docs;
    int32_t scored_docs = 0;
    int32_t skipped_docs = 0;
};

inline HoldoutSplit make_holdout_split(const BagOfWords& test, double holdout_fraction, uint64_t seed) {
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
        throw ConfigError("holdout fraction must lie strictly between 0 and 1");
    if (!test.has_integer_weights())
        throw ConfigError("holdout split requires integer word counts");
    HoldoutSplit split;
    split.docs.resize(static_cast<size_t>(test.num_docs()));
    for (int32_t d = 0; d < test.num_docs(); ++d) {
        DocHoldout& doc = split.docs[static_cast<size_t>(d)];
        const auto entries = test.doc_entries(d);
        const int64_t total = static_cast<int64_t>(test.doc_tokens(d));
        const int64_t target = static_cast<int64_t>(std::floor(holdout_fraction * static_cast<double>(total) + 0.5));
        if (entries.empty() || target == 0) {
            ++split.skipped_docs;
            for (const Entry& e : entries)
                doc.entries.push_back({e.word, static_cast<int32_t>(e.weight), 0});
            continue;
        }
        doc.scored = true;
        ++split.scored_docs;
        std::vector<double> frac(entries.size(), 0.0);
        int64_t assigned = 0;
        for (size_t i = 0; i < entries.size(); ++i) {
            const int32_t x = static_cast<int32_t>(entries[i].weight);
            const double ideal = holdout_fraction * static_cast<double>(x);
            const int32_t base = static_cast<int32_t>(std::floor(ideal));
            frac[i] = ideal - static_cast<double>(base);
            doc.entries.push_back({entries[i].word, x - base, base});
            assigned += base;
        }
        Rng rng(mix_seed(seed, static_cast<uint64_t>(d)));
        int64_t remainder = target - assigned;
        while (remainder > 0) {
            double weight_sum = 0.0;
            for (size_t i = 0; i < frac.size(); ++i)
                if (doc.entries[i].est_count > 0) weight_sum += frac[i];
            if (weight_sum <= 0.0) {
                // fall back to uniform over entries that still have capacity
                std::vector<size_t> cap;
                for (size_t i = 0; i < doc.entries.size(); ++i)
                    if (doc.entries[i].est_count > 0) cap.push_back(i);
                if (cap.empty()) break;
                const size_t pick = cap[static_cast<size_t>(rng.uniform_int(cap.size()))];
                --doc.entries[pick].est_count;
                ++doc.entries[pick].eval_count;
                --remainder;
                continue;
            }
            const double u = rng.uniform01() * weight_sum;
            double acc = 0.0;
            size_t pick = doc.entries.size();
            for (size_t i = 0; i < frac.size(); ++i) {
                if (doc.entries[i].est_count == 0) continue;
                acc += frac[i];
                if (u < acc) {
                    pick = i;
                    break;
                }
            }
            if (pick == doc.entries.size()) {
                for (size_t i = frac.size(); i-- > 0;)
                    if (doc.entries[i].est_count > 0) {
                        pick = i;
                        break;
                    }
            }
            --doc.entries[pick].est_count;
            ++doc.entries[pick].eval_count;
            frac[pick] = 0.0;
            --remainder;
        }
    }
    return split;
}

// Estimates a document's topic proportion against a frozen phi by running
// the chosen algorithm's theta-side updates on the estimation entries.
inline std::vector<double> fold_in_theta(std::span<const double> phi, int32_t num_topics,
                                         std::span<const SplitEntry> entries, const Hyperparams& hp, Algo algo,
                                         uint64_t seed, int32_t max_iters) {
    const size_t k_count = static_cast<size_t>(num_topics);
    std::vector<double> dt(k_count, 0.0);
    std::vector<SplitEntry> est;
    for (const SplitEntry& e : entries)
        if (e.est_count > 0) est.push_back(e);
    if (est.empty()) {
        std::vector<double> theta(k_count, 1.0 / static_cast<double>(num_topics));
        return theta;
    }
    Rng rng(seed);
    auto phi_row = [&](int32_t w) { return phi.data() + static_cast<size_t>(w) * k_count; };

    if (algo == Algo::gs) {
        // hard labels per token, document-side counts only
        std::vector<int32_t> token_word;
        for (const SplitEntry& e : est)
            for (int32_t i = 0; i < e.est_count; ++i) token_word.push_back(e.word);
        std::vector<int32_t> labels(token_word.size());
        std::vector<int32_t> nd(k_count, 0);
        for (size_t t = 0; t < labels.size(); ++t) {
            labels[t] = static_cast<int32_t>(rng.uniform_int(static_cast<uint64_t>(num_topics)));
            ++nd[static_cast<size_t>(labels[t])];
        }
        std::vector<double> weights(k_count);
        for (int32_t pass = 0; pass < max_iters; ++pass) {
            int64_t changed = 0;
            for (size_t t = 0; t < labels.size(); ++t) {
                const int32_t old = labels[t];
                --nd[static_cast<size_t>(old)];
                const double* ph = phi_row(token_word[t]);
                for (size_t k = 0; k < k_count; ++k) weights[k] = (nd[k] + hp.alpha) * ph[k];
                const int32_t z = sample_categorical(weights, rng);
                ++nd[static_cast<size_t>(z)];
                labels[t] = z;
                if (z != old) ++changed;
            }
            if (changed == 0) break;
        }
        for (size_t k = 0; k < k_count; ++k) dt[k] = nd[k];
    } else if (algo == Algo::cvb0) {
        std::vector<int32_t> token_word;
        for (const SplitEntry& e : est)
            for (int32_t i = 0; i < e.est_count; ++i) token_word.push_back(e.word);
        MessageState msgs(static_cast<int64_t>(token_word.size()), num_topics);
        for (int64_t t = 0; t < msgs.rows(); ++t) {
            auto row = msgs.row(t);
            double sum = 0.0;
            for (double& v : row) {
                v = rng.uniform01();
                sum += v;
            }
            for (double& v : row) v /= sum;
            for (size_t k = 0; k < k_count; ++k) dt[k] += row[k];
        }
        std::vector<double> fresh(k_count);
        for (int32_t pass = 0; pass < max_iters; ++pass) {
            double pass_delta = 0.0;
            for (int64_t t = 0; t < msgs.rows(); ++t) {
                auto own = msgs.row(t);
                const double* ph = phi_row(token_word[static_cast<size_t>(t)]);
                double sa = 0.0;
                for (size_t k = 0; k < k_count; ++k) {
                    const double a = dt[k] - own[k] + hp.alpha;
                    fresh[k] = a;
                    sa += a;
                }
                for (size_t k = 0; k < k_count; ++k) fresh[k] = fresh[k] / sa * ph[k];
                floor_and_normalize(fresh);
                for (size_t k = 0; k < k_count; ++k) {
                    dt[k] += fresh[k] - own[k];
                    const double delta = std::abs(fresh[k] - own[k]);
                    if (delta > pass_delta) pass_delta = delta;
                    own[k] = fresh[k];
                }
            }
            if (pass_delta < hp.lambda) break;
        }
    } else {
        // bp, sibp, vb: entry-level messages
        MessageState msgs(static_cast<int64_t>(est.size()), num_topics);
        for (int64_t i = 0; i < msgs.rows(); ++i) {
            auto row = msgs.row(i);
            double sum = 0.0;
            for (double& v : row) {
                v = rng.uniform01();
                sum += v;
            }
            for (double& v : row) v /= sum;
            const double x = static_cast<double>(est[static_cast<size_t>(i)].est_count);
            for (size_t k = 0; k < k_count; ++k) dt[k] += x * row[k];
        }
        std::vector<double> fresh(k_count);
        for (int32_t pass = 0; pass < max_iters; ++pass) {
            double pass_delta = 0.0;
            for (int64_t i = 0; i < msgs.rows(); ++i) {
                auto own = msgs.row(i);
                const double x = static_cast<double>(est[static_cast<size_t>(i)].est_count);
                const double* ph = phi_row(est[static_cast<size_t>(i)].word);
                if (algo == Algo::vb) {
                    for (size_t k = 0; k < k_count; ++k)
                        fresh[k] = std::exp(digamma(dt[k] + hp.alpha)) * ph[k];
                } else {
                    double sa = 0.0;
                    for (size_t k = 0; k < k_count; ++k) {
                        const double excl = algo == Algo::bp ? x * own[k] : 0.0;
                        const double a = dt[k] - excl + hp.alpha;
                        fresh[k] = a;
                        sa += a;
                    }
                    for (size_t k = 0; k < k_count; ++k) fresh[k] = fresh[k] / sa * ph[k];
                }
                floor_and_normalize(fresh);
                for (size_t k = 0; k < k_count; ++k) {
                    dt[k] += x * (fresh[k] - own[k]);
                    const double delta = std::abs(fresh[k] - own[k]);
                    if (delta > pass_delta) pass_delta = delta;
                    own[k] = fresh[k];
                }
            }
            if (pass_delta < hp.lambda) break;
        }
    }

    double sum = 0.0;
    std::vector<double> theta(k_count);
    for (size_t k = 0; k < k_count; ++k) sum += dt[k] + hp.alpha;
    for (size_t k = 0; k < k_count; ++k) theta[k] = (dt[k] + hp.alpha) / sum;
    return theta;
}

struct PredictiveResult {
    double perplexity = 0.0;
    int32_t scored_docs = 0;
    int32_t skipped_docs = 0;
};

// Predictive perplexity under the 90/10 protocol: fold in theta on the
// estimation share of each test document with phi frozen, then score the
// evaluation share. phi is never modified.
inline PredictiveResult predictive_perplexity(std::span<const double> phi, int32_t vocab_size, int32_t num_topics,
                                              const BagOfWords& test, const Hyperparams& hp, Algo algo,
                                              uint64_t split_seed, double holdout = 0.1,
                                              int32_t max_fold_in_iters = 1000, int threads = 1) {
    if (test.vocab_size() != vocab_size)
        throw IoError("vocabulary mismatch: model has W=" + std::to_string(vocab_size) + " but test corpus has W=" +
                      std::to_string(test.vocab_size()));
    const HoldoutSplit split = make_holdout_split(test, holdout, derive_seed(split_seed, SeedTag::holdout_split));
    const uint64_t fold_in_base = derive_seed(split_seed, SeedTag::fold_in);

    std::vector<double> doc_log(static_cast<size_t>(test.num_docs()), 0.0);
    std::vector<double> doc_weight(static_cast<size_t>(test.num_docs()), 0.0);
    detail::parallel_for(test.num_docs(), threads, [&](int32_t d) {
        const DocHoldout& doc = split.docs[static_cast<size_t>(d)];
        if (!doc.scored) return;
        const std::vector<double> theta = fold_in_theta(phi, num_topics, doc.entries, hp, algo,
                                                        mix_seed(fold_in_base, static_cast<uint64_t>(d)),
                                                        max_fold_in_iters);
        double log_sum = 0.0, weight_sum = 0.0;
        for (const SplitEntry& e : doc.entries) {
            if (e.eval_count == 0) continue;
            const double* ph = phi.data() + static_cast<size_t>(e.word) * num_topics;
            double p = 0.0;
            for (int32_t k = 0; k < num_topics; ++k) p += theta[static_cast<size_t>(k)] * ph[k];
            if (!(p > 0.0) || !std::isfinite(p)) throw NumericError("nonpositive predicted word probability");
            log_sum += static_cast<double>(e.eval_count) * std::log(p);
            weight_sum += static_cast<double>(e.eval_count);
        }
        doc_log[static_cast<size_t>(d)] = log_sum;
        doc_weight[static_cast<size_t>(d)] = weight_sum;
    });

    double log_sum = 0.0, weight_sum = 0.0;
    for (int32_t d = 0; d < test.num_docs(); ++d) {
        log_sum += doc_log[static_cast<size_t>(d)];
        weight_sum += doc_weight[static_cast<size_t>(d)];
    }
    PredictiveResult result;
    result.scored_docs = split.scored_docs;
    result.skipped_docs = split.skipped_docs;
    if (weight_sum <= 0.0) throw ConfigError("no scorable evaluation tokens in test corpus");
    result.perplexity = std::exp(-log_sum / weight_sum);
    return result;
}

// Extracts the sub-corpus induced by `docs` (ascending ids); documents are
// reindexed to 0..n-1 and the vocabulary is left untouched.
inline BagOfWords subset_docs(const BagOfWords& bow, std::span<const int32_t> docs) {
    std::vector<int32_t> remap(static_cast<size_t>(bow.num_docs()), -1);
    for (size_t i = 0; i < docs.size(); ++i) remap[static_cast<size_t>(docs[i])] = static_cast<int32_t>(i);
    std::vector<Entry> entries;
    for (int32_t d : docs)
        for (const Entry& e : bow.doc_entries(d))
            entries.push_back({remap[static_cast<size_t>(d)], e.word, e.weight});
    return BagOfWords(static_cast<int32_t>(docs.size()), bow.vocab_size(), std::move(entries));
}

inline SideData subset_side(const SideData& side, std::span<const int32_t> docs, int32_t num_docs) {
    std::vector<int32_t> remap(static_cast<size_t>(num_docs), -1);
    for (size_t i = 0; i < docs.size(); ++i) remap[static_cast<size_t>(docs[i])] = static_cast<int32_t>(i);
    SideData out;
    out.num_authors = side.num_authors;
    if (side.authors.has_value()) {
        std::vector<std::vector<int32_t>> lists;
        for (int32_t d : docs) lists.push_back((*side.authors)[static_cast<size_t>(d)]);
        out.authors = std::move(lists);
    }
    if (side.labels.has_value()) {
        std::vector<std::vector<int32_t>> lists;
        for (int32_t d : docs) lists.push_back((*side.labels)[static_cast<size_t>(d)]);
        out.labels = std::move(lists);
    }
    if (side.links.has_value()) {
        std::vector<std::pair<int32_t, int32_t>> links;
        for (const auto& [a, b] : *side.links) {
            const int32_t ra = remap[static_cast<size_t>(a)];
            const int32_t rb = remap[static_cast<size_t>(b)];
            if (ra >= 0 && rb >= 0) links.emplace_back(std::min(ra, rb), std::max(ra, rb));
        }
        out.links = std::move(links);
    }
    return out;
}

struct CvFoldResult {
    int32_t fold = 0;
    double perplexity = 0.0;
    double seconds = 0.0;
    int32_t scored_docs = 0;
    int32_t skipped_docs = 0;
};

struct CvSummary {
    std::vector<CvFoldResult> folds;
    double mean_perplexity = 0.0;
    double std_perplexity = 0.0;
};

// K-fold cross-validation: deterministic fold assignment from fold_seed,
// train on folds-1, score predictive perplexity on the held-out fold. Folds
// run in parallel when threads != 1.
inline CvSummary cross_validate(const BagOfWords& bow, const Hyperparams& hp, ModelKind kind, Algo algo,
                                const TrainOptions& base_opts, const SideData* side, int32_t folds,
                                uint64_t fold_seed, double holdout = 0.1, int32_t fold_in_iters = 1000,
                                int threads = 1) {
    if (folds < 2) throw ConfigError("cross-validation requires at least 2 folds");
    if (bow.num_docs() < folds) throw ConfigError("cross-validation requires at least as many documents as folds");
    std::vector<int32_t> order(static_cast<size_t>(bow.num_docs()));
    for (int32_t d = 0; d < bow.num_docs(); ++d) order[static_cast<size_t>(d)] = d;
    Rng rng(derive_seed(fold_seed, SeedTag::folds));
    rng.shuffle(std::span<int32_t>(order));
    std::vector<int32_t> fold_of(static_cast<size_t>(bow.num_docs()), 0);
    for (size_t i = 0; i < order.size(); ++i)
        fold_of[static_cast<size_t>(order[i])] = static_cast<int32_t>(i % static_cast<size_t>(folds));

    CvSummary summary;
    summary.folds.resize(static_cast<size_t>(folds));
    detail::parallel_for(folds, threads, [&](int32_t fold) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<int32_t> train_docs, test_docs;
        for (int32_t d = 0; d < bow.num_docs(); ++d)
            (fold_of[static_cast<size_t>(d)] == fold ? test_docs : train_docs).push_back(d);
        const BagOfWords train_bow = subset_docs(bow, train_docs);
        const BagOfWords test_bow = subset_docs(bow, test_docs);

        Hyperparams fold_hp = hp;
        fold_hp.seed = mix_seed(hp.seed, 1000 + static_cast<uint64_t>(fold));
        TrainOptions opts = base_opts;
        opts.initial_messages = nullptr;
        std::optional<LabelMask> sub_mask;
        if (base_opts.mask.has_value()) {
            sub_mask.emplace();
            for (int32_t d : train_docs) sub_mask->allowed.push_back(base_opts.mask->allowed[static_cast<size_t>(d)]);
            opts.mask = sub_mask;
        }

        std::vector<double> phi;
        Algo fold_in_algo = algo;
        if (kind == ModelKind::lda) {
            phi = train_lda(train_bow, fold_hp, algo, opts).params.phi;
        } else if (kind == ModelKind::atm) {
            if (side == nullptr) throw ConfigError("atm cross-validation requires side data");
            const SideData sub = subset_side(*side, train_docs, bow.num_docs());
            phi = train_atm(train_bow, sub, fold_hp, opts).params.phi;
            fold_in_algo = Algo::bp;
        } else {
            if (side == nullptr) throw ConfigError("rtm cross-validation requires side data");
            const SideData sub = subset_side(*side, train_docs, bow.num_docs());
            phi = train_rtm(train_bow, sub, fold_hp, opts).params.phi;
            fold_in_algo = Algo::bp;
        }

        const PredictiveResult pr =
            predictive_perplexity(phi, bow.vocab_size(), hp.num_topics, test_bow, fold_hp, fold_in_algo,
                                  mix_seed(fold_hp.seed, 2000 + static_cast<uint64_t>(fold)), holdout,
                                  fold_in_iters, /*threads=*/1);
        CvFoldResult& r = summary.folds[static_cast<size_t>(fold)];
        r.fold = fold;
        r.perplexity = pr.perplexity;
        r.scored_docs = pr.scored_docs;
        r.skipped_docs = pr.skipped_docs;
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    });

    std::vector<double> perps;
    for (const CvFoldResult& r : summary.folds) perps.push_back(r.perplexity);
    summary.mean_perplexity = mean(perps);
    summary.std_perplexity = stddev(perps);
    return summary;
}

struct TopWord {
    int32_t word = 0;
    double prob = 0.0;
};

// Per topic, the n highest-probability words; ties broken by the lower id.
inline std::vector<std::vector<TopWord>> top_words(std::span<const double> phi, int32_t vocab_size,
                                                   int32_t num_topics, int32_t n) {
    if (n > vocab_size) n = vocab_size;
    std::vector<std::vector<TopWord>> result(static_cast<size_t>(num_topics));
    std::vector<TopWord> column(static_cast<size_t>(vocab_size));
    for (int32_t k = 0; k < num_topics; ++k) {
        for (int32_t w = 0; w < vocab_size; ++w)
            column[static_cast<size_t>(w)] = {w, phi[static_cast<size_t>(w) * num_topics + static_cast<size_t>(k)]};
        std::partial_sort(column.begin(), column.begin() + n, column.end(), [](const TopWord& a, const TopWord& b) {
            return a.prob != b.prob ? a.prob > b.prob : a.word < b.word;
        });
        result[static_cast<size_t>(k)].assign(column.begin(), column.begin() + n);
    }
    return result;
}

// ---- link prediction ----

struct LinkExample {
    int32_t d1 = 0, d2 = 0;
    int32_t label = 0;
};

struct LinkDataset {
    std::vector<LinkExample> examples;  // positives first, then negatives
    int64_t positives = 0;
    int64_t negatives = 0;
    int64_t requested_negatives = 0;
    int64_t shortfall = 0;
};

// Positives are the observed links; negatives are sampled uniformly from the
// unlinked pairs (all of them when fewer than requested exist).
inline LinkDataset build_link_dataset(int32_t num_docs, std::span<const std::pair<int32_t, int32_t>> links,
                                      double negative_ratio, uint64_t seed) {
    if (links.empty()) throw ConfigError("link prediction requires links");
    LinkDataset ds;
    std::unordered_set<int64_t> linked;
    for (const auto& [a, b] : links) {
        ds.examples.push_back({a, b, 1});
        linked.insert(static_cast<int64_t>(a) * num_docs + b);
    }
    ds.positives = static_cast<int64_t>(links.size());
    ds.requested_negatives = static_cast<int64_t>(std::llround(negative_ratio * static_cast<double>(ds.positives)));
    const int64_t candidates =
        static_cast<int64_t>(num_docs) * (num_docs - 1) / 2 - static_cast<int64_t>(links.size());
    Rng rng(derive_seed(seed, SeedTag::negative_sampling));
    if (candidates <= ds.requested_negatives) {
        for (int32_t a = 0; a < num_docs; ++a)
            for (int32_t b = a + 1; b < num_docs; ++b)
                if (!linked.contains(static_cast<int64_t>(a) * num_docs + b)) ds.examples.push_back({a, b, 0});
        ds.negatives = candidates;
        ds.shortfall = ds.requested_negatives - candidates;
    } else {
        std::unordered_set<int64_t> drawn;
        while (static_cast<int64_t>(drawn.size()) < ds.requested_negatives) {
            const int32_t a = static_cast<int32_t>(rng.uniform_int(static_cast<uint64_t>(num_docs)));
            const int32_t b = static_cast<int32_t>(rng.uniform_int(static_cast<uint64_t>(num_docs)));
            if (a == b) continue;
            const int32_t lo = std::min(a, b), hi = std::max(a, b);
            const int64_t key = static_cast<int64_t>(lo) * num_docs + hi;
            if (linked.contains(key)) continue;
            if (drawn.insert(key).second) ds.examples.push_back({lo, hi, 0});
        }
        ds.negatives = ds.requested_negatives;
    }
    return ds;
}

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f_measure = 0.0;
};

inline Prf binary_prf(std::span<const int32_t> predicted, std::span<const int32_t> actual) {
    int64_t tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] == 1 && actual[i] == 1) ++tp;
        if (predicted[i] == 1 && actual[i] == 0) ++fp;
        if (predicted[i] == 0 && actual[i] == 1) ++fn;
    }
    Prf out;
    out.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    out.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    out.f_measure =
        out.precision + out.recall > 0.0 ? 2.0 * out.precision * out.recall / (out.precision + out.recall) : 0.0;
    return out;
}

struct LinkPredictionResult {
    Prf metrics;
    LinkDataset dataset;
    int64_t train_examples = 0;
    int64_t test_examples = 0;
    uint64_t seed = 0;
};

namespace detail {

// L2-regularized logistic regression, full-batch gradient descent on
// z-scored features. Deterministic: zero init, fixed epochs.
struct LogisticClassifier {
    std::vector<double> weights;
    double bias = 0.0;
    std::vector<double> feat_mean, feat_scale;

    void fit(const std::vector<std::vector<double>>& x, const std::vector<int32_t>& y, int epochs = 400,
             double lr = 0.5, double l2 = 1e-4) {
        const size_t n = x.size(), dim = x[0].size();
        feat_mean.assign(dim, 0.0);
        feat_scale.assign(dim, 1.0);
        for (const auto& row : x)
            for (size_t j = 0; j < dim; ++j) feat_mean[j] += row[j];
        for (size_t j = 0; j < dim; ++j) feat_mean[j] /= static_cast<double>(n);
        std::vector<double> var(dim, 0.0);
        for (const auto& row : x)
            for (size_t j = 0; j < dim; ++j) var[j] += (row[j] - feat_mean[j]) * (row[j] - feat_mean[j]);
        for (size_t j = 0; j < dim; ++j) {
            const double sd = std::sqrt(var[j] / static_cast<double>(n));
            feat_scale[j] = sd > 1e-12 ? sd : 1.0;
        }
        weights.assign(dim, 0.0);
        bias = 0.0;
        std::vector<double> grad(dim);
        for (int epoch = 0; epoch < epochs; ++epoch) {
            std::fill(grad.begin(), grad.end(), 0.0);
            double grad_b = 0.0;
            for (size_t i = 0; i < n; ++i) {
                double z = bias;
                for (size_t j = 0; j < dim; ++j) z += weights[j] * (x[i][j] - feat_mean[j]) / feat_scale[j];
                const double err = 1.0 / (1.0 + std::exp(-z)) - static_cast<double>(y[i]);
                for (size_t j = 0; j < dim; ++j) grad[j] += err * (x[i][j] - feat_mean[j]) / feat_scale[j];
                grad_b += err;
            }
            for (size_t j = 0; j < dim; ++j)
                weights[j] -= lr * (grad[j] / static_cast<double>(n) + l2 * weights[j]);
            bias -= lr * grad_b / static_cast<double>(n);
        }
    }

    int32_t predict(const std::vector<double>& row) const {
        double z = bias;
        for (size_t j = 0; j < row.size(); ++j) z += weights[j] * (row[j] - feat_mean[j]) / feat_scale[j];
        return z > 0.0 ? 1 : 0;
    }
};

}  // namespace detail

// Hadamard feature of a document pair.
inline std::vector<double> link_feature(std::span<const double> theta, int32_t num_topics, int32_t d1, int32_t d2) {
    std::vector<double> f(static_cast<size_t>(num_topics));
    const double* a = theta.data() + static_cast<size_t>(d1) * num_topics;
    const double* b = theta.data() + static_cast<size_t>(d2) * num_topics;
    for (int32_t k = 0; k < num_topics; ++k) f[static_cast<size_t>(k)] = a[k] * b[k];
    return f;
}

// Trains the built-in logistic classifier on Hadamard features of linked and
// sampled non-linked pairs; reports precision/recall/F on a held-out 30%
// stratified split.
inline LinkPredictionResult link_prediction(std::span<const double> theta, int32_t num_docs, int32_t num_topics,
                                            std::span<const std::pair<int32_t, int32_t>> links,
                                            double negative_ratio, uint64_t seed) {
    LinkPredictionResult result;
    result.seed = seed;
    result.dataset = build_link_dataset(num_docs, links, negative_ratio, seed);
    const auto& examples = result.dataset.examples;

    std::vector<size_t> pos_idx, neg_idx;
    for (size_t i = 0; i < examples.size(); ++i)
        (examples[i].label == 1 ? pos_idx : neg_idx).push_back(i);
    if (pos_idx.size() < 2 || neg_idx.size() < 2)
        throw ConfigError("link prediction needs at least two positive and two negative examples");
    Rng rng(derive_seed(seed, SeedTag::classifier_split));
    rng.shuffle(std::span<size_t>(pos_idx));
    rng.shuffle(std::span<size_t>(neg_idx));
    auto take = [](const std::vector<size_t>& idx, bool train) {
        const size_t cut = std::max<size_t>(1, idx.size() * 7 / 10);
        return train ? std::vector<size_t>(idx.begin(), idx.begin() + cut)
                     : std::vector<size_t>(idx.begin() + cut, idx.end());
    };
    std::vector<size_t> train_idx = take(pos_idx, true), test_idx = take(pos_idx, false);
    for (size_t i : take(neg_idx, true)) train_idx.push_back(i);
    for (size_t i : take(neg_idx, false)) test_idx.push_back(i);

    std::vector<std::vector<double>> x_train;
    std::vector<int32_t> y_train;
    for (size_t i : train_idx) {
        x_train.push_back(link_feature(theta, num_topics, examples[i].d1, examples[i].d2));
        y_train.push_back(examples[i].label);
    }
    detail::LogisticClassifier clf;
    clf.fit(x_train, y_train);

    std::vector<int32_t> predicted, actual;
    for (size_t i : test_idx) {
        predicted.push_back(clf.predict(link_feature(theta, num_topics, examples[i].d1, examples[i].d2)));
        actual.push_back(examples[i].label);
    }
    result.metrics = binary_prf(predicted, actual);
    result.train_examples = static_cast<int64_t>(train_idx.size());
    result.test_examples = static_cast<int64_t>(test_idx.size());
    return result;
}

}  // namespace topicbp
