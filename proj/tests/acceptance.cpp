// Acceptance suite: each numbered criterion runs standalone and prints one
// PASS/FAIL line with its wall time. Invoke with a criterion number to run
// just that one, or with no arguments to run all.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "support/synthetic.hpp"
#include "topicbp/atm.hpp"
#include "topicbp/engine.hpp"
#include "topicbp/eval.hpp"
#include "topicbp/lda.hpp"
#include "topicbp/rtm.hpp"

using namespace topicbp;
using testsupport::bow_from_triples;

namespace {

struct Check {
    bool ok = true;
    std::ostringstream log;
    void require(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            log << "    failed: " << what << "\n";
        }
    }
    void note(const std::string& what) { log << "    " << what << "\n"; }
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// ---------------------------------------------------------------- criterion 1
// One synchronous BP sweep on the 2x2 fixture matches per-entry direct
// evaluation of the update to 1e-12, including the frozen oracle values.
void criterion1(Check& c) {
    const BagOfWords bow = bow_from_triples(2, 2, {{0, 0, 1.0}, {0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 1.0}});
    Hyperparams hp;
    hp.num_topics = 2;
    hp.alpha = hp.beta = 0.01;
    MessageState msgs(4, 2);
    const double init[4][2] = {{0.9, 0.1}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}};
    for (int64_t i = 0; i < 4; ++i) {
        msgs.row(i)[0] = init[i][0];
        msgs.row(i)[1] = init[i][1];
    }
    const CountCache frozen = rebuild_counts(bow, msgs);
    const MessageState before = msgs;

    // direct evaluation per entry from the frozen state
    std::vector<std::vector<double>> expected;
    for (int64_t i = 0; i < 4; ++i) {
        const Entry& e = bow.entry(i);
        std::vector<double> out(2);
        double norm = 0.0;
        double sa = 0.0;
        for (int k = 0; k < 2; ++k)
            sa += frozen.doc_row(e.doc)[k] - e.weight * before.row(i)[k] + hp.alpha;
        for (int k = 0; k < 2; ++k) {
            const double a = frozen.doc_row(e.doc)[k] - e.weight * before.row(i)[k] + hp.alpha;
            const double b = frozen.word_row(e.word)[k] - e.weight * before.row(i)[k] + hp.beta;
            const double cc = frozen.topic_total[k] - frozen.doc_row(e.doc)[k] + 2 * hp.beta;
            out[k] = a / sa * b / cc;
            norm += out[k];
        }
        for (double& v : out) v /= norm;
        expected.push_back(out);
    }

    MessageState scratch(4, 2);
    CountCache cache = frozen;
    const double wbeta = 2 * hp.beta;
    std::vector<double> tf(2), pf(2);
    auto rule = [&](int64_t, const Entry& e, const CountCache& cc, std::span<const double> own,
                    std::span<double> out) {
        bp_message(cc.doc_row(e.doc), cc.word_row(e.word), cc.topic_total, own, e.weight, hp, wbeta, tf, pf, out);
    };
    sweep_synchronous(bow, msgs, scratch, cache, rule);

    for (int64_t i = 0; i < 4; ++i)
        for (int k = 0; k < 2; ++k)
            c.require(std::abs(msgs.row(i)[k] - expected[static_cast<size_t>(i)][static_cast<size_t>(k)]) <= 1e-12,
                      "sweep vs direct evaluation at entry " + std::to_string(i));
    c.require(std::abs(msgs.row(1)[0] - 0.8922) <= 5e-5, "entry (w=2,d=1) ~ (0.8922, 0.1078)");
    c.require(std::abs(msgs.row(1)[1] - 0.1078) <= 5e-5, "entry (w=2,d=1) ~ (0.8922, 0.1078)");
    c.require(std::abs(msgs.row(1)[0] - 0.91 / 1.02) <= 1e-12, "entry (w=2,d=1) exact value");
    c.require(std::abs(msgs.row(0)[0] - 0.5) <= 1e-12, "entry (w=1,d=1) uniform");
    c.require(std::abs(msgs.row(0)[1] - 0.5) <= 1e-12, "entry (w=1,d=1) uniform");
}

// ---------------------------------------------------------------- criterion 2
// Randomized invariants over >= 100 generated corpora.
void criterion2(Check& c) {
    Rng meta_rng(20240817);
    int corpora = 0;
    for (int rep = 0; rep < 110 && c.ok; ++rep, ++corpora) {
        const BagOfWords bow = testsupport::random_small_corpus(meta_rng, 20, 30);
        const int32_t k_count = 2 + static_cast<int32_t>(meta_rng.uniform_int(4));  // K <= 5
        Hyperparams hp;
        hp.num_topics = k_count;
        hp.alpha = 0.05;
        hp.beta = 0.05;
        const double wbeta = bow.vocab_size() * hp.beta;

        MessageState msgs = init_messages(bow, k_count, meta_rng.raw());
        MessageState scratch(bow.num_entries(), k_count);
        CountCache cache = rebuild_counts(bow, msgs);
        std::vector<double> tf(static_cast<size_t>(k_count)), pf(static_cast<size_t>(k_count));
        auto rule = [&](int64_t, const Entry& e, const CountCache& cc, std::span<const double> own,
                        std::span<double> out) {
            bp_message(cc.doc_row(e.doc), cc.word_row(e.word), cc.topic_total, own, e.weight, hp, wbeta, tf, pf,
                       out);
        };
        sweep_synchronous(bow, msgs, scratch, cache, rule);
        sweep_asynchronous(bow, msgs, cache, rule);

        // message normalization
        for (int64_t i = 0; i < msgs.rows() && c.ok; ++i) {
            double sum = 0.0;
            for (double v : msgs.row(i)) {
                c.require(v >= 0.0 && v <= 1.0, "message component in [0,1]");
                sum += v;
            }
            c.require(std::abs(sum - 1.0) <= 1e-12, "message row sum 1 +/- 1e-12");
        }

        // incremental vs rebuilt cache, 1e-9 relative
        const CountCache fresh = rebuild_counts(bow, msgs);
        for (size_t i = 0; i < fresh.doc_topic.size() && c.ok; ++i)
            c.require(std::abs(cache.doc_topic[i] - fresh.doc_topic[i]) <=
                          1e-9 * std::max(1.0, std::abs(fresh.doc_topic[i])),
                      "incremental doc cache vs rebuild");
        for (size_t i = 0; i < fresh.word_topic.size() && c.ok; ++i)
            c.require(std::abs(cache.word_topic[i] - fresh.word_topic[i]) <=
                          1e-9 * std::max(1.0, std::abs(fresh.word_topic[i])),
                      "incremental word cache vs rebuild");

        // theta/phi normalization
        const auto theta = estimate_theta(fresh, hp);
        for (int32_t d = 0; d < bow.num_docs() && c.ok; ++d) {
            double sum = 0.0;
            for (int32_t k = 0; k < k_count; ++k) sum += theta[static_cast<size_t>(d) * k_count + static_cast<size_t>(k)];
            c.require(std::abs(sum - 1.0) <= 1e-12, "theta row sum");
        }
        const auto phi = estimate_phi(fresh, hp);
        for (int32_t k = 0; k < k_count && c.ok; ++k) {
            double sum = 0.0;
            for (int32_t w = 0; w < bow.vocab_size(); ++w)
                sum += phi[static_cast<size_t>(w) * k_count + static_cast<size_t>(k)];
            c.require(std::abs(sum - 1.0) <= 1e-12, "phi column sum");
        }

        // GS exact count conservation
        GsState gs(bow, k_count, meta_rng.raw());
        Rng sampler(meta_rng.raw());
        gs_sweep(gs, hp, sampler);
        for (int32_t d = 0; d < bow.num_docs() && c.ok; ++d) {
            int64_t row = 0;
            for (int32_t k = 0; k < k_count; ++k)
                row += gs.n_doc_topic[static_cast<size_t>(d) * k_count + static_cast<size_t>(k)];
            c.require(row == static_cast<int64_t>(bow.doc_tokens(d)), "GS count conservation");
        }

        // link factor row-stochasticity
        if (bow.num_docs() >= 2) {
            std::vector<std::pair<int32_t, int32_t>> links;
            for (int32_t d = 0; d + 1 < bow.num_docs(); d += 2) links.emplace_back(d, d + 1);
            const LinkFactor f = build_link_factor(fresh, links);
            for (int32_t k = 0; k < k_count && c.ok; ++k) {
                double sum = 0.0;
                for (double v : f.row(k)) sum += v;
                c.require(std::abs(sum - 1.0) <= 1e-12, "link factor row sum");
            }
        }

        // topic-permutation invariance of perplexity and log_joint
        {
            ModelParams params;
            params.num_topics = k_count;
            params.theta = theta;
            params.phi = phi;
            const double base_perp = training_perplexity(bow, params);
            const double base_joint = log_joint(bow, fresh, hp);
            ModelParams swapped = params;
            CountCache swapped_cache = fresh;
            for (int32_t d = 0; d < bow.num_docs(); ++d)
                std::swap(swapped.theta[static_cast<size_t>(d) * k_count], swapped.theta[static_cast<size_t>(d) * k_count + 1]);
            for (int32_t w = 0; w < bow.vocab_size(); ++w) {
                std::swap(swapped.phi[static_cast<size_t>(w) * k_count], swapped.phi[static_cast<size_t>(w) * k_count + 1]);
                std::swap(swapped_cache.word_row(w)[0], swapped_cache.word_row(w)[1]);
            }
            for (int32_t d = 0; d < bow.num_docs(); ++d)
                std::swap(swapped_cache.doc_row(d)[0], swapped_cache.doc_row(d)[1]);
            std::swap(swapped_cache.topic_total[0], swapped_cache.topic_total[1]);
            c.require(std::abs(training_perplexity(bow, swapped) - base_perp) <= 1e-9 * base_perp,
                      "perplexity invariant under topic permutation");
            c.require(std::abs(log_joint(bow, swapped_cache, hp) - base_joint) <=
                          1e-9 * std::max(1.0, std::abs(base_joint)),
                      "log_joint invariant under topic permutation");
        }
    }
    c.note("corpora checked: " + std::to_string(corpora));
}

// ---------------------------------------------------------------- criterion 3
// Reduction identities: RTM(xi=0) == LDA-BP bit-identically; ATM with unique
// authors == LDA-BP within 1e-9 over 200 iterations; CVB0 == async BP on a
// 0/1 corpus bit-identically.
void criterion3(Check& c) {
    Rng rng(333);
    const BagOfWords bow = testsupport::random_small_corpus(rng, 16, 24);

    {
        Hyperparams hp;
        hp.num_topics = 4;
        hp.seed = 5;
        hp.xi = 0.0;
        hp.max_iters = 50;
        TrainOptions opts;
        opts.run_to_max = true;
        SideData side;
        side.links = std::vector<std::pair<int32_t, int32_t>>{{0, 1}};
        const RtmResult rtm = train_rtm(bow, side, hp, opts);
        const TrainResult lda = train_lda(bow, hp, Algo::bp, opts);
        c.require(rtm.history.size() == lda.history.size(), "rtm(xi=0) history length");
        for (size_t i = 0; i < rtm.history.size(); ++i) {
            c.require(rtm.history[i].perplexity == lda.history[i].perplexity, "rtm(xi=0) perplexity bit-equal");
            c.require(rtm.history[i].max_delta == lda.history[i].max_delta, "rtm(xi=0) delta bit-equal");
        }
        c.require(rtm.params.theta == lda.params.theta, "rtm(xi=0) theta bit-equal");
        c.require(rtm.params.phi == lda.params.phi, "rtm(xi=0) phi bit-equal");
    }

    {
        Hyperparams hp;
        hp.num_topics = 4;
        hp.seed = 6;
        hp.max_iters = 200;
        TrainOptions opts;
        opts.run_to_max = true;
        SideData side;
        std::vector<std::vector<int32_t>> authors;
        for (int32_t d = 0; d < bow.num_docs(); ++d) authors.push_back({d});
        side.authors = authors;
        side.num_authors = bow.num_docs();
        const AtmResult atm = train_atm(bow, side, hp, opts);
        const TrainResult lda = train_lda(bow, hp, Algo::bp, opts);
        c.require(atm.history.size() == lda.history.size(), "atm reduction history length (200 iterations)");
        for (size_t i = 0; i < atm.history.size(); ++i)
            c.require(std::abs(atm.history[i].perplexity - lda.history[i].perplexity) <=
                          1e-9 * lda.history[i].perplexity,
                      "atm reduction perplexity within 1e-9");
        for (size_t i = 0; i < atm.theta_author.size(); ++i)
            c.require(std::abs(atm.theta_author[i] - lda.params.theta[i]) <= 1e-9,
                      "atm theta_a vs lda theta within 1e-9");
        for (size_t i = 0; i < atm.params.phi.size(); ++i)
            c.require(std::abs(atm.params.phi[i] - lda.params.phi[i]) <= 1e-9, "atm phi vs lda phi within 1e-9");
    }

    {
        std::vector<std::tuple<int32_t, int32_t, double>> triples;
        Rng gen(12);
        for (int32_t d = 0; d < 12; ++d)
            for (int32_t w = 0; w < 15; ++w)
                if (gen.uniform01() < 0.35 || (d == 11 && w == 14)) triples.emplace_back(d, w, 1.0);
        const BagOfWords zero_one = bow_from_triples(12, 15, triples);
        Hyperparams hp;
        hp.num_topics = 3;
        hp.seed = 7;
        hp.max_iters = 40;
        TrainOptions opts;
        opts.schedule = Schedule::asynchronous;
        opts.run_to_max = true;
        const TrainResult bp = train_lda(zero_one, hp, Algo::bp, opts);
        const TrainResult cvb0 = train_lda(zero_one, hp, Algo::cvb0, opts);
        c.require(bp.messages.data() == cvb0.messages.data(), "cvb0 messages bit-equal to async bp");
        c.require(bp.params.theta == cvb0.params.theta, "cvb0 theta bit-equal");
        c.require(bp.params.phi == cvb0.params.phi, "cvb0 phi bit-equal");
        for (size_t i = 0; i < bp.history.size(); ++i)
            c.require(bp.history[i].perplexity == cvb0.history[i].perplexity, "cvb0 trajectory bit-equal");
    }
}

// ---------------------------------------------------------------- criterion 4
// Synthetic recovery at desk scale: K=5, D=500, W=200, N_d=100. Extra
// documents drawn from the same topics serve as the predictive test set.
void criterion4(Check& c) {
    const auto gen = testsupport::generate_lda_corpus(600, 200, 5, 100, 0.1, 0.1, 42);
    std::vector<int32_t> train_ids(500), test_ids(100);
    std::iota(train_ids.begin(), train_ids.end(), 0);
    std::iota(test_ids.begin(), test_ids.end(), 500);
    const BagOfWords train_bow = subset_docs(gen.bow, train_ids);
    const BagOfWords test_bow = subset_docs(gen.bow, test_ids);

    Hyperparams hp;
    hp.num_topics = 5;
    hp.alpha = 0.1;
    hp.beta = 0.1;
    hp.seed = 1;
    hp.max_iters = 1000;
    TrainOptions opts;
    opts.run_to_max = true;  // fixed-budget protocol for phi estimation
    const TrainResult r = train_lda(train_bow, hp, Algo::bp, opts);
    c.note("training iterations: " + std::to_string(r.iterations));

    // best-permutation mean total-variation distance over K=5
    std::vector<int32_t> perm{0, 1, 2, 3, 4};
    double best = 1e9;
    do {
        double total = 0.0;
        for (int32_t k = 0; k < 5; ++k) {
            double tv = 0.0;
            for (int32_t w = 0; w < 200; ++w)
                tv += std::abs(r.params.phi[static_cast<size_t>(w) * 5 + static_cast<size_t>(k)] -
                               gen.true_phi[static_cast<size_t>(w) * 5 + static_cast<size_t>(perm[static_cast<size_t>(k)])]);
            total += 0.5 * tv;
        }
        best = std::min(best, total / 5.0);
    } while (std::next_permutation(perm.begin(), perm.end()));
    c.note("best-permutation mean TV distance: " + fmt(best));
    c.require(best < 0.1, "mean TV distance < 0.1 (got " + fmt(best) + ")");

    const PredictiveResult pr = predictive_perplexity(r.params.phi, 200, 5, test_bow, hp, Algo::bp, 99);
    c.note("predictive perplexity: " + fmt(pr.perplexity));
    c.require(pr.perplexity <= 0.6 * 200.0,
              "predictive perplexity beats uniform bound by >= 40% (got " + fmt(pr.perplexity) + ")");
}

// ---------------------------------------------------------------- criterion 5
// Relative algorithm ordering on the criterion-4 corpus: five-fold predictive
// perplexity at K in {10, 25, 50}: BP <= 0.98 * VB and BP <= GS.
void criterion5(Check& c) {
    const auto gen = testsupport::generate_lda_corpus(600, 200, 5, 100, 0.1, 0.1, 42);
    std::vector<int32_t> train_ids(500);
    std::iota(train_ids.begin(), train_ids.end(), 0);
    const BagOfWords bow = subset_docs(gen.bow, train_ids);
    for (int32_t k : {10, 25, 50}) {
        Hyperparams hp;
        hp.num_topics = k;
        hp.alpha = 0.01;
        hp.beta = 0.01;
        hp.seed = 2;
        hp.max_iters = 500;
        TrainOptions opts;
        opts.run_to_max = true;  // 500 training iterations each
        double mean_perp[3] = {0, 0, 0};
        const Algo algos[3] = {Algo::bp, Algo::vb, Algo::gs};
        for (int a = 0; a < 3; ++a) {
            const CvSummary cv = cross_validate(bow, hp, ModelKind::lda, algos[a], opts, nullptr, 5,
                                                /*fold_seed=*/17, 0.1, 1000, /*threads=*/0);
            mean_perp[a] = cv.mean_perplexity;
        }
        c.note("K=" + std::to_string(k) + ": bp=" + fmt(mean_perp[0]) + " vb=" + fmt(mean_perp[1]) +
               " gs=" + fmt(mean_perp[2]));
        c.require(mean_perp[0] <= 0.98 * mean_perp[1],
                  "BP <= VB - 2% at K=" + std::to_string(k));
        c.require(mean_perp[0] <= mean_perp[2], "BP <= GS at K=" + std::to_string(k));
    }
}

// ---------------------------------------------------------------- criterion 6
// Convergence ordering: BP's training perplexity delta falls below one within
// 300 iterations; VB converges in fewer iterations, GS in more.
void criterion6(Check& c) {
    const auto gen = testsupport::generate_lda_corpus(600, 200, 5, 100, 0.1, 0.1, 42);
    std::vector<int32_t> train_ids(500);
    std::iota(train_ids.begin(), train_ids.end(), 0);
    const BagOfWords bow = subset_docs(gen.bow, train_ids);
    Hyperparams hp;
    hp.num_topics = 50;
    hp.alpha = 0.01;
    hp.beta = 0.01;
    hp.seed = 3;
    hp.max_iters = 500;
    TrainOptions opts;
    opts.run_to_max = true;

    // training perplexity is evaluated every 10 iterations; convergence is the
    // first evaluation whose change from the previous one is under one
    auto first_converged = [](const std::vector<IterationStats>& history) {
        double prev = history[9].perplexity;
        for (size_t i = 19; i < history.size(); i += 10) {
            if (std::abs(history[i].perplexity - prev) < 1.0) return history[i].iteration;
            prev = history[i].perplexity;
        }
        return static_cast<int32_t>(history.size()) + 1;
    };

    const int32_t t_bp = first_converged(train_lda(bow, hp, Algo::bp, opts).history);
    const int32_t t_vb = first_converged(train_lda(bow, hp, Algo::vb, opts).history);
    const int32_t t_gs = first_converged(train_lda(bow, hp, Algo::gs, opts).history);
    c.note("convergence iterations: vb=" + std::to_string(t_vb) + " bp=" + std::to_string(t_bp) +
           " gs=" + std::to_string(t_gs));
    c.require(t_bp <= 300, "BP converges within 300 iterations");
    c.require(t_vb < t_bp, "VB converges in fewer iterations than BP");
    c.require(t_gs > t_bp, "GS converges in more iterations than BP");
}

// ---------------------------------------------------------------- criterion 7
// L-LDA (labels = generating topics) has predictive perplexity >= LDA's.
void criterion7(Check& c) {
    const auto gen = testsupport::generate_lda_corpus(360, 150, 5, 80, 0.1, 0.1, 777);
    std::vector<int32_t> train_ids(300), test_ids(60);
    std::iota(train_ids.begin(), train_ids.end(), 0);
    std::iota(test_ids.begin(), test_ids.end(), 300);
    const BagOfWords train_bow = subset_docs(gen.bow, train_ids);
    const BagOfWords test_bow = subset_docs(gen.bow, test_ids);
    std::vector<std::vector<int32_t>> train_labels(gen.labels.begin(), gen.labels.begin() + 300);
    Hyperparams hp;
    hp.num_topics = 5;
    hp.alpha = 0.01;
    hp.beta = 0.01;
    hp.seed = 4;
    hp.max_iters = 500;

    TrainOptions plain;
    plain.run_to_max = true;  // 500 iterations each, same initialization
    const TrainResult lda = train_lda(train_bow, hp, Algo::bp, plain);
    TrainOptions masked = plain;
    LabelMask mask;
    mask.allowed = train_labels;
    masked.mask = std::move(mask);
    const TrainResult llda = train_lda(train_bow, hp, Algo::bp, masked);

    const PredictiveResult p_lda = predictive_perplexity(lda.params.phi, 150, 5, test_bow, hp, Algo::bp, 5);
    const PredictiveResult p_llda = predictive_perplexity(llda.params.phi, 150, 5, test_bow, hp, Algo::bp, 5);
    c.note("lda=" + fmt(p_lda.perplexity) + " l-lda=" + fmt(p_llda.perplexity));
    c.require(p_llda.perplexity >= p_lda.perplexity, "L-LDA perplexity >= LDA perplexity");
}

// ---------------------------------------------------------------- criterion 8
// Block-community corpus: RTM-derived Hadamard features beat LDA-derived
// features at held-out link prediction; both beat the all-positive baseline.
void criterion8(Check& c) {
    const auto corpus = testsupport::generate_community_corpus(
        /*docs_per_community=*/60, /*num_communities=*/2, /*topics_per_community=*/2,
        /*vocab_size=*/80, /*doc_tokens=*/40, /*links_per_community=*/150, /*background_share=*/0.35,
        /*seed=*/2024);
    Hyperparams hp;
    hp.num_topics = 4;
    hp.alpha = 0.01;
    hp.beta = 0.01;
    hp.seed = 6;
    hp.xi = 0.15;
    hp.max_iters = 300;

    TrainOptions opts;
    opts.run_to_max = true;
    const RtmResult rtm = train_rtm(corpus.bow, corpus.side, hp, opts);
    Hyperparams hp_lda = hp;
    hp_lda.xi = 0.0;
    const TrainResult lda = train_lda(corpus.bow, hp_lda, Algo::bp, opts);

    const auto& links = *corpus.side.links;
    const LinkPredictionResult r_rtm =
        link_prediction(rtm.params.theta, corpus.bow.num_docs(), 4, links, 1.0, 99);
    const LinkPredictionResult r_lda =
        link_prediction(lda.params.theta, corpus.bow.num_docs(), 4, links, 1.0, 99);
    c.note("F(rtm)=" + fmt(r_rtm.metrics.f_measure) + " F(lda)=" + fmt(r_lda.metrics.f_measure));
    c.require(r_rtm.metrics.f_measure > r_lda.metrics.f_measure, "RTM features beat LDA features");
    c.require(r_rtm.metrics.f_measure > 2.0 / 3.0, "RTM beats the all-positive baseline");
    c.require(r_lda.metrics.f_measure > 2.0 / 3.0, "LDA beats the all-positive baseline");
}

// ---------------------------------------------------------------- criterion 9
// Digamma identities to 1e-10.
void criterion9(Check& c) {
    constexpr double kEulerMascheroni = 0.57721566490153286;
    c.require(std::abs(digamma(1.0) + kEulerMascheroni) <= 1e-10, "digamma(1) = -gamma");
    c.require(std::abs(digamma(0.5) - (-kEulerMascheroni - 2.0 * std::log(2.0))) <= 1e-10,
              "digamma(1/2) = -gamma - 2 ln 2");
    for (double x = 0.01; x <= 100.0; x *= 1.03) {
        const double lhs = digamma(x + 1.0);
        const double rhs = digamma(x) + 1.0 / x;
        if (std::abs(lhs - rhs) > 1e-10) {
            c.require(false, "recurrence at x=" + fmt(x));
            return;
        }
    }
    for (double x = 0.01; x <= 100.0; x += 0.37) {
        if (std::abs(digamma(x + 1.0) - digamma(x) - 1.0 / x) > 1e-10) {
            c.require(false, "recurrence at x=" + fmt(x));
            return;
        }
    }
}

// --------------------------------------------------------------- criterion 10
// Performance scaling: doubling entries or K at most 2.5x's the BP sweep;
// GS sweeps cost more than BP sweeps when N_d/W_d >= 2.
void criterion10(Check& c) {
    auto median_bp_sweep = [](const BagOfWords& bow, int32_t k_count) {
        Hyperparams hp;
        hp.num_topics = k_count;
        const double wbeta = bow.vocab_size() * hp.beta;
        MessageState msgs = init_messages(bow, k_count, 1);
        MessageState scratch(bow.num_entries(), k_count);
        CountCache cache = rebuild_counts(bow, msgs);
        std::vector<double> tf(static_cast<size_t>(k_count)), pf(static_cast<size_t>(k_count));
        auto rule = [&](int64_t, const Entry& e, const CountCache& cc, std::span<const double> own,
                        std::span<double> out) {
            bp_message(cc.doc_row(e.doc), cc.word_row(e.word), cc.topic_total, own, e.weight, hp, wbeta, tf, pf,
                       out);
        };
        sweep_synchronous(bow, msgs, scratch, cache, rule);  // warmup
        std::vector<double> times;
        for (int rep = 0; rep < 7; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            sweep_synchronous(bow, msgs, scratch, cache, rule);
            times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        }
        std::sort(times.begin(), times.end());
        return times[times.size() / 2];
    };

    const auto base = testsupport::generate_lda_corpus(400, 300, 8, 60, 0.1, 0.1, 11);
    // exact doubling of the nonzero count: append a shifted copy of the corpus
    std::vector<std::tuple<int32_t, int32_t, double>> doubled;
    for (const Entry& e : base.bow.entries()) doubled.emplace_back(e.doc, e.word, e.weight);
    for (const Entry& e : base.bow.entries()) doubled.emplace_back(e.doc + 400, e.word, e.weight);
    const BagOfWords big = bow_from_triples(800, 300, doubled);
    c.note("entries: " + std::to_string(base.bow.num_entries()) + " -> " + std::to_string(big.num_entries()));

    const double t_base = median_bp_sweep(base.bow, 25);
    const double t_double_nnz = median_bp_sweep(big, 25);
    c.note("bp sweep: " + fmt(t_base) + "s -> " + fmt(t_double_nnz) + "s when entries double");
    c.require(t_double_nnz <= 2.5 * t_base, "doubled entries cost <= 2.5x (got " +
                                                fmt(t_double_nnz / t_base) + "x)");

    const double t_double_k = median_bp_sweep(base.bow, 50);
    c.note("bp sweep: " + fmt(t_base) + "s -> " + fmt(t_double_k) + "s when K doubles");
    c.require(t_double_k <= 2.5 * t_base, "doubled K cost <= 2.5x (got " + fmt(t_double_k / t_base) + "x)");

    // token-heavy corpus: N_d/W_d >= 2
    const auto heavy = testsupport::generate_lda_corpus(300, 100, 8, 250, 0.1, 0.1, 12);
    double ratio_sum = 0.0;
    for (int32_t d = 0; d < heavy.bow.num_docs(); ++d)
        ratio_sum += heavy.bow.doc_tokens(d) / std::max(1, heavy.bow.doc_width(d));
    c.note("mean N_d/W_d = " + fmt(ratio_sum / heavy.bow.num_docs()));

    const double t_bp_heavy = median_bp_sweep(heavy.bow, 25);
    Hyperparams hp_gs;
    hp_gs.num_topics = 25;
    GsState gs(heavy.bow, 25, 3);
    Rng sampler(4);
    gs_sweep(gs, hp_gs, sampler);  // warmup
    std::vector<double> gs_times;
    for (int rep = 0; rep < 7; ++rep) {
        const auto t0 = std::chrono::steady_clock::now();
        gs_sweep(gs, hp_gs, sampler);
        gs_times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    std::sort(gs_times.begin(), gs_times.end());
    const double t_gs_heavy = gs_times[gs_times.size() / 2];
    c.note("heavy corpus per-sweep: bp=" + fmt(t_bp_heavy) + "s gs=" + fmt(t_gs_heavy) + "s");
    c.require(t_gs_heavy > t_bp_heavy, "GS sweep costs more than BP when N_d/W_d >= 2");
}

struct Criterion {
    int id;
    const char* title;
    void (*fn)(Check&);
    double budget_seconds;
};

const Criterion kCriteria[] = {
    {1, "oracle equivalence (micro)", criterion1, 1.0},
    {2, "randomized invariant suite", criterion2, 30.0},
    {3, "reduction identities", criterion3, 60.0},
    {4, "synthetic recovery", criterion4, 60.0},
    {5, "relative algorithm ordering", criterion5, 900.0},
    {6, "convergence ordering", criterion6, 600.0},
    {7, "labeled vs unlabeled perplexity", criterion7, 300.0},
    {8, "link prediction features", criterion8, 300.0},
    {9, "digamma numerics", criterion9, 1.0},
    {10, "performance scaling", criterion10, 300.0},
};

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    if (argc > 1) only = std::atoi(argv[1]);
    bool all_ok = true;
    for (const Criterion& crit : kCriteria) {
        if (only != 0 && crit.id != only) continue;
        Check check;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            crit.fn(check);
        } catch (const std::exception& e) {
            check.require(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > crit.budget_seconds) {
            check.ok = false;
            check.log << "    failed: runtime " << fmt(secs) << "s exceeds budget " << fmt(crit.budget_seconds)
                      << "s\n";
        }
        std::cout << (check.ok ? "PASS" : "FAIL") << " criterion " << crit.id << ": " << crit.title << " ("
                  << fmt(secs) << "s)\n"
                  << check.log.str();
        all_ok = all_ok && check.ok;
    }
    return all_ok ? 0 : 1;
}
