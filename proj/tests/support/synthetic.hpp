#pragma once

// Deterministic corpus generators used by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "topicbp/corpus.hpp"
#include "topicbp/rng.hpp"

namespace testsupport {

using topicbp::BagOfWords;
using topicbp::Entry;
using topicbp::Rng;
using topicbp::SideData;

// Gamma/Dirichlet sampling built on the project Rng so generated corpora are
// reproducible everywhere (std:: distributions are implementation-defined).
class DistRng {
public:
    explicit DistRng(uint64_t seed) : rng_(seed) {}

    Rng& base() { return rng_; }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = rng_.uniform01();
        const double u2 = rng_.uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

    // Marsaglia-Tsang
    double gamma(double shape) {
        if (shape < 1.0) {
            const double u = rng_.uniform01();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = rng_.uniform01();
            if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
        }
    }

    void dirichlet(double concentration, std::vector<double>& out) {
        double sum = 0.0;
        for (double& v : out) {
            v = gamma(concentration);
            sum += v;
        }
        if (sum <= 0.0) {
            for (double& v : out) v = 1.0 / static_cast<double>(out.size());
            return;
        }
        for (double& v : out) v /= sum;
    }

    int32_t categorical(const std::vector<double>& probs) {
        const double u = rng_.uniform01();
        double acc = 0.0;
        for (size_t k = 0; k + 1 < probs.size(); ++k) {
            acc += probs[k];
            if (u < acc) return static_cast<int32_t>(k);
        }
        return static_cast<int32_t>(probs.size() - 1);
    }

private:
    Rng rng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

inline BagOfWords bow_from_triples(int32_t num_docs, int32_t vocab_size,
                                   const std::vector<std::tuple<int32_t, int32_t, double>>& triples) {
    std::vector<Entry> entries;
    for (const auto& [d, w, x] : triples) entries.push_back({d, w, x});
    return BagOfWords(num_docs, vocab_size, std::move(entries));
}

struct GeneratedCorpus {
    BagOfWords bow;
    std::vector<double> true_theta;                // D x K
    std::vector<double> true_phi;                  // W x K (column k sums to 1 over w)
    std::vector<std::vector<int32_t>> labels;      // topics holding >= share_threshold of each doc's tokens
};

// Draws a corpus from the smoothed generative model: theta_d ~ Dir(alpha),
// phi_k ~ Dir(beta), each of doc_tokens words via z ~ Cat(theta), w ~ Cat(phi_z).
inline GeneratedCorpus generate_lda_corpus(int32_t num_docs, int32_t vocab_size, int32_t num_topics,
                                           int32_t doc_tokens, double gen_alpha, double gen_beta, uint64_t seed,
                                           double label_share = 0.1) {
    DistRng rng(seed);
    std::vector<std::vector<double>> topic_word(static_cast<size_t>(num_topics),
                                                std::vector<double>(static_cast<size_t>(vocab_size)));
    for (auto& row : topic_word) rng.dirichlet(gen_beta, row);

    GeneratedCorpus out{BagOfWords(1, 1, {{0, 0, 1.0}}), {}, {}, {}};
    out.true_theta.assign(static_cast<size_t>(num_docs) * num_topics, 0.0);
    out.true_phi.assign(static_cast<size_t>(vocab_size) * num_topics, 0.0);
    for (int32_t k = 0; k < num_topics; ++k)
        for (int32_t w = 0; w < vocab_size; ++w)
            out.true_phi[static_cast<size_t>(w) * num_topics + static_cast<size_t>(k)] =
                topic_word[static_cast<size_t>(k)][static_cast<size_t>(w)];

    std::vector<double> theta(static_cast<size_t>(num_topics));
    std::vector<Entry> entries;
    std::vector<int32_t> counts(static_cast<size_t>(vocab_size));
    out.labels.resize(static_cast<size_t>(num_docs));
    std::vector<int32_t> topic_use(static_cast<size_t>(num_topics));
    for (int32_t d = 0; d < num_docs; ++d) {
        rng.dirichlet(gen_alpha, theta);
        for (int32_t k = 0; k < num_topics; ++k)
            out.true_theta[static_cast<size_t>(d) * num_topics + static_cast<size_t>(k)] =
                theta[static_cast<size_t>(k)];
        std::fill(counts.begin(), counts.end(), 0);
        std::fill(topic_use.begin(), topic_use.end(), 0);
        for (int32_t i = 0; i < doc_tokens; ++i) {
            const int32_t z = rng.categorical(theta);
            ++topic_use[static_cast<size_t>(z)];
            const int32_t w = rng.categorical(topic_word[static_cast<size_t>(z)]);
            ++counts[static_cast<size_t>(w)];
        }
        for (int32_t w = 0; w < vocab_size; ++w)
            if (counts[static_cast<size_t>(w)] > 0)
                entries.push_back({d, w, static_cast<double>(counts[static_cast<size_t>(w)])});
        for (int32_t k = 0; k < num_topics; ++k)
            if (topic_use[static_cast<size_t>(k)] >= label_share * doc_tokens)
                out.labels[static_cast<size_t>(d)].push_back(k);
        if (out.labels[static_cast<size_t>(d)].empty()) {
            int32_t best = 0;
            for (int32_t k = 1; k < num_topics; ++k)
                if (topic_use[static_cast<size_t>(k)] > topic_use[static_cast<size_t>(best)]) best = k;
            out.labels[static_cast<size_t>(d)].push_back(best);
        }
    }
    out.bow = BagOfWords(num_docs, vocab_size, std::move(entries));
    return out;
}

struct CommunityCorpus {
    BagOfWords bow;
    SideData side;                    // within-community links
    std::vector<int32_t> community;   // per document
};

// Documents belong to communities; each community owns a block of topics and
// every document mixes its community topics with a shared background topic,
// which blurs the word signal so link structure carries information.
inline CommunityCorpus generate_community_corpus(int32_t docs_per_community, int32_t num_communities,
                                                 int32_t topics_per_community, int32_t vocab_size,
                                                 int32_t doc_tokens, int32_t links_per_community,
                                                 double background_share, uint64_t seed) {
    DistRng rng(seed);
    const int32_t num_docs = docs_per_community * num_communities;
    const int32_t num_topics = topics_per_community * num_communities;
    std::vector<std::vector<double>> topic_word(static_cast<size_t>(num_topics),
                                                std::vector<double>(static_cast<size_t>(vocab_size)));
    for (auto& row : topic_word) rng.dirichlet(0.05, row);
    std::vector<double> background(static_cast<size_t>(vocab_size));
    rng.dirichlet(0.5, background);

    CommunityCorpus out{BagOfWords(1, 1, {{0, 0, 1.0}}), {}, {}};
    out.community.resize(static_cast<size_t>(num_docs));
    std::vector<Entry> entries;
    std::vector<int32_t> counts(static_cast<size_t>(vocab_size));
    std::vector<double> mix(static_cast<size_t>(topics_per_community));
    for (int32_t d = 0; d < num_docs; ++d) {
        const int32_t comm = d / docs_per_community;
        out.community[static_cast<size_t>(d)] = comm;
        rng.dirichlet(0.5, mix);
        std::fill(counts.begin(), counts.end(), 0);
        for (int32_t i = 0; i < doc_tokens; ++i) {
            int32_t w;
            if (rng.base().uniform01() < background_share) {
                w = rng.categorical(background);
            } else {
                const int32_t z = comm * topics_per_community + rng.categorical(mix);
                w = rng.categorical(topic_word[static_cast<size_t>(z)]);
            }
            ++counts[static_cast<size_t>(w)];
        }
        for (int32_t w = 0; w < vocab_size; ++w)
            if (counts[static_cast<size_t>(w)] > 0)
                entries.push_back({d, w, static_cast<double>(counts[static_cast<size_t>(w)])});
    }
    out.bow = BagOfWords(num_docs, vocab_size, std::move(entries));

    std::set<std::pair<int32_t, int32_t>> links;
    for (int32_t comm = 0; comm < num_communities; ++comm) {
        const int32_t lo = comm * docs_per_community;
        int32_t made = 0;
        while (made < links_per_community) {
            const int32_t a = lo + static_cast<int32_t>(rng.base().uniform_int(static_cast<uint64_t>(docs_per_community)));
            const int32_t b = lo + static_cast<int32_t>(rng.base().uniform_int(static_cast<uint64_t>(docs_per_community)));
            if (a == b) continue;
            if (links.insert({std::min(a, b), std::max(a, b)}).second) ++made;
        }
    }
    out.side.links = std::vector<std::pair<int32_t, int32_t>>(links.begin(), links.end());
    return out;
}

// Small random corpus for randomized invariant checks.
inline BagOfWords random_small_corpus(Rng& rng, int32_t max_docs = 20, int32_t max_words = 30) {
    const int32_t num_docs = 2 + static_cast<int32_t>(rng.uniform_int(static_cast<uint64_t>(max_docs - 1)));
    const int32_t vocab_size = 3 + static_cast<int32_t>(rng.uniform_int(static_cast<uint64_t>(max_words - 2)));
    std::vector<Entry> entries;
    for (int32_t d = 0; d < num_docs; ++d) {
        const int32_t width = 1 + static_cast<int32_t>(rng.uniform_int(std::min<uint64_t>(8, vocab_size)));
        std::set<int32_t> words;
        while (static_cast<int32_t>(words.size()) < width)
            words.insert(static_cast<int32_t>(rng.uniform_int(static_cast<uint64_t>(vocab_size))));
        for (int32_t w : words)
            entries.push_back({d, w, static_cast<double>(1 + rng.uniform_int(4))});
    }
    return BagOfWords(num_docs, vocab_size, std::move(entries));
}

}  // namespace testsupport
