// Command-line driver: train/eval/cv/top-words/predict-links over UCI
// bag-of-words corpora. Exit codes: 0 success, 1 configuration error,
// 2 IO/format error, 3 numerical fault.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "topicbp/atm.hpp"
#include "topicbp/corpus.hpp"
#include "topicbp/engine.hpp"
#include "topicbp/eval.hpp"
#include "topicbp/io.hpp"
#include "topicbp/lda.hpp"
#include "topicbp/rtm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace topicbp;

namespace {

struct RunConfig {
    std::string corpus, vocab, authors, links, labels;
    std::string model = "lda";
    std::string algo = "bp";
    std::string schedule = "sync";
    std::string weighting = "raw_count";
    std::string k_list = "10";
    double alpha = 0.01;
    double beta = 0.01;
    double xi = 0.15;
    double lambda = 1e-5;
    double holdout = 0.1;
    double negative_ratio = 1.0;
    int32_t max_iters = 1000;
    int32_t folds = 5;
    int32_t top_n = 10;
    uint64_t seed = 0;
    std::string out;
};

std::vector<int32_t> parse_k_list(const std::string& spec) {
    std::vector<int32_t> ks;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            ks.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw ConfigError("invalid K value '" + tok + "'");
        }
    }
    if (ks.empty()) throw ConfigError("at least one K value is required");
    return ks;
}

ModelKind parse_model(const std::string& s) {
    if (s == "lda") return ModelKind::lda;
    if (s == "atm") return ModelKind::atm;
    if (s == "rtm") return ModelKind::rtm;
    throw ConfigError("unknown model '" + s + "' (expected lda, atm or rtm)");
}

Algo parse_algo(const std::string& s) {
    if (s == "bp") return Algo::bp;
    if (s == "sibp") return Algo::sibp;
    if (s == "vb") return Algo::vb;
    if (s == "gs") return Algo::gs;
    if (s == "cvb0") return Algo::cvb0;
    throw ConfigError("unknown algo '" + s + "' (expected bp, sibp, vb, gs or cvb0)");
}

Schedule parse_schedule(const std::string& s) {
    if (s == "sync") return Schedule::synchronous;
    if (s == "async") return Schedule::asynchronous;
    throw ConfigError("unknown schedule '" + s + "' (expected sync or async)");
}

WeightingScheme parse_weighting(const std::string& s) {
    if (s == "raw_count") return WeightingScheme::raw_count;
    if (s == "tf") return WeightingScheme::tf;
    if (s == "tf_idf") return WeightingScheme::tf_idf;
    throw ConfigError("unknown weighting '" + s + "' (expected raw_count, tf or tf_idf)");
}

BagOfWords load_corpus_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read corpus file " + path);
    return load_uci_bow(in);
}

Vocabulary load_vocab_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read vocabulary file " + path);
    return load_vocabulary(in);
}

SideData load_side_files(const RunConfig& cfg, int32_t num_docs) {
    std::optional<std::ifstream> a, l, b;
    if (!cfg.authors.empty()) {
        a.emplace(cfg.authors);
        if (!*a) throw IoError("cannot read authors file " + cfg.authors);
    }
    if (!cfg.links.empty()) {
        l.emplace(cfg.links);
        if (!*l) throw IoError("cannot read links file " + cfg.links);
    }
    if (!cfg.labels.empty()) {
        b.emplace(cfg.labels);
        if (!*b) throw IoError("cannot read labels file " + cfg.labels);
    }
    return load_side_data(num_docs, a ? &*a : nullptr, l ? &*l : nullptr, b ? &*b : nullptr);
}

// Removes everything written so far if a run fails partway.
struct OutputGuard {
    std::vector<fs::path> written;
    bool committed = false;
    void track(const fs::path& p) { written.push_back(p); }
    ~OutputGuard() {
        if (committed) return;
        std::error_code ec;
        for (const fs::path& p : written) fs::remove(p, ec);
    }
};

json base_meta(const RunConfig& cfg, const char* command) {
    json meta;
    meta["command"] = command;
    meta["corpus"] = cfg.corpus;
    meta["vocab"] = cfg.vocab;
    meta["authors"] = cfg.authors;
    meta["links"] = cfg.links;
    meta["labels"] = cfg.labels;
    meta["model"] = cfg.model;
    meta["algo"] = cfg.algo;
    meta["schedule"] = cfg.schedule;
    meta["weighting"] = cfg.weighting;
    meta["alpha"] = cfg.alpha;
    meta["beta"] = cfg.beta;
    meta["xi"] = cfg.xi;
    meta["lambda"] = cfg.lambda;
    meta["max_iters"] = cfg.max_iters;
    meta["seed"] = cfg.seed;
    meta["holdout"] = cfg.holdout;
    meta["folds"] = cfg.folds;
    return meta;
}

void validate_train_config(const RunConfig& cfg, ModelKind model, Algo algo, const SideData& side) {
    if (model == ModelKind::atm && !side.authors.has_value())
        throw ConfigError("atm requires --authors");
    if (model == ModelKind::rtm && cfg.xi > 0.0 && (!side.links.has_value() || side.links->empty()))
        throw ConfigError("rtm with xi > 0 requires --links");
    if ((algo == Algo::gs || algo == Algo::cvb0) && cfg.weighting != "raw_count")
        throw ConfigError("gs and cvb0 require raw_count weighting");
    if (model != ModelKind::lda && algo != Algo::bp)
        throw ConfigError("atm and rtm are trained by bp");
    if (side.labels.has_value() && model != ModelKind::lda)
        throw ConfigError("labels (L-LDA) apply to model lda only");
    if (side.labels.has_value() && algo != Algo::bp && algo != Algo::sibp)
        throw ConfigError("labels (L-LDA) require algo bp or sibp");
}

Hyperparams make_hp(const RunConfig& cfg, int32_t k) {
    Hyperparams hp;
    hp.num_topics = k;
    hp.alpha = cfg.alpha;
    hp.beta = cfg.beta;
    hp.xi = cfg.xi;
    hp.lambda = cfg.lambda;
    hp.max_iters = cfg.max_iters;
    hp.seed = cfg.seed;
    hp.validate();
    return hp;
}

int cmd_train(const RunConfig& cfg) {
    if (cfg.corpus.empty() || cfg.out.empty()) throw ConfigError("train requires --corpus and --out");
    const ModelKind model = parse_model(cfg.model);
    const Algo algo = parse_algo(cfg.algo);
    const Schedule schedule = parse_schedule(cfg.schedule);
    const WeightingScheme weighting = parse_weighting(cfg.weighting);
    const std::vector<int32_t> ks = parse_k_list(cfg.k_list);

    const BagOfWords raw = load_corpus_file(cfg.corpus);
    const SideData side = load_side_files(cfg, raw.num_docs());
    validate_train_config(cfg, model, algo, side);
    const BagOfWords bow = apply_weighting(raw, weighting);
    if (!bow.empty_docs().empty())
        std::cerr << "note: " << bow.empty_docs().size() << " document(s) have no entries\n";

    for (int32_t k : ks) {
        const fs::path dir = ks.size() == 1 ? fs::path(cfg.out) : fs::path(cfg.out) / ("k" + std::to_string(k));
        fs::create_directories(dir);
        OutputGuard guard;
        const Hyperparams hp = make_hp(cfg, k);
        TrainOptions opts;
        opts.schedule = schedule;
        if (side.labels.has_value()) {
            LabelMask mask;
            mask.allowed = *side.labels;
            mask.validate(bow.num_docs(), k);
            opts.mask = std::move(mask);
        }

        json meta = base_meta(cfg, "train");
        meta["k"] = k;
        meta["num_docs"] = bow.num_docs();
        meta["vocab_size"] = bow.vocab_size();

        std::vector<IterationStats> history;
        int32_t iterations = 0;
        bool converged = false;
        double final_perplexity = 0.0;
        if (model == ModelKind::lda) {
            TrainResult r = train_lda(bow, hp, algo, opts);
            io::write_matrix_csv(dir / "theta.csv", r.params.theta, bow.num_docs(), k);
            guard.track(dir / "theta.csv");
            io::write_matrix_csv(dir / "phi.csv", r.params.phi, bow.vocab_size(), k);
            guard.track(dir / "phi.csv");
            history = std::move(r.history);
            iterations = r.iterations;
            converged = r.converged;
            final_perplexity = history.back().perplexity;
        } else if (model == ModelKind::atm) {
            AtmResult r = train_atm(bow, side, hp, opts);
            io::write_matrix_csv(dir / "theta.csv", r.params.theta, bow.num_docs(), k);
            guard.track(dir / "theta.csv");
            io::write_matrix_csv(dir / "phi.csv", r.params.phi, bow.vocab_size(), k);
            guard.track(dir / "phi.csv");
            io::write_matrix_csv(dir / "theta_a.csv", r.theta_author, side.num_authors, k);
            guard.track(dir / "theta_a.csv");
            meta["num_authors"] = side.num_authors;
            history = std::move(r.history);
            iterations = r.iterations;
            converged = r.converged;
            final_perplexity = history.back().perplexity;
        } else {
            RtmResult r = train_rtm(bow, side, hp, opts);
            io::write_matrix_csv(dir / "theta.csv", r.params.theta, bow.num_docs(), k);
            guard.track(dir / "theta.csv");
            io::write_matrix_csv(dir / "phi.csv", r.params.phi, bow.vocab_size(), k);
            guard.track(dir / "phi.csv");
            if (r.factor.num_topics > 0) {
                io::write_matrix_csv(dir / "link_factor.csv", r.factor.f, k, k);
                guard.track(dir / "link_factor.csv");
            }
            history = std::move(r.history);
            iterations = r.iterations;
            converged = r.converged;
            final_perplexity = history.back().perplexity;
        }
        io::write_history_csv(dir / "history.csv", history);
        guard.track(dir / "history.csv");
        meta["iterations"] = iterations;
        meta["converged"] = converged;
        meta["final_perplexity"] = final_perplexity;
        io::save_meta(dir / "meta.json", meta);
        guard.track(dir / "meta.json");
        guard.committed = true;

        std::cout << "trained " << cfg.model << "/" << cfg.algo << " K=" << k << ": training perplexity "
                  << final_perplexity << " after " << iterations << " iteration(s)"
                  << (converged ? " (converged)" : " (iteration budget reached)") << "\n";
    }
    return 0;
}

int cmd_eval(const RunConfig& cfg, bool algo_given, bool seed_given) {
    if (cfg.corpus.empty() || cfg.out.empty()) throw ConfigError("eval requires --corpus and --out");
    const fs::path dir(cfg.out);
    const StoredModel model = load_model(dir, /*need_theta=*/false);
    const int32_t k = model.phi.cols;
    const int32_t vocab_size = static_cast<int32_t>(model.phi.rows);

    RunConfig effective = cfg;
    effective.alpha = model.meta.value("alpha", cfg.alpha);
    effective.beta = model.meta.value("beta", cfg.beta);
    if (!algo_given) effective.algo = model.meta.value("algo", cfg.algo);
    if (!seed_given) effective.seed = model.meta.value("seed", cfg.seed);
    const Algo algo = parse_algo(effective.algo);
    const Hyperparams hp = make_hp(effective, k);

    const BagOfWords test = load_corpus_file(cfg.corpus);
    const PredictiveResult r = predictive_perplexity(model.phi.data, vocab_size, k, test, hp, algo, hp.seed,
                                                     cfg.holdout, cfg.max_iters, /*threads=*/0);

    OutputGuard guard;
    {
        auto out = io::open_out(dir / "eval_results.csv");
        out << "corpus,algo,k,holdout,perplexity,scored_docs,skipped_docs,seed\n";
        out << cfg.corpus << "," << effective.algo << "," << k << "," << io::format_real(cfg.holdout) << ","
            << io::format_real(r.perplexity) << "," << r.scored_docs << "," << r.skipped_docs << ","
            << effective.seed << "\n";
    }
    guard.track(dir / "eval_results.csv");
    json meta = base_meta(effective, "eval");
    meta["k"] = k;
    meta["perplexity"] = r.perplexity;
    meta["scored_docs"] = r.scored_docs;
    meta["skipped_docs"] = r.skipped_docs;
    io::save_meta(dir / "eval_meta.json", meta);
    guard.track(dir / "eval_meta.json");
    guard.committed = true;

    std::cout << "predictive perplexity " << r.perplexity << " over " << r.scored_docs << " document(s), "
              << r.skipped_docs << " skipped\n";
    return 0;
}

int cmd_cv(const RunConfig& cfg) {
    if (cfg.corpus.empty() || cfg.out.empty()) throw ConfigError("cv requires --corpus and --out");
    const ModelKind model = parse_model(cfg.model);
    const Algo algo = parse_algo(cfg.algo);
    const Schedule schedule = parse_schedule(cfg.schedule);
    const WeightingScheme weighting = parse_weighting(cfg.weighting);
    const std::vector<int32_t> ks = parse_k_list(cfg.k_list);

    const BagOfWords raw = load_corpus_file(cfg.corpus);
    const SideData side = load_side_files(cfg, raw.num_docs());
    validate_train_config(cfg, model, algo, side);
    const BagOfWords bow = apply_weighting(raw, weighting);

    fs::create_directories(cfg.out);
    OutputGuard guard;
    std::vector<std::tuple<int32_t, int32_t, std::string, double, double>> rows;
    std::vector<std::string> printed;
    for (int32_t k : ks) {
        const Hyperparams hp = make_hp(cfg, k);
        TrainOptions opts;
        opts.schedule = schedule;
        if (side.labels.has_value()) {
            LabelMask mask;
            mask.allowed = *side.labels;
            mask.validate(bow.num_docs(), k);
            opts.mask = std::move(mask);
        }
        const CvSummary summary = cross_validate(bow, hp, model, algo, opts, &side, cfg.folds, cfg.seed,
                                                 cfg.holdout, cfg.max_iters, /*threads=*/0);
        for (const CvFoldResult& f : summary.folds)
            rows.emplace_back(f.fold, k, cfg.algo, f.perplexity, f.seconds);
        std::ostringstream line;
        line << "K=" << k << ": " << summary.mean_perplexity << " +/- " << summary.std_perplexity;
        printed.push_back(line.str());
    }
    io::write_cv_csv(fs::path(cfg.out) / "cv_results.csv", rows);
    guard.track(fs::path(cfg.out) / "cv_results.csv");
    json meta = base_meta(cfg, "cv");
    meta["k_list"] = cfg.k_list;
    io::save_meta(fs::path(cfg.out) / "cv_meta.json", meta);
    guard.track(fs::path(cfg.out) / "cv_meta.json");
    guard.committed = true;
    for (const std::string& line : printed) std::cout << line << "\n";
    return 0;
}

int cmd_top_words(const RunConfig& cfg) {
    if (cfg.vocab.empty() || cfg.out.empty()) throw ConfigError("top-words requires --vocab and --out");
    const fs::path dir(cfg.out);
    const StoredModel model = load_model(dir, /*need_theta=*/false);
    const Vocabulary vocab = load_vocab_file(cfg.vocab);
    if (vocab.size() != static_cast<int32_t>(model.phi.rows))
        throw IoError("vocabulary mismatch: model has W=" + std::to_string(model.phi.rows) +
                      " but vocabulary file has " + std::to_string(vocab.size()) + " tokens");

    const auto table = top_words(model.phi.data, static_cast<int32_t>(model.phi.rows), model.phi.cols, cfg.top_n);
    OutputGuard guard;
    io::write_top_words(dir / "top_words.txt", table, vocab);
    guard.track(dir / "top_words.txt");
    json meta = base_meta(cfg, "top-words");
    meta["n"] = cfg.top_n;
    io::save_meta(dir / "top_words_meta.json", meta);
    guard.track(dir / "top_words_meta.json");
    guard.committed = true;

    for (size_t k = 0; k < table.size(); ++k) {
        std::cout << "topic " << k << ":";
        for (const TopWord& tw : table[k]) std::cout << " " << vocab.tokens[static_cast<size_t>(tw.word)];
        std::cout << "\n";
    }
    return 0;
}

int cmd_predict_links(const RunConfig& cfg) {
    if (cfg.links.empty() || cfg.out.empty()) throw ConfigError("predict-links requires --links and --out");
    const fs::path dir(cfg.out);
    const StoredModel model = load_model(dir, /*need_theta=*/true);
    const int32_t num_docs = static_cast<int32_t>(model.theta.rows);
    std::ifstream links_in(cfg.links);
    if (!links_in) throw IoError("cannot read links file " + cfg.links);
    const SideData side = load_side_data(num_docs, nullptr, &links_in, nullptr);
    if (!side.links.has_value() || side.links->empty()) throw ConfigError("links file holds no links");

    const LinkPredictionResult r = link_prediction(model.theta.data, num_docs, model.theta.cols, *side.links,
                                                   cfg.negative_ratio, cfg.seed);
    OutputGuard guard;
    io::write_link_eval_csv(dir / "link_eval.csv", r);
    guard.track(dir / "link_eval.csv");
    io::write_features_csv(dir / "features.csv", model.theta.data, model.theta.cols, r.dataset);
    guard.track(dir / "features.csv");
    json meta = base_meta(cfg, "predict-links");
    meta["negative_ratio"] = cfg.negative_ratio;
    io::save_meta(dir / "link_eval_meta.json", meta);
    guard.track(dir / "link_eval_meta.json");
    guard.committed = true;

    std::cout << "link prediction: precision " << r.metrics.precision << ", recall " << r.metrics.recall
              << ", F " << r.metrics.f_measure << " (" << r.dataset.shortfall << " negative shortfall)\n";
    return 0;
}

void add_common_options(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--corpus", cfg.corpus, "UCI bag-of-words corpus file");
    sub->add_option("--vocab", cfg.vocab, "vocabulary file, one token per line");
    sub->add_option("--authors", cfg.authors, "authors file: 'docID: authorID ...'");
    sub->add_option("--links", cfg.links, "links file: 'docID docID' per line");
    sub->add_option("--labels", cfg.labels, "labels file: 'docID: topicID ...'");
    sub->add_option("--model", cfg.model, "model: lda, atm or rtm");
    sub->add_option("--algo", cfg.algo, "algorithm: bp, sibp, vb, gs or cvb0");
    sub->add_option("--schedule", cfg.schedule, "update schedule: sync or async");
    sub->add_option("--k", cfg.k_list, "topic count, or comma list for sweeps");
    sub->add_option("--alpha", cfg.alpha, "document Dirichlet hyperparameter");
    sub->add_option("--beta", cfg.beta, "topic Dirichlet hyperparameter");
    sub->add_option("--xi", cfg.xi, "rtm link message weight in [0,1]");
    sub->add_option("--lambda", cfg.lambda, "message-delta convergence threshold");
    sub->add_option("--max-iters", cfg.max_iters, "iteration budget");
    sub->add_option("--seed", cfg.seed, "run seed; all randomness derives from it");
    sub->add_option("--weighting", cfg.weighting, "raw_count, tf or tf_idf");
    sub->add_option("--folds", cfg.folds, "cross-validation folds");
    sub->add_option("--holdout", cfg.holdout, "held-out fraction per test document");
    sub->add_option("--out", cfg.out, "output (and model) directory");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"topic model inference by message passing on sparse corpora"};
    app.require_subcommand(1);
    RunConfig cfg;

    CLI::App* train = app.add_subcommand("train", "train a model and persist it");
    add_common_options(train, cfg);
    CLI::App* eval = app.add_subcommand("eval", "predictive perplexity of a stored model on a test corpus");
    add_common_options(eval, cfg);
    CLI::App* cv = app.add_subcommand("cv", "k-fold cross-validated predictive perplexity");
    add_common_options(cv, cfg);
    CLI::App* topw = app.add_subcommand("top-words", "highest-probability words per topic of a stored model");
    add_common_options(topw, cfg);
    topw->add_option("--n", cfg.top_n, "words per topic");
    CLI::App* plinks = app.add_subcommand("predict-links", "link prediction from stored document proportions");
    add_common_options(plinks, cfg);
    plinks->add_option("--negative-ratio", cfg.negative_ratio, "sampled non-links per observed link");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (train->parsed()) return cmd_train(cfg);
        if (eval->parsed())
            return cmd_eval(cfg, eval->count("--algo") > 0, eval->count("--seed") > 0);
        if (cv->parsed()) return cmd_cv(cfg);
        if (topw->parsed()) return cmd_top_words(cfg);
        if (plinks->parsed()) return cmd_predict_links(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal fault: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
