#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "topicbp/common.hpp"
#include "topicbp/corpus.hpp"
#include "topicbp/engine.hpp"
#include "topicbp/eval.hpp"
#include "topicbp/lda.hpp"

namespace topicbp {

namespace io {

inline std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    return in;
}

// rows x cols matrix with a "k0,k1,..." header.
inline void write_matrix_csv(const std::filesystem::path& path, std::span<const double> data, int64_t rows,
                             int32_t cols) {
    auto out = open_out(path);
    for (int32_t k = 0; k < cols; ++k) out << (k == 0 ? "k" : ",k") << k;
    out << "\n";
    for (int64_t r = 0; r < rows; ++r) {
        for (int32_t k = 0; k < cols; ++k) {
            if (k > 0) out << ",";
            out << format_real(data[static_cast<size_t>(r) * cols + static_cast<size_t>(k)]);
        }
        out << "\n";
    }
}

struct Matrix {
    int64_t rows = 0;
    int32_t cols = 0;
    std::vector<double> data;
};

inline Matrix read_matrix_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    Matrix m;
    std::string line;
    if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");
    m.cols = static_cast<int32_t>(std::count(line.begin(), line.end(), ',')) + 1;
    while (std::getline(in, line)) {
        if (detail::blank(line)) continue;
        size_t pos = 0;
        for (int32_t k = 0; k < m.cols; ++k) {
            const size_t next = line.find(',', pos);
            const std::string tok = line.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
            try {
                m.data.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw IoError(path.string() + ": malformed number '" + tok + "'");
            }
            if (next == std::string::npos && k + 1 < m.cols)
                throw IoError(path.string() + ": short row");
            pos = next + 1;
        }
        ++m.rows;
    }
    return m;
}

inline void write_history_csv(const std::filesystem::path& path, std::span<const IterationStats> history) {
    auto out = open_out(path);
    out << "iteration,training_perplexity,max_delta,seconds\n";
    for (const IterationStats& h : history)
        out << h.iteration << "," << format_real(h.perplexity) << "," << format_real(h.max_delta) << ","
            << format_real(h.seconds) << "\n";
}

inline void write_cv_csv(const std::filesystem::path& path,
                         std::span<const std::tuple<int32_t, int32_t, std::string, double, double>> rows) {
    auto out = open_out(path);
    out << "fold,k,algo,perplexity,seconds\n";
    for (const auto& [fold, k, algo, perp, secs] : rows)
        out << fold << "," << k << "," << algo << "," << format_real(perp) << "," << format_real(secs) << "\n";
}

inline void write_top_words(const std::filesystem::path& path,
                            const std::vector<std::vector<TopWord>>& table, const Vocabulary& vocab) {
    auto out = open_out(path);
    for (size_t k = 0; k < table.size(); ++k)
        for (size_t rank = 0; rank < table[k].size(); ++rank) {
            const TopWord& tw = table[k][rank];
            out << k << "\t" << (rank + 1) << "\t" << vocab.tokens[static_cast<size_t>(tw.word)] << "\t"
                << format_real(tw.prob) << "\n";
        }
}

inline void write_link_eval_csv(const std::filesystem::path& path, const LinkPredictionResult& r) {
    auto out = open_out(path);
    out << "precision,recall,f_measure,positives,negatives,requested_negatives,negative_shortfall,"
           "train_examples,test_examples,split_seed\n";
    out << format_real(r.metrics.precision) << "," << format_real(r.metrics.recall) << ","
        << format_real(r.metrics.f_measure) << "," << r.dataset.positives << "," << r.dataset.negatives << ","
        << r.dataset.requested_negatives << "," << r.dataset.shortfall << "," << r.train_examples << ","
        << r.test_examples << "," << r.seed << "\n";
}

inline void write_features_csv(const std::filesystem::path& path, std::span<const double> theta,
                               int32_t num_topics, const LinkDataset& ds) {
    auto out = open_out(path);
    out << "d,dprime";
    for (int32_t k = 0; k < num_topics; ++k) out << ",f" << k;
    out << ",label\n";
    for (const LinkExample& e : ds.examples) {
        out << e.d1 << "," << e.d2;
        const std::vector<double> f = link_feature(theta, num_topics, e.d1, e.d2);
        for (double v : f) out << "," << format_real(v);
        out << "," << e.label << "\n";
    }
}

inline void save_meta(const std::filesystem::path& path, const nlohmann::json& meta) {
    auto out = open_out(path);
    out << meta.dump(2) << "\n";
}

inline nlohmann::json load_meta(const std::filesystem::path& path) {
    auto in = open_in(path);
    nlohmann::json meta;
    try {
        in >> meta;
    } catch (const std::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
    return meta;
}

}  // namespace io

// On-disk model: phi.csv (+theta.csv, theta_a.csv, link_factor.csv) plus
// meta.json and history.csv in one directory.
struct StoredModel {
    nlohmann::json meta;
    io::Matrix theta;
    io::Matrix phi;
};

inline StoredModel load_model(const std::filesystem::path& dir, bool need_theta) {
    StoredModel model;
    model.meta = io::load_meta(dir / "meta.json");
    model.phi = io::read_matrix_csv(dir / "phi.csv");
    if (need_theta) model.theta = io::read_matrix_csv(dir / "theta.csv");
    return model;
}

}  // namespace topicbp
