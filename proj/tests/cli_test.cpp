#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(TOPICBP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    return -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int count_lines(const std::string& text) {
    int n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

struct TempTree {
    fs::path root;
    TempTree() {
        root = fs::temp_directory_path() / ("topicbp_cli_test_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter()));
        fs::create_directories(root);
    }
    ~TempTree() { fs::remove_all(root); }
    static int counter() {
        static int n = 0;
        return n++;
    }
    fs::path file(const std::string& name, const std::string& content) const {
        const fs::path p = root / name;
        std::ofstream out(p);
        out << content;
        return p;
    }
};

// 10 documents over 12 words with deterministic counts
std::string demo_corpus() {
    std::ostringstream out;
    std::ostringstream body;
    int nnz = 0;
    for (int d = 1; d <= 10; ++d)
        for (int w = 1; w <= 12; ++w)
            if ((d * 7 + w * 3) % 4 != 0) {
                body << d << " " << w << " " << 1 + (d + w) % 3 << "\n";
                ++nnz;
            }
    out << 10 << "\n" << 12 << "\n" << nnz << "\n" << body.str();
    return out.str();
}

}  // namespace

TEST_CASE("train writes the model artifacts with the right shapes") {
    TempTree tmp;
    const fs::path corpus = tmp.file("corpus.txt", demo_corpus());
    const fs::path out = tmp.root / "model";
    REQUIRE(run("train --corpus " + corpus.string() + " --model lda --algo bp --k 4 --max-iters 20 --seed 3 --out " +
                out.string()) == 0);
    REQUIRE(fs::exists(out / "theta.csv"));
    REQUIRE(fs::exists(out / "phi.csv"));
    REQUIRE(fs::exists(out / "history.csv"));
    REQUIRE(fs::exists(out / "meta.json"));
    const std::string theta = slurp(out / "theta.csv");
    CHECK(count_lines(theta) == 11);  // header + 10 docs
    CHECK(theta.substr(0, 11) == "k0,k1,k2,k3");
    CHECK(count_lines(slurp(out / "phi.csv")) == 13);  // header + 12 words
}

TEST_CASE("train validates the configuration before computing") {
    TempTree tmp;
    const fs::path corpus = tmp.file("corpus.txt", demo_corpus());
    const fs::path out = tmp.root / "model";
    CHECK(run("train --corpus " + corpus.string() + " --model rtm --xi 0.2 --k 4 --out " + out.string()) == 1);
    CHECK(run("train --corpus " + corpus.string() + " --model atm --k 4 --out " + out.string()) == 1);
    CHECK(run("train --corpus " + corpus.string() + " --algo gs --weighting tf --k 4 --out " + out.string()) == 1);
    CHECK(run("train --corpus " + corpus.string() + " --algo vb --k 0 --out " + out.string()) == 1);
    CHECK(!fs::exists(out / "theta.csv"));
}

TEST_CASE("missing or malformed inputs exit with code 2") {
    TempTree tmp;
    const fs::path out = tmp.root / "model";
    CHECK(run("train --corpus " + (tmp.root / "nope.txt").string() + " --k 4 --out " + out.string()) == 2);
    const fs::path bad = tmp.file("bad.txt", "2\n2\n2\n1 1 2\n1 1 3\n");
    CHECK(run("train --corpus " + bad.string() + " --k 4 --out " + out.string()) == 2);
}

TEST_CASE("identical command and seed reproduce theta.csv byte for byte") {
    TempTree tmp;
    const fs::path corpus = tmp.file("corpus.txt", demo_corpus());
    const std::string before = slurp(corpus);
    const fs::path out1 = tmp.root / "m1";
    const fs::path out2 = tmp.root / "m2";
    const std::string common =
        "train --corpus " + corpus.string() + " --algo bp --k 3 --max-iters 15 --seed 42 --out ";
    REQUIRE(run(common + out1.string()) == 0);
    REQUIRE(run(common + out2.string()) == 0);
    CHECK(slurp(out1 / "theta.csv") == slurp(out2 / "theta.csv"));
    CHECK(slurp(out1 / "phi.csv") == slurp(out2 / "phi.csv"));
    CHECK(slurp(corpus) == before);  // inputs never mutated
}

TEST_CASE("cv writes one row per fold and K") {
    TempTree tmp;
    const fs::path corpus = tmp.file("corpus.txt", demo_corpus());
    const fs::path out = tmp.root / "cv";
    REQUIRE(run("cv --corpus " + corpus.string() + " --k 2,3,4 --folds 5 --max-iters 10 --seed 1 --out " +
                out.string()) == 0);
    const std::string rows = slurp(out / "cv_results.csv");
    CHECK(count_lines(rows) == 16);  // header + 3 K x 5 folds
}

TEST_CASE("top-words emits n rows per topic and checks the vocabulary") {
    TempTree tmp;
    const fs::path corpus = tmp.file("corpus.txt", demo_corpus());
    std::ostringstream vocab;
    for (int w = 0; w < 12; ++w) vocab << "word" << w << "\n";
    const fs::path vocab_path = tmp.file("vocab.txt", vocab.str());
    const fs::path out = tmp.root / "model";
    REQUIRE(run("train --corpus " + corpus.string() + " --k 10 --max-iters 10 --seed 2 --out " + out.string()) == 0);
    REQUIRE(run("top-words --vocab " + vocab_path.string() + " --n 10 --out " + out.string()) == 0);
    CHECK(count_lines(slurp(out / "top_words.txt")) == 100);

    const fs::path short_vocab = tmp.file("short.txt", "a\nb\n");
    CHECK(run("top-words --vocab " + short_vocab.string() + " --n 10 --out " + out.string()) == 2);
}

TEST_CASE("eval rejects a test corpus with a different vocabulary") {
    TempTree tmp;
    const fs::path corpus = tmp.file("corpus.txt", demo_corpus());
    const fs::path out = tmp.root / "model";
    REQUIRE(run("train --corpus " + corpus.string() + " --k 3 --max-iters 10 --seed 2 --out " + out.string()) == 0);
    const fs::path other = tmp.file("other.txt", "2\n5\n2\n1 1 9\n2 5 9\n");
    CHECK(run("eval --corpus " + other.string() + " --out " + out.string()) == 2);
    REQUIRE(run("eval --corpus " + corpus.string() + " --out " + out.string()) == 0);
    CHECK(fs::exists(out / "eval_results.csv"));
}

TEST_CASE("predict-links writes metrics and exported features") {
    TempTree tmp;
    const fs::path corpus = tmp.file("corpus.txt", demo_corpus());
    std::ostringstream links;
    links << "0 1\n2 3\n4 5\n6 7\n8 9\n0 2\n1 3\n";
    const fs::path links_path = tmp.file("links.txt", links.str());
    const fs::path out = tmp.root / "model";
    REQUIRE(run("train --corpus " + corpus.string() + " --k 3 --max-iters 10 --seed 2 --out " + out.string()) == 0);
    REQUIRE(run("predict-links --links " + links_path.string() + " --negative-ratio 1 --seed 4 --out " +
                out.string()) == 0);
    CHECK(fs::exists(out / "link_eval.csv"));
    const std::string features = slurp(out / "features.csv");
    CHECK(count_lines(features) == 15);  // header + 7 positives + 7 negatives
}

TEST_CASE("rtm training writes the link factor") {
    TempTree tmp;
    const fs::path corpus = tmp.file("corpus.txt", demo_corpus());
    const fs::path links_path = tmp.file("links.txt", "0 1\n2 3\n4 5\n");
    const fs::path out = tmp.root / "rtm";
    REQUIRE(run("train --corpus " + corpus.string() + " --model rtm --links " + links_path.string() +
                " --k 3 --xi 0.15 --max-iters 10 --seed 2 --out " + out.string()) == 0);
    CHECK(fs::exists(out / "link_factor.csv"));
    CHECK(count_lines(slurp(out / "link_factor.csv")) == 4);  // header + K rows
}

TEST_CASE("atm training writes author proportions") {
    TempTree tmp;
    const fs::path corpus = tmp.file("corpus.txt", demo_corpus());
    std::ostringstream authors;
    for (int d = 0; d < 10; ++d) authors << d << ": " << d % 3 << "\n";
    const fs::path authors_path = tmp.file("authors.txt", authors.str());
    const fs::path out = tmp.root / "atm";
    REQUIRE(run("train --corpus " + corpus.string() + " --model atm --authors " + authors_path.string() +
                " --k 3 --max-iters 10 --seed 2 --out " + out.string()) == 0);
    CHECK(fs::exists(out / "theta_a.csv"));
    CHECK(count_lines(slurp(out / "theta_a.csv")) == 4);  // header + 3 authors
}

TEST_CASE("multi-K training writes one directory per K") {
    TempTree tmp;
    const fs::path corpus = tmp.file("corpus.txt", demo_corpus());
    const fs::path out = tmp.root / "sweep";
    REQUIRE(run("train --corpus " + corpus.string() + " --k 2,3 --max-iters 5 --seed 2 --out " + out.string()) ==
            0);
    CHECK(fs::exists(out / "k2" / "theta.csv"));
    CHECK(fs::exists(out / "k3" / "theta.csv"));
}
