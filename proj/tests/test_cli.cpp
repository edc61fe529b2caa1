#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <map>
#include <regex>
#include <sys/wait.h>

#include "averify/corpus_io.hpp"
#include "json.hpp"
#include "test_helpers.hpp"

#ifndef AVERIFY_CLI
#error "AVERIFY_CLI must name the averify executable"
#endif

namespace fs = std::filesystem;
using averify::io::read_file;
using averify::testing::TempDir;

namespace {

struct Result {
    int code = -1;
    std::string out, err;
};

/// Runs the CLI with the given arguments from inside dir.
Result cli(const fs::path& dir, const std::string& args) {
    const fs::path err_file = dir / ".stderr";
    const std::string cmd = "cd '" + dir.string() + "' && '" + AVERIFY_CLI + "' " + args + " 2>'" + err_file.string() + "'";
    Result r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), int(buf.size()), pipe)) r.out += buf.data();
    int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = read_file(err_file);
    return r;
}

std::size_t line_count(const std::string& s) { return std::size_t(std::count(s.begin(), s.end(), '\n')); }

double field(const std::string& line, const std::string& key) {
    std::smatch m;
    if (!std::regex_search(line, m, std::regex(key + "=([-0-9.]+)"))) return -1;
    return std::stod(m[1]);
}

class Cli : public ::testing::Test {
protected:
    TempDir tmp{"cli"};
    const fs::path& dir() const { return tmp.path(); }

    /// 20-problem synthetic corpus at s/corpus.jsonl.
    void synth(const std::string& extra = "") {
        auto r = cli(dir(), "synth --problems 20 --authors 8 --doc-len 800 --separation 0.9 --seed 3 --out s " + extra);
        ASSERT_EQ(r.code, 0) << r.err;
    }
};

}  // namespace

TEST_F(Cli, IngestSummaryAndLayouts) {
    synth();
    auto a = cli(dir(), "ingest s/corpus.jsonl");
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.out.rfind("problems=20 balanced=true", 0), 0u) << a.out;
    ASSERT_EQ(cli(dir(), "synth --problems 20 --authors 8 --doc-len 800 --separation 0.9 --seed 3 --layout pan-dirs --out p").code, 0);
    auto b = cli(dir(), "ingest p/corpus");
    EXPECT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(a.out, b.out);  // same data, both layouts

    // an output directory stands for the corpus inside it
    auto s_dir = cli(dir(), "ingest s"), p_dir = cli(dir(), "ingest p");
    ASSERT_EQ(s_dir.code, 0) << s_dir.err;
    ASSERT_EQ(p_dir.code, 0) << p_dir.err;
    EXPECT_NE(s_dir.out.find("problems=20 "), std::string::npos) << s_dir.out;
    EXPECT_NE(s_dir.out.find("corpus=s"), std::string::npos) << s_dir.out;
    EXPECT_NE(p_dir.out.find("corpus=p"), std::string::npos) << p_dir.out;
    std::filesystem::create_directory(dir() / "empty");
    EXPECT_EQ(cli(dir(), "ingest empty").code, 2);  // no problem folders

    auto missing = cli(dir(), "ingest nowhere");
    EXPECT_EQ(missing.code, 2);
    EXPECT_EQ(missing.err.rfind("error: ", 0), 0u);
    EXPECT_EQ(line_count(missing.err), 1u);
}

TEST_F(Cli, IngestRequiresTruthWhenAsked) {
    ASSERT_EQ(cli(dir(), "synth --problems 20 --authors 8 --doc-len 200 --seed 3 --layout pan-dirs --out p").code, 0);
    fs::remove(dir() / "p/corpus/truth.jsonl");
    auto plain = cli(dir(), "ingest p/corpus");
    EXPECT_EQ(plain.code, 0);
    EXPECT_NE(plain.out.find("unlabeled=20"), std::string::npos);
    auto strict = cli(dir(), "ingest --require-labels p/corpus");
    EXPECT_EQ(strict.code, 2);
    EXPECT_NE(strict.err.find("truth"), std::string::npos);
}

TEST_F(Cli, ResampleAndSplit) {
    ASSERT_EQ(cli(dir(), "synth --problems 300 --authors 60 --doc-len 60 --seed 4 --out big").code, 0);
    auto r = cli(dir(), "resample big/corpus.jsonl --size 600 --seed 5 --out r1");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("problems=600 balanced=true", 0), 0u);
    const auto corpus = read_file(dir() / "r1/corpus.jsonl"), manifest = read_file(dir() / "r1/manifest.json");
    ASSERT_EQ(cli(dir(), "resample big/corpus.jsonl --size 600 --seed 5 --out r1").code, 0);
    EXPECT_EQ(read_file(dir() / "r1/corpus.jsonl"), corpus);
    EXPECT_EQ(read_file(dir() / "r1/manifest.json"), manifest);
    ASSERT_EQ(cli(dir(), "resample big/corpus.jsonl --size 600 --seed 6 --out r2").code, 0);
    EXPECT_NE(read_file(dir() / "r2/corpus.jsonl"), corpus);
    auto odd = cli(dir(), "resample big/corpus.jsonl --size 601 --out r3");
    EXPECT_EQ(odd.code, 2);
    EXPECT_NE(odd.err.find("even"), std::string::npos);

    // many authors, few problems: enough author-disjoint groups to split
    ASSERT_EQ(cli(dir(), "synth --problems 100 --authors 1000 --doc-len 60 --seed 4 --out wide").code, 0);
    auto s = cli(dir(), "split wide/corpus.jsonl --fraction 0.3 --seed 2 --out sp");
    ASSERT_EQ(s.code, 0) << s.err;
    EXPECT_EQ(s.out.rfind("train: problems=30 balanced=true", 0), 0u) << s.out;
    EXPECT_TRUE(fs::exists(dir() / "sp/train.jsonl"));
    EXPECT_TRUE(fs::exists(dir() / "sp/eval.jsonl"));
    EXPECT_EQ(cli(dir(), "split wide/corpus.jsonl --fraction 1.5 --out sp2").code, 2);
}

TEST_F(Cli, TrainIsReproducible) {
    synth();
    ASSERT_EQ(cli(dir(), "train s/corpus.jsonl --method glad-like --seed 7 --out m1").code, 0);
    ASSERT_EQ(cli(dir(), "train s/corpus.jsonl --method glad-like --seed 7 --out m2").code, 0);
    const auto model = read_file(dir() / "m1/model.json");
    EXPECT_EQ(model, read_file(dir() / "m2/model.json"));
    auto j = nlohmann::json::parse(model);
    EXPECT_EQ(j["method"], "glad-like");
    EXPECT_EQ(j["criterion"]["provenance"], "labeled-corpus");

    // unlabeled training data
    ASSERT_EQ(cli(dir(), "synth --problems 20 --authors 8 --doc-len 200 --seed 3 --layout pan-dirs --out p").code, 0);
    fs::remove(dir() / "p/corpus/truth.jsonl");
    EXPECT_EQ(cli(dir(), "train p/corpus --method glad-like --out m3").code, 2);
    EXPECT_EQ(cli(dir(), "train s/corpus.jsonl --method nncd --out m4").code, 2);
}

TEST_F(Cli, RunWritesVerdicts) {
    ASSERT_EQ(cli(dir(), "synth --problems 10 --authors 6 --doc-len 600 --seed 8 --out s").code, 0);
    auto r = cli(dir(), "run s/corpus.jsonl --method occav --out occav");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(line_count(read_file(dir() / "occav/verdicts.jsonl")), 10u);
    EXPECT_TRUE(fs::exists(dir() / "occav/manifest.json"));

    auto gi = cli(dir(), "run s/corpus.jsonl --method gi -p gi.iterations=20 --runs 5 --out gi");
    ASSERT_EQ(gi.code, 0) << gi.err;
    for (int i = 1; i <= 5; ++i) EXPECT_TRUE(fs::exists(dir() / ("gi/verdicts-run" + std::to_string(i) + ".jsonl")));
    auto report = nlohmann::json::parse(read_file(dir() / "gi/report.json"));
    EXPECT_EQ(report["runs"], 5);
    EXPECT_TRUE(report["dispersion"].is_object());
    EXPECT_NE(gi.out.find("sd_accuracy="), std::string::npos);

    auto det = cli(dir(), "run s/corpus.jsonl --method occ_knn --runs 5 --out knn");
    EXPECT_EQ(det.code, 0);
    EXPECT_NE(det.err.find("warning: occ_knn is deterministic"), std::string::npos);

    auto unfitted = cli(dir(), "run s/corpus.jsonl --method threshold --out t");
    EXPECT_EQ(unfitted.code, 2);
    EXPECT_NE(unfitted.err.find("fitted"), std::string::npos);
    EXPECT_EQ(cli(dir(), "run s/corpus.jsonl --method threshold --train s/corpus.jsonl --out t").code, 0);
    EXPECT_EQ(cli(dir(), "run s/corpus.jsonl --method nosuch --out t").code, 2);
}

TEST_F(Cli, RunIsIdempotentAndScheduleIndependent) {
    synth();
    const char* files[] = {"verdicts-run1.jsonl", "verdicts-run2.jsonl", "report.json", "manifest.json"};
    ASSERT_EQ(cli(dir(), "run s/corpus.jsonl --method iforest --runs 2 --seed 4 --out a").code, 0);
    std::map<std::string, std::string> first;
    for (const char* f : files) first[f] = read_file(dir() / "a" / f);
    EXPECT_TRUE(fs::exists(dir() / "a/timing.json"));
    // rerun in place: identical artifacts
    ASSERT_EQ(cli(dir(), "run s/corpus.jsonl --method iforest --runs 2 --seed 4 --out a").code, 0);
    for (const char* f : files) EXPECT_EQ(read_file(dir() / "a" / f), first[f]) << f;
    // more workers: identical verdicts and report
    ASSERT_EQ(cli(dir(), "--jobs 3 run s/corpus.jsonl --method iforest --runs 2 --seed 4 --out b").code, 0);
    for (const char* f : {"verdicts-run1.jsonl", "verdicts-run2.jsonl", "report.json"})
        EXPECT_EQ(read_file(dir() / "b" / f), first[f]) << f;
}

TEST_F(Cli, EvalAndCompare) {
    auto m = cli(dir(), "eval --matrix 579,121,122,578");
    ASSERT_EQ(m.code, 0) << m.err;
    EXPECT_NE(m.out.find("accuracy=0.826 kappa=0.653 f1=0.827"), std::string::npos) << m.out;
    EXPECT_EQ(cli(dir(), "eval --matrix 1,2,3").code, 2);

    synth();
    ASSERT_EQ(cli(dir(), "run s/corpus.jsonl --method occav --out occav").code, 0);
    ASSERT_EQ(cli(dir(), "run s/corpus.jsonl --method glad-like --train s/corpus.jsonl --out glad").code, 0);
    auto e = cli(dir(), "eval s/corpus.jsonl --verdicts occav/verdicts.jsonl");
    ASSERT_EQ(e.code, 0) << e.err;
    const auto run_report = nlohmann::json::parse(read_file(dir() / "occav/report.json"));
    EXPECT_NEAR(field(e.out, "accuracy"), run_report["mean"]["accuracy"].get<double>(), 0.0005);

    auto c = cli(dir(), "compare s/corpus.jsonl occav glad --format tsv --out cmp");
    ASSERT_EQ(c.code, 0) << c.err;
    std::istringstream lines(c.out);
    std::string header, first, second;
    std::getline(lines, header);
    std::getline(lines, first);
    std::getline(lines, second);
    EXPECT_GE(field(std::regex_replace(first, std::regex("^[^\t]*\t([^\t]*).*"), "a=$1"), "a"),
              field(std::regex_replace(second, std::regex("^[^\t]*\t([^\t]*).*"), "a=$1"), "a"));
    EXPECT_NE(c.out.find("occav†"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir() / "cmp/ranking.md"));

    // drop one verdict line
    auto text = read_file(dir() / "occav/verdicts.jsonl");
    const auto last = text.rfind('\n', text.size() - 2);
    const auto dropped = nlohmann::json::parse(text.substr(last + 1))["problem"].get<std::string>();
    averify::io::write_file_atomic(dir() / "short.jsonl", text.substr(0, last + 1));
    auto bad = cli(dir(), "eval s/corpus.jsonl --verdicts short.jsonl");
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.err.find(dropped), std::string::npos) << bad.err;
}

TEST_F(Cli, SynthProperties) {
    auto a = cli(dir(), "synth --problems 200 --authors 20 --doc-len 300 --seed 9 --out a");
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.out.rfind("problems=200 balanced=true y=100 n=100", 0), 0u);
    ASSERT_EQ(cli(dir(), "synth --problems 200 --authors 20 --doc-len 300 --seed 9 --out b").code, 0);
    EXPECT_EQ(read_file(dir() / "a/corpus.jsonl"), read_file(dir() / "b/corpus.jsonl"));
    EXPECT_EQ(cli(dir(), "synth --problems 7 --out c").code, 2);
    EXPECT_EQ(cli(dir(), "synth --separation 2 --out c").code, 2);
}

TEST_F(Cli, NoSeparationMeansChance) {
    ASSERT_EQ(cli(dir(), "synth --problems 200 --authors 40 --doc-len 1500 --separation 0 --seed 10 --out z").code, 0);
    auto r = cli(dir(), "run z/corpus.jsonl --method occ_knn --out knn");
    ASSERT_EQ(r.code, 0) << r.err;
    const double acc = field(r.out, "accuracy");
    EXPECT_GE(acc, 0.4);
    EXPECT_LE(acc, 0.6);
}

TEST_F(Cli, Audit) {
    auto occav = cli(dir(), "audit --method occav");
    ASSERT_EQ(occav.code, 0) << occav.err;
    EXPECT_NE(occav.out.find("unary deterministic non-optimizable"), std::string::npos);
    auto gi = cli(dir(), "audit --method gi -p gi.iterations=20");
    ASSERT_EQ(gi.code, 0) << gi.err;
    EXPECT_NE(gi.out.find("binary-extrinsic non-deterministic"), std::string::npos);
    auto leaky = cli(dir(), "audit --method leaky-sibling-labels");
    EXPECT_EQ(leaky.code, 2);
    EXPECT_NE(leaky.err.find("truth labels"), std::string::npos);
}

TEST_F(Cli, ConfigFiles) {
    synth();
    averify::io::write_file_atomic(dir() / "bad.cfg", "method = occ_knn\nbogus = 1\n");
    auto bad = cli(dir(), "--config bad.cfg run s/corpus.jsonl --out x");
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.err.find("unknown config key 'bogus'"), std::string::npos);

    averify::io::write_file_atomic(dir() / "good.cfg", "# experiment\nmethod = lof\nlof.k = 2\nseed = 9\n");
    ASSERT_EQ(cli(dir(), "--config good.cfg run s/corpus.jsonl --out lof").code, 0);
    auto lof = nlohmann::json::parse(read_file(dir() / "lof/manifest.json"));
    EXPECT_EQ(lof["parameters"]["method"], "lof");
    EXPECT_EQ(lof["parameters"]["seed"], 9);
    EXPECT_EQ(lof["parameters"]["parameters"]["lof.k"], 2);

    // flags win over the config
    ASSERT_EQ(cli(dir(), "--config good.cfg run s/corpus.jsonl --method lof -p lof.k=1 --seed 1 --out lof3").code, 0);
    auto lof3 = nlohmann::json::parse(read_file(dir() / "lof3/manifest.json"));
    EXPECT_EQ(lof3["parameters"]["seed"], 1);
    EXPECT_EQ(lof3["parameters"]["parameters"]["lof.k"], 1);

    EXPECT_EQ(cli(dir(), "run s/corpus.jsonl --method lof -p nonsense=1 --out y").code, 2);
    EXPECT_EQ(cli(dir(), "").code, 2);
    EXPECT_EQ(cli(dir(), "--help").code, 0);
}
