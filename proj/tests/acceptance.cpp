// Acceptance checks. `acceptance [N ...]` runs the numbered criteria (all by
// default) and prints one PASS/FAIL line for each; the exit status is 0 only
// if every selected criterion passed.

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "averify/averify.hpp"
#include "oracles.hpp"
#include "reference_results.hpp"
#include "test_helpers.hpp"

using namespace averify;
namespace oracles = averify::testing::oracles;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

void note(const std::string& s) { std::printf("    %s\n", s.c_str()); }

// -- 1 ------------------------------------------------------------------------

Outcome reference_metrics() {
    const auto t = Clock::now();
    auto c = averify::testing::check_reference_rows();
    const double took = seconds_since(t);
    for (const auto& m : c.mismatches) note("mismatch: " + m);
    return {c.matched == c.total && c.total == 90 && took < 1.0,
            std::to_string(c.matched) + "/" + std::to_string(c.total) + " printed values reproduced in " +
                fmt("%.4f", took) + " s"};
}

// -- 2 ------------------------------------------------------------------------

Outcome balanced_identity() {
    const auto t = Clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::uint64_t> U(0, 5000);
    std::size_t kappa_bad = 0, order_bad = 0, unbalanced = 0;
    double worst = 0;
    for (int i = 0; i < 10000; ++i) {
        const std::uint64_t n = 1 + U(rng);
        ConfusionMatrix m;
        m.tp = U(rng) % (n + 1), m.fn = n - m.tp;
        m.fp = U(rng) % (n + 1), m.tn = n - m.fp;
        const double gap = std::abs(kappa(m) - (2 * accuracy(m) - 1));
        worst = std::max(worst, gap);
        if (gap > 1e-12) ++kappa_bad;
    }
    while (unbalanced < 10000) {
        ConfusionMatrix m{U(rng), U(rng), U(rng), U(rng)};
        if (m.total() == 0 || m.tp + m.fn == m.fp + m.tn) continue;
        ++unbalanced;
        const double a = accuracy(m), f = f1(m);
        if ((f > a) != (m.tp > m.tn) || (f < a) != (m.tp < m.tn)) ++order_bad;
    }
    const double took = seconds_since(t);
    return {kappa_bad == 0 && order_bad == 0 && took < 5.0,
            "kappa identity violations " + std::to_string(kappa_bad) + " (max gap " + fmt("%.2e", worst) +
                "), F1/accuracy ordering violations " + std::to_string(order_bad) + ", " + fmt("%.3f", took) + " s"};
}

// -- 3 ------------------------------------------------------------------------

class ConstantVerifier final : public UnaryVerifier {
public:
    explicit ConstantVerifier(bool accept) : accept_(accept) {}
    MethodDescriptor descriptor() const override {
        return {accept_ ? "always-y" : "always-n", Category::unary, true, false, Provenance::target_class_only};
    }
    DecisionCriterion criterion() const override { return {}; }
    nlohmann::json parameters() const override { return nlohmann::json::object(); }
    Verdict decide(const ProblemView&, std::uint64_t) const override { return make_verdict(accept_ ? 1.0 : 0.0, accept_); }

private:
    bool accept_;
};

Outcome pathology() {
    Corpus c = averify::testing::small_synthetic(200, 0.9, 3, 200, 40);
    if (!c.balanced() || c.size() != 200) return {false, "synthetic corpus is not balanced 200"};
    auto yes = evaluate(ConstantVerifier(true), c).report.mean;
    auto no = evaluate(ConstantVerifier(false), c).report.mean;
    const bool ok = yes.accuracy == 0.5 && std::abs(yes.f1 - 2.0 / 3.0) <= 1e-12 && yes.kappa == 0.0 && no.f1 == 0.0;
    return {ok, "always-Y acc " + fmt("%.12f", yes.accuracy) + " f1 " + fmt("%.12f", yes.f1) + " kappa " +
                    fmt("%.12f", yes.kappa) + "; always-N f1 " + fmt("%.12f", no.f1)};
}

// -- 4 ------------------------------------------------------------------------

std::map<std::string, std::string> verdict_lines(const std::string& method, const Corpus& c) {
    auto v = make_verifier(method, {}, &c);
    std::map<std::string, std::string> out;
    for (const auto& r : run_verifier(*v, c, 77)) out[r.problem] = verdicts_to_jsonl({r});
    return out;
}

std::string joined(const std::map<std::string, std::string>& lines, const std::set<std::string>& keep) {
    std::string s;
    for (const auto& [id, line] : lines)
        if (keep.empty() || keep.count(id)) s += line;
    return s;
}

/// Replaces every document of the problem with unrelated text, renames the
/// authors and flips the label.
Problem corrupted(const Problem& p, std::uint64_t seed) {
    Rng rng(seed);
    MarkovAuthor stranger = MarkovAuthor::dirichlet(rng, 0.3);
    auto doc = [&](const Document& d) { return Document(d.id(), stranger.generate(rng, 900), "stranger"); };
    std::vector<Document> known;
    for (const auto& d : p.known()) known.push_back(doc(d));
    std::optional<Label> label;
    if (p.label()) label = *p.label() == Label::Y ? Label::N : Label::Y;
    return Problem(p.id(), doc(p.unknown()), std::move(known), label);
}

Outcome unary_isolation() {
    Corpus base = averify::testing::small_synthetic(50, 0.8, 41, 1500, 20);
    std::vector<Problem> shuffled = base.problems();
    std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(5));
    Corpus permuted("permuted", shuffled);

    std::set<std::string> odd, even;
    for (std::size_t i = 0; i < base.size(); ++i) (i % 2 ? odd : even).insert(base[i].id());
    auto corrupt = [&](const std::set<std::string>& which) {
        std::vector<Problem> ps;
        for (std::size_t i = 0; i < base.size(); ++i)
            ps.push_back(which.count(base[i].id()) ? corrupted(base[i], 1000 + i) : base[i]);
        return Corpus("corrupted", ps);
    };
    const Corpus odd_bad = corrupt(odd), even_bad = corrupt(even);

    auto isolated = [&](const std::string& m) {
        auto ref = verdict_lines(m, base);
        auto perm = verdict_lines(m, permuted);
        auto ob = verdict_lines(m, odd_bad);
        auto eb = verdict_lines(m, even_bad);
        return joined(ref, {}) == joined(perm, {}) && joined(ref, even) == joined(ob, even) &&
               joined(ref, odd) == joined(eb, odd);
    };

    bool all = true;
    std::string detail;
    for (const std::string m : {"occ_knn", "occav", "lof", "iforest", "svdd"}) {
        const bool ok = isolated(m);
        all = all && ok;
        note(m + (ok ? ": verdicts byte-identical under permutation and sibling corruption" : ": VERDICTS CHANGED"));
        detail += (detail.empty() ? "" : ", ") + m + (ok ? " ok" : " changed");
    }
    // the same check must notice a verifier that reads its siblings
    const bool caught = !isolated("leaky-sibling-labels");
    note(std::string("control leaky-sibling-labels: ") + (caught ? "dependence detected" : "NOT detected"));
    return {all && caught, detail + "; leaky control " + (caught ? "detected" : "missed")};
}

// -- 5 ------------------------------------------------------------------------

Outcome determinism() {
    // weakly separated problems keep the randomized scores away from 0 and 1;
    // unmasking also needs long unknown texts so its fold shuffles have chunks to move
    auto make = [](std::size_t problems, std::uint64_t seed, std::size_t unknown_len) {
        SynthOptions o;
        o.problems = problems;
        o.authors = 10;
        o.doc_len = 2000;
        o.unknown_len = unknown_len;
        o.separation = 0.3;
        o.seed = seed;
        return synthesize_corpus(o);
    };
    const Corpus short_train = make(20, 51, 0), short_eval = make(16, 52, 0);
    const Corpus long_train = make(20, 51, 8000), long_eval = make(16, 52, 8000);
    auto train_for = [&](const std::string& m) -> const Corpus& { return m == "unmasking" ? long_train : short_train; };
    auto eval_for = [&](const std::string& m) -> const Corpus& { return m == "unmasking" ? long_eval : short_eval; };
    const std::vector<std::uint64_t> seeds{11, 23, 47};
    const std::set<std::string> random_methods{"iforest", "gi", "unmasking"};

    auto outputs = [&](const std::string& m, std::uint64_t seed) {
        auto v = make_verifier(m);
        if (auto* i = dynamic_cast<IntrinsicVerifier*>(v.get())) i->fit(train_for(m), seed);
        return verdicts_to_jsonl(run_verifier(*v, eval_for(m), seed));
    };

    bool all = true;
    std::size_t n_ok = 0;
    for (const auto& m : method_names()) {
        std::set<std::string> distinct;
        for (auto s : seeds) distinct.insert(outputs(m, s));
        const bool repeatable = outputs(m, seeds[0]) == outputs(m, seeds[0]);
        bool ok = false;
        std::string what;
        if (random_methods.count(m)) {
            auto v = make_verifier(m);
            if (auto* i = dynamic_cast<IntrinsicVerifier*>(v.get())) i->fit(train_for(m), seeds[0]);
            auto e = evaluate(*v, eval_for(m), {3, seeds[0], 1});
            const bool dispersion = e.report.dispersion.has_value();
            std::set<std::string> per_run;
            for (const auto& r : e.verdicts) per_run.insert(verdicts_to_jsonl(r));
            ok = distinct.size() > 1 && repeatable && dispersion && per_run.size() > 1;
            what = std::to_string(distinct.size()) + " distinct outputs over 3 seeds, same-seed repeat " +
                   (repeatable ? "identical" : "DIFFERENT") + ", accuracy sd " +
                   (dispersion ? fmt("%.4f", e.report.dispersion->accuracy) : std::string("missing")) + " over " +
                   std::to_string(per_run.size()) + " distinct run outputs";
        } else {
            ok = distinct.size() == 1 && repeatable;
            what = std::to_string(distinct.size()) + " distinct output(s) over 3 seeds";
        }
        note(m + ": " + what + (ok ? "" : "  <-- unexpected"));
        all = all && ok;
        n_ok += ok;
    }
    return {all, std::to_string(n_ok) + "/" + std::to_string(method_names().size()) + " methods behave as declared"};
}

// -- 6 ------------------------------------------------------------------------

Outcome oracle_equivalence() {
    std::mt19937_64 rng(606);
    std::uniform_real_distribution<double> U(-5, 5), U01(0, 1);

    double lof_worst = 0;
    std::size_t lof_bad = 0, lof_runs = 0;
    for (int trial = 0; lof_runs < 100; ++trial) {
        const std::size_t n = 2 + rng() % 49, dim = 1 + rng() % 4;
        const bool lattice = trial % 3 == 0;
        std::set<std::vector<double>> seen;
        oracles::Points A;
        auto draw = [&] {
            std::vector<double> p(dim);
            for (auto& x : p) x = lattice ? double(rng() % 7) : U(rng);
            return p;
        };
        for (int attempt = 0; A.size() < n && attempt < 1000; ++attempt)
            if (auto p = draw(); seen.insert(p).second) A.push_back(p);
        if (A.size() < 2) continue;
        ++lof_runs;
        const auto q = draw();
        const std::size_t k = 1 + rng() % (A.size() - 1);
        const double got = oracles::lof_via_library(A, q, k), want = oracles::brute_lof(A, q, k);
        const double err = std::abs(got - want) / std::max(1.0, std::abs(want));
        lof_worst = std::max(lof_worst, err);
        if (err > 1e-9) ++lof_bad;
    }

    double svdd_worst = 0;
    std::size_t svdd_bad = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng() % 4, dim = 1 + rng() % 3;
        oracles::Points P(n, std::vector<double>(dim));
        for (auto& p : P)
            for (auto& x : p) x = U01(rng);
        const double gamma = 0.5 + 4 * U01(rng);
        svm::Matrix K(n, std::vector<double>(n));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) K[i][j] = std::exp(-gamma * std::pow(oracles::euclid(P[i], P[j]), 2));
        const double nu = trial % 2 ? 0.1 : 0.4 + 0.6 * U01(rng);
        const double c = std::max(1.0 / (double(n) * nu), 1.0 / double(n));
        const double err = std::abs(svm::svdd_objective(K, svm::solve_svdd(K, c).alpha) - oracles::brute_svdd_minimum(K, c));
        svdd_worst = std::max(svdd_worst, err);
        if (err > 1e-6) ++svdd_bad;
    }

    std::size_t paths = 0, path_bad = 0;
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 2 + rng() % 60, dim = 1 + rng() % 6;
        svm::Matrix data(n, std::vector<double>(dim));
        for (auto& r : data)
            for (auto& x : r) x = U01(rng);
        IsolationForest f(data, 50, rng());
        for (int q = 0; q < 20; ++q) {
            std::vector<double> x(dim);
            for (auto& v : x) v = U01(rng) * 1.4 - 0.2;
            for (const auto& t : f.trees) {
                ++paths;
                if (t.path_length(x) != oracles::walk(t, 0, x)) ++path_bad;
            }
        }
    }

    note("LOF: " + std::to_string(lof_runs) + " instances, worst relative error " + fmt("%.2e", lof_worst));
    note("SVDD: 200 problems, worst objective gap " + fmt("%.2e", svdd_worst));
    note("isolation trees: " + std::to_string(paths) + " path lengths, " + std::to_string(path_bad) + " mismatches");
    return {lof_bad == 0 && svdd_bad == 0 && path_bad == 0,
            "LOF " + std::to_string(lof_bad) + " / SVDD " + std::to_string(svdd_bad) + " / path " +
                std::to_string(path_bad) + " mismatches"};
}

// -- 7 ------------------------------------------------------------------------

Outcome compressor() {
    std::mt19937_64 rng(707);
    PpmCompressor c;
    std::vector<std::string> inputs{"", std::string(1, '\0'), std::string(5000, '\0'), std::string(1, '\xff')};
    while (inputs.size() < 1000) {
        switch (inputs.size() % 4) {
            case 0: inputs.push_back(averify::testing::random_bytes(rng, rng() % 3000)); break;  // high entropy
            case 1: inputs.emplace_back(rng() % 3000, '\0'); break;
            case 2: inputs.push_back(averify::testing::english_like(rng, rng() % 3000)); break;
            default: {
                std::string unit = averify::testing::random_bytes(rng, 1 + rng() % 8), s;
                const std::size_t len = rng() % 3000;
                while (s.size() < len) s += unit;
                inputs.push_back(s);
            }
        }
    }
    std::size_t bad = 0;
    for (const auto& x : inputs) {
        auto back = c.decode(c.encode(as_bytes(x)));
        if (std::string(back.begin(), back.end()) != x) ++bad;
    }
    std::string repetitive;
    while (repetitive.size() < 20000) repetitive += "the quick brown fox jumps over the lazy dog. ";
    repetitive.resize(20000);
    const auto rep = c.compressed_size(repetitive);
    const auto rnd = c.compressed_size(averify::testing::random_bytes(rng, repetitive.size()));
    const double ratio = double(rep) / double(rnd);
    return {bad == 0 && ratio < 0.2, std::to_string(inputs.size() - bad) + "/" + std::to_string(inputs.size()) +
                                         " round trips; repetitive/random size ratio " + fmt("%.4f", ratio)};
}

// -- 8 ------------------------------------------------------------------------

Outcome end_to_end() {
    const auto t0 = Clock::now();
    bool all = true;
    std::string detail;
    for (const double separation : {0.9, 0.0}) {
        auto make = [&](std::uint64_t seed) {
            SynthOptions o;
            o.problems = 200;
            o.authors = 50;
            o.known_per_problem = 3;
            o.doc_len = 3000;
            o.unknown_len = 9000;
            o.separation = separation;
            o.seed = seed;
            return synthesize_corpus(o);
        };
        const Corpus train = make(101), eval = make(202);
        for (const std::string m : {"occ_knn", "occav", "threshold", "glad-like", "gi"}) {
            const auto t = Clock::now();
            auto v = make_verifier(m);
            if (auto* i = dynamic_cast<IntrinsicVerifier*>(v.get())) i->fit(train, 1);
            const auto e = evaluate(*v, eval, {1, 5, 1});
            const double acc = e.report.mean.accuracy;
            const bool ok = separation > 0 ? acc >= 0.9 : acc >= 0.4 && acc <= 0.6;
            all = all && ok;
            const auto& mx = e.report.matrix;
            note("separation " + fmt("%.1f", separation) + " " + m + ": accuracy " + fmt("%.3f", acc) + " (tp " +
                 std::to_string(mx.tp) + " fn " + std::to_string(mx.fn) + " fp " + std::to_string(mx.fp) + " tn " +
                 std::to_string(mx.tn) + ") " + fmt("%.1f", seconds_since(t)) + " s" + (ok ? "" : "  <-- out of range"));
        }
    }
    const double total = seconds_since(t0);
    return {all && total < 600.0, std::string(all ? "all accuracies in range" : "accuracy out of range") +
                                      ", total " + fmt("%.0f", total) + " s (limit 600 s)"};
}

// -- 9 ------------------------------------------------------------------------

Outcome category_audit() {
    const Corpus probe = averify::testing::small_synthetic(12, 0.8, 61, 2000, 8);
    const Corpus train = averify::testing::small_synthetic(20, 0.8, 62, 2000, 10);
    AuditOptions o;
    o.training = &train;
    bool all = true;
    for (const auto& m : method_names()) {
        auto v = make_verifier(m);
        auto r = audit_category(*v, probe, o);
        const bool ok = r.passed() && r.observed == r.declared;
        all = all && ok;
        note(m + ": declared " + r.declared.summary() + ", observed " + r.observed.summary() +
             (ok ? "" : "  <-- " + (r.failures.empty() ? std::string("mismatch") : r.failures[0])));
    }
    auto leaky = make_verifier("leaky-sibling-labels", {}, &probe);
    auto r = audit_category(*leaky, probe, o);
    note("leaky-sibling-labels: " + (r.passed() ? std::string("NOT flagged") : "flagged: " + r.failures[0]));
    return {all && !r.passed(), std::string(all ? "all shipped methods agree" : "declaration mismatch") +
                                    "; leaky verifier " + (r.passed() ? "missed" : "rejected")};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"metric oracle over the 30 reference rows", reference_metrics},
        {"balanced kappa identity and F1/accuracy ordering", balanced_identity},
        {"always-Y / always-N pathology", pathology},
        {"unary verdicts isolated from sibling problems", unary_isolation},
        {"determinism audit across seeds", determinism},
        {"LOF / SVDD / isolation-tree oracle equivalence", oracle_equivalence},
        {"compressor losslessness and compression ratio", compressor},
        {"end-to-end separation on synthetic corpora", end_to_end},
        {"category audit of shipped and leaky verifiers", category_audit},
    };

    CLI::App app{"Acceptance checks"};
    std::vector<int> selected;
    app.add_option("criteria", selected, "criterion numbers (default: all)")->check(CLI::Range(1, int(criteria.size())));
    CLI11_PARSE(app, argc, argv);
    if (selected.empty())
        for (int i = 1; i <= int(criteria.size()); ++i) selected.push_back(i);

    warning_sink() = nullptr;  // keep the report readable
    bool all = true;
    for (int n : selected) {
        const auto& [title, run] = criteria[std::size_t(n - 1)];
        std::printf("criterion %d: %s\n", n, title.c_str());
        std::fflush(stdout);
        const auto t = Clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("[%s] criterion %d: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", n, o.detail.c_str(), seconds_since(t));
        std::fflush(stdout);
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
