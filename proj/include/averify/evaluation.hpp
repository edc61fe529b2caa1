#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "averify/corpus.hpp"
#include "averify/trace.hpp"
#include "averify/verifier.hpp"

namespace averify {

// ---------------------------------------------------------------------------
// confusion matrix and metrics

struct ConfusionMatrix {
    std::uint64_t tp = 0, fn = 0, fp = 0, tn = 0;

    std::uint64_t total() const noexcept { return tp + fn + fp + tn; }

    void add(Label truth, Label decision) {
        if (truth == Label::Y)
            ++(decision == Label::Y ? tp : fn);
        else
            ++(decision == Label::Y ? fp : tn);
    }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

namespace detail {
inline void require_non_empty(const ConfusionMatrix& m) {
    if (m.total() == 0) throw ValidationError("metrics of an empty confusion matrix are undefined");
}
}  // namespace detail

inline double accuracy(const ConfusionMatrix& m) {
    detail::require_non_empty(m);
    return double(m.tp + m.tn) / double(m.total());
}

/// 2TP / (2TP + FN + FP); 0 when the denominator vanishes.
inline double f1(const ConfusionMatrix& m) {
    detail::require_non_empty(m);
    const double den = 2.0 * double(m.tp) + double(m.fn) + double(m.fp);
    return den == 0.0 ? 0.0 : 2.0 * double(m.tp) / den;
}

/// Cohen's kappa; chance agreement pc = 1 is rejected.
inline double kappa(const ConfusionMatrix& m) {
    detail::require_non_empty(m);
    const double n = double(m.total());
    const double p0 = double(m.tp + m.tn) / n;
    const double pc = (double(m.tp + m.fn) * double(m.tp + m.fp) + double(m.fp + m.tn) * double(m.fn + m.tn)) / (n * n);
    if (pc == 1.0) throw ValidationError("kappa undefined: chance agreement is 1");
    return (p0 - pc) / (1.0 - pc);
}

struct MetricValues {
    double accuracy = 0.0, f1 = 0.0, kappa = 0.0;
};

inline MetricValues metrics_of(const ConfusionMatrix& m) { return {accuracy(m), f1(m), kappa(m)}; }

/// x rounded half-up to three decimals, as printed in result tables.
inline std::string format3(double x) {
    double r = std::floor(x * 1000.0 + 0.5 + 1e-9) / 1000.0;
    if (r == 0.0) r = 0.0;  // no "-0.000"
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", r);
    return buf;
}

inline std::string format_runtime(double seconds) {
    auto s = static_cast<long long>(std::llround(seconds));
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld", s / 3600, (s / 60) % 60, s % 60);
    return buf;
}

// ---------------------------------------------------------------------------
// verdict files

struct VerdictRecord {
    std::string problem;
    Verdict verdict;

    friend bool operator==(const VerdictRecord&, const VerdictRecord&) = default;
};

inline std::string verdicts_to_jsonl(const std::vector<VerdictRecord>& records) {
    std::string out;
    for (const auto& r : records)
        out += nlohmann::json{{"problem", r.problem}, {"score", r.verdict.score}, {"decision", to_string(r.verdict.decision)}}
                   .dump() +
               "\n";
    return out;
}

inline std::vector<VerdictRecord> parse_verdicts_jsonl(std::string_view text, const std::string& source = "verdicts") {
    std::vector<VerdictRecord> out;
    std::set<std::string> seen;
    std::size_t line_no = 0, pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            VerdictRecord r;
            r.problem = j.at("problem").get<std::string>();
            r.verdict.score = j.at("score").get<double>();
            r.verdict.decision = parse_label(j.at("decision").get<std::string>());
            if (!(r.verdict.score >= 0.0 && r.verdict.score <= 1.0)) throw ValidationError("score outside [0, 1]");
            if (!seen.insert(r.problem).second) throw ValidationError("duplicate problem '" + r.problem + "'");
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(source + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(source + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

/// Matrix of verdicts against the corpus truth. Every labeled problem needs
/// exactly one verdict; verdicts for unknown problems are rejected.
inline ConfusionMatrix score_verdicts(const Corpus& corpus, const std::vector<VerdictRecord>& verdicts) {
    trace::Pause untraced;
    std::map<std::string, Label> decided;
    for (const auto& r : verdicts) {
        if (!corpus.index_of(r.problem)) throw ValidationError("verdict for unknown problem '" + r.problem + "'");
        decided[r.problem] = r.verdict.decision;
    }
    ConfusionMatrix m;
    for (const auto& p : corpus.problems()) {
        if (!p.labeled()) throw ValidationError("problem '" + p.id() + "' has no truth label");
        auto it = decided.find(p.id());
        if (it == decided.end()) throw ValidationError("no verdict for problem '" + p.id() + "'");
        m.add(*p.label(), it->second);
    }
    return m;
}

// ---------------------------------------------------------------------------
// running verifiers

/// One verdict per problem, in corpus order. The seed of each problem is
/// derive_seed(base_seed, run, problem id), so schedules cannot change results.
inline std::vector<VerdictRecord> run_verifier(const Verifier& verifier, const Corpus& corpus, std::uint64_t base_seed,
                                               std::uint64_t run = 0, std::size_t jobs = 1) {
    const auto* unary = dynamic_cast<const UnaryVerifier*>(&verifier);
    const auto* intrinsic = dynamic_cast<const IntrinsicVerifier*>(&verifier);
    const auto* extrinsic = dynamic_cast<const ExtrinsicVerifier*>(&verifier);
    if (intrinsic) detail::require_fitted(intrinsic->fitted(), verifier.descriptor().name);

    std::vector<VerdictRecord> out(corpus.size());
    parallel_for(corpus.size(), jobs, [&](std::size_t i) {
        const Problem& p = corpus[i];
        const std::uint64_t seed = derive_seed(base_seed, run, p.id());
        try {
            Verdict v;
            if (unary)
                v = unary->decide(p.view(), seed);
            else if (intrinsic)
                v = intrinsic->decide(p.view(), seed);
            else if (extrinsic)
                v = extrinsic->decide(p.view(), impostor_pool_for(corpus, p.id()), seed);
            else
                throw Error("verifier implements no decision interface");
            out[i] = {p.id(), v};
        } catch (const ValidationError& e) {
            throw ValidationError("problem '" + p.id() + "': " + e.what());
        } catch (const ConvergenceError& e) {
            throw ConvergenceError("problem '" + p.id() + "': " + e.what(), e.residual());
        }
    });
    return out;
}

struct MetricsReport {
    std::string method;
    std::string markers;
    MetricValues mean;                       // mean over runs
    std::optional<MetricValues> dispersion;  // sample standard deviation, runs > 1 only
    ConfusionMatrix matrix;                  // mean matrix, rounded, margins preserved
    MetricValues matrix_metrics;             // metrics of that mean matrix
    double runtime_seconds = 0.0;
    std::size_t runs = 1;

    nlohmann::json to_json() const {
        auto mv = [](const MetricValues& v) { return nlohmann::json{{"accuracy", v.accuracy}, {"f1", v.f1}, {"kappa", v.kappa}}; };
        nlohmann::json j{{"method", method},
                         {"markers", markers},
                         {"runs", runs},
                         {"mean", mv(mean)},
                         {"matrix", {{"tp", matrix.tp}, {"fn", matrix.fn}, {"fp", matrix.fp}, {"tn", matrix.tn}}},
                         {"matrix_metrics", mv(matrix_metrics)},
                         {"runtime_seconds", runtime_seconds}};
        j["dispersion"] = dispersion ? mv(*dispersion) : nlohmann::json(nullptr);
        return j;
    }
};

/// Aggregates per-run matrices. Mean counts are rounded for TP and FP; FN
/// and TN follow from the (constant) class sizes.
inline MetricsReport aggregate(const std::vector<ConfusionMatrix>& per_run) {
    if (per_run.empty()) throw ValidationError("aggregate of zero runs");
    MetricsReport r;
    r.runs = per_run.size();
    std::vector<MetricValues> values;
    for (const auto& m : per_run) values.push_back(metrics_of(m));
    const double n = double(values.size());
    for (const auto& v : values) {
        r.mean.accuracy += v.accuracy / n;
        r.mean.f1 += v.f1 / n;
        r.mean.kappa += v.kappa / n;
    }
    if (values.size() > 1) {
        MetricValues sd;
        for (const auto& v : values) {
            sd.accuracy += (v.accuracy - r.mean.accuracy) * (v.accuracy - r.mean.accuracy);
            sd.f1 += (v.f1 - r.mean.f1) * (v.f1 - r.mean.f1);
            sd.kappa += (v.kappa - r.mean.kappa) * (v.kappa - r.mean.kappa);
        }
        sd.accuracy = std::sqrt(sd.accuracy / (n - 1));
        sd.f1 = std::sqrt(sd.f1 / (n - 1));
        sd.kappa = std::sqrt(sd.kappa / (n - 1));
        r.dispersion = sd;
    }
    double tp = 0, fp = 0;
    for (const auto& m : per_run) tp += double(m.tp) / n, fp += double(m.fp) / n;
    const auto& first = per_run.front();
    r.matrix.tp = std::uint64_t(std::floor(tp + 0.5));
    r.matrix.fn = first.tp + first.fn - r.matrix.tp;
    r.matrix.fp = std::uint64_t(std::floor(fp + 0.5));
    r.matrix.tn = first.fp + first.tn - r.matrix.fp;
    r.matrix_metrics = metrics_of(r.matrix);
    return r;
}

struct EvalOptions {
    std::size_t runs = 1;
    std::uint64_t base_seed = 1;
    std::size_t jobs = 1;
};

struct Evaluation {
    MetricsReport report;
    std::vector<std::vector<VerdictRecord>> verdicts;  // per run, corpus order
    std::vector<ConfusionMatrix> matrices;             // per run
};

inline Evaluation evaluate(const Verifier& verifier, const Corpus& corpus, const EvalOptions& o = {}) {
    const MethodDescriptor d = verifier.descriptor();
    if (o.runs == 0) throw ValidationError("runs must be at least 1");
    if (corpus.empty()) throw ValidationError("cannot evaluate on an empty corpus");
    if (!corpus.fully_labeled()) throw ValidationError("evaluation corpus '" + corpus.id() + "' is not fully labeled");
    if (o.runs > 1 && d.deterministic)
        warn(d.name + " is deterministic; " + std::to_string(o.runs) + " runs will repeat identical results");

    Evaluation e;
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t run = 0; run < o.runs; ++run) {
        e.verdicts.push_back(run_verifier(verifier, corpus, o.base_seed, run, o.jobs));
        e.matrices.push_back(score_verdicts(corpus, e.verdicts.back()));
    }
    const auto stop = std::chrono::steady_clock::now();
    e.report = aggregate(e.matrices);
    e.report.method = d.name;
    e.report.markers = d.markers();
    e.report.runtime_seconds = std::chrono::duration<double>(stop - start).count();
    return e;
}

// ---------------------------------------------------------------------------
// ranking

/// Sorted by accuracy (descending), then kappa (descending), then name.
inline std::vector<MetricsReport> rank_report(std::vector<MetricsReport> reports) {
    std::stable_sort(reports.begin(), reports.end(), [](const MetricsReport& a, const MetricsReport& b) {
        if (a.mean.accuracy != b.mean.accuracy) return a.mean.accuracy > b.mean.accuracy;
        if (a.mean.kappa != b.mean.kappa) return a.mean.kappa > b.mean.kappa;
        return a.method < b.method;
    });
    return reports;
}

namespace detail {
inline std::vector<std::vector<std::string>> rank_cells(const std::vector<MetricsReport>& rows) {
    std::vector<std::vector<std::string>> out;
    for (const auto& r : rows)
        out.push_back({r.method + r.markers, format3(r.mean.accuracy), format3(r.mean.kappa), format3(r.mean.f1),
                       std::to_string(r.matrix.tp), std::to_string(r.matrix.fn), std::to_string(r.matrix.fp),
                       std::to_string(r.matrix.tn), format_runtime(r.runtime_seconds)});
    return out;
}
inline const std::vector<std::string>& rank_header() {
    static const std::vector<std::string> h{"method", "accuracy", "kappa", "f1", "tp", "fn", "fp", "tn", "runtime"};
    return h;
}
}  // namespace detail

inline std::string rank_table_tsv(const std::vector<MetricsReport>& ranked) {
    std::string out;
    auto row = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "\t" : "") + cells[i];
        out += "\n";
    };
    row(detail::rank_header());
    for (const auto& c : detail::rank_cells(ranked)) row(c);
    return out;
}

inline std::string rank_table_markdown(const std::vector<MetricsReport>& ranked) {
    std::string out;
    auto row = [&](const std::vector<std::string>& cells) {
        out += "|";
        for (const auto& c : cells) out += " " + c + " |";
        out += "\n";
    };
    row(detail::rank_header());
    out += "|---|---:|---:|---:|---:|---:|---:|---:|---:|\n";
    for (const auto& c : detail::rank_cells(ranked)) row(c);
    out += "\n† non-optimizable, ⋆ non-deterministic\n";
    return out;
}

// ---------------------------------------------------------------------------
// category and determinism audit

struct AuditOptions {
    std::vector<std::uint64_t> seeds{11, 23, 47};
    std::size_t max_problems = 6;     // probe problems used for the decide traces
    const Corpus* training = nullptr; // fit corpus for intrinsic methods (default: the probe corpus)
};

struct AuditReport {
    MethodDescriptor declared;
    MethodDescriptor observed;  // optimizability is not observable and is copied from the declaration
    bool reproducible = true;   // same seed, same verdicts
    std::vector<std::string> failures;
    std::vector<std::string> notes;

    bool passed() const noexcept { return failures.empty(); }
};

inline Category category_for(Provenance p) {
    switch (p) {
        case Provenance::target_class_only: return Category::unary;
        case Provenance::labeled_corpus: return Category::binary_intrinsic;
        case Provenance::external_documents: return Category::binary_extrinsic;
    }
    return Category::unary;
}

/// Re-derives provenance from the data the verifier actually touches and
/// probes determinism with several seeds. Intrinsic verifiers are (re)fitted
/// on the training corpus under tracing.
inline AuditReport audit_category(Verifier& verifier, const Corpus& probe, const AuditOptions& o = {}) {
    AuditReport r;
    r.declared = verifier.descriptor();
    try {
        r.declared.validate();
    } catch (const ValidationError& e) {
        r.failures.push_back(std::string("inconsistent declaration: ") + e.what());
    }
    if (probe.empty()) throw ValidationError("audit needs a non-empty probe corpus");
    if (o.seeds.size() < 2) throw ValidationError("audit needs at least two seeds");

    auto* unary = dynamic_cast<UnaryVerifier*>(&verifier);
    auto* intrinsic = dynamic_cast<IntrinsicVerifier*>(&verifier);
    auto* extrinsic = dynamic_cast<ExtrinsicVerifier*>(&verifier);
    if (!unary && !intrinsic && !extrinsic) throw Error("verifier implements no decision interface");

    bool fit_read_labels = false;
    if (intrinsic) {
        trace::Recorder fit_trace;
        {
            trace::Scope scope(fit_trace);
            intrinsic->fit(o.training ? *o.training : probe, o.seeds.front());
        }
        fit_read_labels = !fit_trace.labels.empty();
    }

    const std::size_t n = std::min(o.max_problems, probe.size());
    auto decide = [&](std::size_t i, std::uint64_t seed) {
        const Problem& p = probe[i];
        if (unary) return unary->decide(p.view(), seed);
        if (intrinsic) return intrinsic->decide(p.view(), seed);
        return extrinsic->decide(p.view(), impostor_pool_for(probe, p.id()), seed);
    };

    std::set<std::string> external, leaked_labels;
    for (std::size_t i = 0; i < n; ++i) {
        const Problem& p = probe[i];
        std::set<std::string> allowed{p.unknown().id()};
        for (const auto& d : p.known()) allowed.insert(d.id());
        trace::Recorder rec;
        {
            trace::Scope scope(rec);
            decide(i, o.seeds.front());
        }
        for (const auto& id : rec.documents)
            if (!allowed.count(id)) external.insert(id);
        leaked_labels.insert(rec.labels.begin(), rec.labels.end());
    }

    Provenance observed = !external.empty() ? Provenance::external_documents
                          : fit_read_labels ? Provenance::labeled_corpus
                                            : Provenance::target_class_only;
    if (!leaked_labels.empty()) {
        std::string ids;
        for (const auto& id : leaked_labels) ids += (ids.empty() ? "" : ", ") + id;
        r.failures.push_back("decide() read truth labels of problem(s): " + ids);
        observed = Provenance::labeled_corpus;
    }
    if (observed != r.declared.provenance) {
        std::string what = "declared " + std::string(to_string(r.declared.provenance)) + " but observed " +
                           to_string(observed);
        if (!external.empty()) what += " (read " + std::to_string(external.size()) + " document(s) outside the problem)";
        r.failures.push_back(what);
    }
    if (category_for(observed) != r.declared.category)
        r.failures.push_back("declared category " + std::string(to_string(r.declared.category)) + " but observed " +
                             to_string(category_for(observed)));

    // determinism: compare verdicts across seeds, and one seed against itself
    bool varies = false;
    for (std::size_t i = 0; i < n; ++i) {
        const Verdict first = decide(i, o.seeds.front());
        if (!(decide(i, o.seeds.front()) == first)) r.reproducible = false;
        for (std::size_t s = 1; s < o.seeds.size(); ++s)
            if (!(decide(i, o.seeds[s]) == first)) varies = true;
    }
    if (!r.reproducible) r.failures.push_back("verdicts differ between two runs with the same seed");
    if (r.declared.deterministic && varies) r.failures.push_back("declared deterministic but verdicts depend on the seed");
    if (!r.declared.deterministic && !varies)
        r.notes.push_back("no seed dependence observed on " + std::to_string(n) + " probe problem(s)");

    // silence on a few probes does not prove determinism, so a non-deterministic declaration stands
    r.observed = {r.declared.name, category_for(observed), r.declared.deterministic && !varies, r.declared.optimizable,
                  observed};
    return r;
}

}  // namespace averify
