#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "json.hpp"

#include "averify/corpus.hpp"

// Verifier contracts. The three interfaces differ in what decide() may see:
//   UnaryVerifier       the problem only (D_u and A), nothing learned elsewhere
//   IntrinsicVerifier   the problem only, after fit() on a labeled corpus
//   ExtrinsicVerifier   the problem plus an impostor pool
// None of them receives the label: ProblemView does not carry it.

namespace averify {

enum class Category { unary, binary_intrinsic, binary_extrinsic };
enum class Provenance { target_class_only, labeled_corpus, external_documents };

inline const char* to_string(Category c) {
    switch (c) {
        case Category::unary: return "unary";
        case Category::binary_intrinsic: return "binary-intrinsic";
        case Category::binary_extrinsic: return "binary-extrinsic";
    }
    return "?";
}

inline const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::target_class_only: return "target-class-only";
        case Provenance::labeled_corpus: return "labeled-corpus";
        case Provenance::external_documents: return "external-documents";
    }
    return "?";
}

inline Provenance parse_provenance(std::string_view s) {
    if (s == "target-class-only") return Provenance::target_class_only;
    if (s == "labeled-corpus") return Provenance::labeled_corpus;
    if (s == "external-documents") return Provenance::external_documents;
    throw ValidationError("unknown provenance '" + std::string(s) + "'");
}

struct MethodDescriptor {
    std::string name;
    Category category = Category::unary;
    bool deterministic = true;
    bool optimizable = true;
    Provenance provenance = Provenance::target_class_only;

    void validate() const {
        if (category == Category::unary && provenance != Provenance::target_class_only)
            throw ValidationError(name + ": unary methods must have target-class-only provenance");
        if (category == Category::binary_extrinsic && provenance != Provenance::external_documents)
            throw ValidationError(name + ": binary-extrinsic methods must have external-documents provenance");
    }

    /// e.g. "unary deterministic non-optimizable"
    std::string summary() const {
        return std::string(to_string(category)) + (deterministic ? " deterministic" : " non-deterministic") +
               (optimizable ? " optimizable" : " non-optimizable");
    }

    /// Ranking-table markers: † non-optimizable, ⋆ non-deterministic.
    std::string markers() const {
        std::string m;
        if (!optimizable) m += "†";
        if (!deterministic) m += "⋆";
        return m;
    }

    friend bool operator==(const MethodDescriptor&, const MethodDescriptor&) = default;
};

struct Verdict {
    double score = 0.5;  // in [0,1]; higher = more likely same author
    Label decision = Label::N;

    friend bool operator==(const Verdict&, const Verdict&) = default;
};

/// Builds a verdict whose score agrees with the decision under the uniform
/// rule Y <=> score >= 0.5. Methods whose own tie rule rejects at the exact
/// boundary get their score moved just below 0.5.
inline Verdict make_verdict(double score, bool accept) {
    if (std::isnan(score)) throw Error("verifier produced a NaN score");
    score = std::clamp(score, 0.0, 1.0);
    if (accept && score < 0.5) score = 0.5;
    if (!accept && score >= 0.5) score = std::nextafter(0.5, 0.0);
    return Verdict{score, accept ? Label::Y : Label::N};
}

/// A scalar threshold or a decision model plus what determined it.
struct DecisionCriterion {
    enum class Kind { scalar_threshold, decision_model };
    Kind kind = Kind::scalar_threshold;
    double value = 0.0;     // scalar_threshold only
    nlohmann::json model;   // decision_model only
    Provenance provenance = Provenance::target_class_only;

    nlohmann::json to_json() const {
        nlohmann::json j{{"kind", kind == Kind::scalar_threshold ? "scalar-threshold" : "decision-model"},
                         {"provenance", to_string(provenance)}};
        if (kind == Kind::scalar_threshold)
            j["value"] = value;
        else
            j["model"] = model;
        return j;
    }
};

class Verifier {
public:
    virtual ~Verifier() = default;
    virtual MethodDescriptor descriptor() const = 0;
    virtual DecisionCriterion criterion() const = 0;
    /// Parameters as namespaced key/value pairs, for manifests and model files.
    virtual nlohmann::json parameters() const = 0;
};

class UnaryVerifier : public Verifier {
public:
    virtual Verdict decide(const ProblemView& problem, std::uint64_t seed) const = 0;
};

class IntrinsicVerifier : public Verifier {
public:
    virtual void fit(const Corpus& train, std::uint64_t seed) = 0;
    virtual bool fitted() const = 0;
    virtual Verdict decide(const ProblemView& problem, std::uint64_t seed) const = 0;
    /// Learned state only; parameters travel separately.
    virtual nlohmann::json save_state() const = 0;
    virtual void load_state(const nlohmann::json& state) = 0;
};

class ExtrinsicVerifier : public Verifier {
public:
    virtual Verdict decide(const ProblemView& problem, const ImpostorPool& pool, std::uint64_t seed) const = 0;
    /// Optional tuning of the acceptance level on a labeled corpus.
    virtual bool tunable() const { return false; }
    virtual void fit(const Corpus&, std::uint64_t) {
        throw ValidationError(descriptor().name + " has nothing to fit");
    }
    virtual nlohmann::json save_state() const { return nlohmann::json::object(); }
    virtual void load_state(const nlohmann::json&) {}
};

namespace detail {

/// Throws unless the fitted flag is set.
inline void require_fitted(bool fitted, const std::string& name) {
    if (!fitted) throw ValidationError(name + " must be fitted (train it first)");
}

/// Threshold sweep: candidates are the smallest score, every midpoint between
/// distinct consecutive sorted scores and one value above the largest; the
/// first (lowest) candidate with the best training accuracy wins. Decision
/// rule is Y iff score >= theta.
struct SweepResult {
    double theta = 0.0;
    double accuracy = 0.0;
};

inline SweepResult accuracy_sweep(std::vector<std::pair<double, bool>> scored) {
    if (scored.empty()) throw ValidationError("threshold sweep over an empty training set");
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    const std::size_t n = scored.size();
    std::size_t total_y = 0;
    for (const auto& s : scored) total_y += s.second;

    // theta at index i (all scores with position >= i accepted): correct = N below + Y at/above
    SweepResult best{scored.front().first, -1.0};
    std::size_t n_below = 0, y_below = 0;
    std::size_t i = 0;
    auto consider = [&](double theta) {
        double acc = double((n_below) + (total_y - y_below)) / double(n);
        if (acc > best.accuracy) best = {theta, acc};
    };
    consider(scored.front().first);
    while (i < n) {
        std::size_t j = i;
        while (j < n && scored[j].first == scored[i].first) {
            if (scored[j].second)
                ++y_below;
            else
                ++n_below;
            ++j;
        }
        if (j < n)
            consider(scored[i].first + (scored[j].first - scored[i].first) / 2.0);
        else
            consider(scored[i].first + std::max(1.0, std::abs(scored[i].first)) * 1e-6);
        i = j;
    }
    return best;
}

/// Type-7 quantile of an unsorted sample.
inline double quantile(std::vector<double> xs, double q) {
    if (xs.empty()) throw ValidationError("quantile of an empty sample");
    std::sort(xs.begin(), xs.end());
    double h = (double(xs.size()) - 1.0) * q;
    auto lo = static_cast<std::size_t>(std::floor(h));
    std::size_t hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (h - double(lo)) * (xs[hi] - xs[lo]);
}

}  // namespace detail

}  // namespace averify
