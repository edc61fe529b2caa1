#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "averify/compression.hpp"
#include "averify/features.hpp"
#include "averify/svm.hpp"
#include "averify/unary.hpp"
#include "averify/verifier.hpp"

// Binary verifiers. Intrinsic ones learn their criterion from a labeled
// corpus in fit() and afterwards see only the problem; extrinsic ones also
// receive an impostor pool at decision time.

namespace averify {

namespace detail {

inline std::string concat_texts(std::span<const Document> docs) {
    std::string out;
    for (const auto& d : docs) out += d.text();
    return out;
}

/// Labels of a training corpus as +1 / -1, read on the calling thread so the
/// audit recorder sees them.
inline std::vector<int> training_labels(const Corpus& train, const std::string& method) {
    if (train.empty()) throw ValidationError(method + ": training corpus is empty");
    std::vector<int> y;
    y.reserve(train.size());
    for (const auto& p : train.problems()) {
        const auto& l = p.label();
        if (!l) throw ValidationError(method + ": training problem '" + p.id() + "' is unlabeled");
        y.push_back(*l == Label::Y ? 1 : -1);
    }
    if (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), -1) == 0)
        throw ValidationError(method + ": training corpus must contain both Y and N problems");
    return y;
}

inline std::size_t code_points(const std::string& s) {
    std::size_t n = 0;
    for (unsigned char c : s) n += (c & 0xC0) != 0x80;
    return n;
}

inline std::vector<std::string> lower_words(const std::string& text) {
    std::vector<std::string> out;
    for (const auto& w : words(decode_utf8(text).value_or(U""))) out.push_back(ascii_lower(encode_utf8(w)));
    return out;
}

inline double type_token_ratio(const std::string& text) {
    auto w = lower_words(text);
    if (w.empty()) return 0.0;
    std::unordered_set<std::string> types(w.begin(), w.end());
    return double(types.size()) / double(w.size());
}

inline std::unordered_set<std::u32string> char4_set(const std::string& text) {
    std::u32string t = decode_utf8(text).value_or(U"");
    std::unordered_set<std::u32string> out;
    for (std::size_t i = 0; i + 4 <= t.size(); ++i) out.insert(t.substr(i, 4));
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// threshold verifier

/// s = sim(features(D_u), centroid(features(A))); Y iff s >= theta, theta
/// swept for training accuracy. Stands in for the simple threshold methods.
class ThresholdVerifier final : public IntrinsicVerifier {
public:
    FeatureSpec features;
    SimilaritySpec similarity;
    std::size_t jobs = 1;

    MethodDescriptor descriptor() const override {
        return {"threshold", Category::binary_intrinsic, true, true, Provenance::labeled_corpus};
    }
    DecisionCriterion criterion() const override {
        return {DecisionCriterion::Kind::scalar_threshold, theta_, {}, Provenance::labeled_corpus};
    }
    nlohmann::json parameters() const override {
        auto j = detail::feature_parameters(features);
        j["threshold.similarity"] = to_string(similarity.kind);
        for (const auto& [k, v] : similarity.parameters) j["threshold." + k] = static_cast<std::size_t>(v);
        return j;
    }

    double similarity_of(const ProblemView& p) const {
        if (similarity.kind == SimilarityKind::cbc) {
            PpmCompressor c(similarity.compression_order());
            return 1.0 - cbc(p.unknown.text(), detail::concat_texts(p.known), c);
        }
        auto v = detail::vectors_of(p, features);
        SparseVector center = centroid(v.known);
        switch (similarity.kind) {
            case SimilarityKind::manhattan_sim: return 1.0 / (1.0 + manhattan(v.unknown, center));
            case SimilarityKind::ruzicka: return ruzicka(v.unknown, center);
            case SimilarityKind::cng_profile:
                return 1.0 / (1.0 + cng_profile_dissimilarity(v.unknown, center, similarity.profile_length()));
            case SimilarityKind::cbc: break;
        }
        return 0.0;
    }

    void fit(const Corpus& train, std::uint64_t) override {
        auto y = detail::training_labels(train, "threshold");
        std::vector<double> s(train.size());
        parallel_for(train.size(), jobs, [&](std::size_t i) { s[i] = similarity_of(train[i].view()); });
        std::vector<std::pair<double, bool>> scored;
        for (std::size_t i = 0; i < s.size(); ++i) scored.emplace_back(s[i], y[i] == 1);
        auto best = detail::accuracy_sweep(scored);
        theta_ = best.theta;
        training_accuracy_ = best.accuracy;
        scale_ = std::max(detail::quantile(s, 0.75) - detail::quantile(s, 0.25), 1e-6);
        fitted_ = true;
    }

    bool fitted() const override { return fitted_; }
    double theta() const noexcept { return theta_; }
    double scale() const noexcept { return scale_; }
    double training_accuracy() const noexcept { return training_accuracy_; }

    Verdict decide(const ProblemView& p, std::uint64_t) const override {
        detail::require_fitted(fitted_, "threshold");
        double s = similarity_of(p);
        return make_verdict(logistic((s - theta_) / scale_), s >= theta_);
    }

    nlohmann::json save_state() const override {
        return {{"theta", theta_}, {"scale", scale_}, {"training_accuracy", training_accuracy_}};
    }
    void load_state(const nlohmann::json& j) override {
        theta_ = j.at("theta").get<double>();
        scale_ = j.at("scale").get<double>();
        training_accuracy_ = j.value("training_accuracy", 0.0);
        if (!(scale_ > 0)) throw ValidationError("threshold model: scale must be positive");
        fitted_ = true;
    }

private:
    bool fitted_ = false;
    double theta_ = 0.0, scale_ = 1.0, training_accuracy_ = 0.0;
};

// ---------------------------------------------------------------------------
// GLAD-like

inline constexpr std::size_t kGladFeatures = 12;

inline const std::array<const char*, kGladFeatures>& glad_feature_names() {
    static const std::array<const char*, kGladFeatures> names{
        "manhattan",      "ruzicka",      "cng_profile", "cbc",          "ncd",            "char4_jaccard",
        "fw_cosine",      "punct_manhattan", "length_ratio", "ttr_difference", "intra_manhattan", "occav_ratio"};
    return names;
}

/// The 12 joint features of (D_u, A), in the order of glad_feature_names().
inline std::vector<double> glad_like_features(const ProblemView& p, std::size_t order = 5,
                                              const FeatureSpec& spec = FeatureSpec{}) {
    if (p.known.empty()) throw ValidationError("glad-like features need at least one known document");
    auto v = detail::vectors_of(p, spec);
    const SparseVector center = centroid(v.known);
    const std::string& u = p.unknown.text();
    const std::string a = detail::concat_texts(p.known);
    PpmCompressor c(order);

    std::vector<double> f;
    f.reserve(kGladFeatures);
    f.push_back(manhattan(v.unknown, center));
    f.push_back(ruzicka(v.unknown, center));
    f.push_back(cng_profile_dissimilarity(v.unknown, center, 300));
    f.push_back(cbc(u, a, c));
    f.push_back(ncd(u, a, c));

    auto su = detail::char4_set(u), sa = detail::char4_set(a);
    std::size_t inter = 0;
    for (const auto& g : su) inter += sa.count(g);
    std::size_t uni = su.size() + sa.size() - inter;
    f.push_back(uni ? double(inter) / double(uni) : 1.0);

    f.push_back(cosine(v.unknown.family("fw"), center.family("fw")));
    f.push_back(manhattan(v.unknown.family("punct"), center.family("punct")));

    double mean_len = 0.0, mean_ttr = 0.0;
    for (const auto& d : p.known) {
        mean_len += double(detail::code_points(d.text()));
        mean_ttr += detail::type_token_ratio(d.text());
    }
    mean_len /= double(p.known.size());
    mean_ttr /= double(p.known.size());
    f.push_back(double(detail::code_points(u)) / mean_len);
    f.push_back(std::abs(detail::type_token_ratio(u) - mean_ttr));

    double intra = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < v.known.size(); ++i)
        for (std::size_t j = i + 1; j < v.known.size(); ++j) intra += manhattan(v.known[i], v.known[j]), ++pairs;
    f.push_back(pairs ? intra / double(pairs) : 0.0);

    double ratio = 1.0;
    if (p.known.size() >= 2) {
        OccavVerifier occav;
        occav.order = order;
        auto d = occav.distances(p);
        if (std::abs(d.d_avg) > 1e-9) ratio = d.d_min / d.d_avg;
    }
    f.push_back(ratio);
    return f;
}

/// Standardised glad-like features into an RBF C-SVM; Y iff f(x) >= 0.
class GladLikeVerifier final : public IntrinsicVerifier {
public:
    std::size_t order = 5;
    double c = 1.0;
    double gamma = 0.0;  // 0: 1 / 12
    std::size_t jobs = 1;

    MethodDescriptor descriptor() const override {
        return {"glad-like", Category::binary_intrinsic, true, true, Provenance::labeled_corpus};
    }
    DecisionCriterion criterion() const override {
        return {DecisionCriterion::Kind::decision_model, 0.0, fitted_ ? save_state() : nlohmann::json(),
                Provenance::labeled_corpus};
    }
    nlohmann::json parameters() const override {
        return {{"glad.order", order}, {"glad.c", c}, {"glad.gamma", gamma}};
    }

    void fit(const Corpus& train, std::uint64_t) override {
        auto y = detail::training_labels(train, "glad-like");
        svm::Matrix x(train.size());
        parallel_for(train.size(), jobs, [&](std::size_t i) { x[i] = glad_like_features(train[i].view(), order); });
        fit_features(x, y);
    }

    /// Fit from precomputed feature rows (also used by tests on toy data).
    void fit_features(const svm::Matrix& x, const std::vector<int>& y) {
        scaler_ = svm::Standardizer::fit(x);
        svm::Matrix z;
        for (const auto& row : x) z.push_back(scaler_.apply(row));
        svm::KernelSvmOptions o;
        o.c = c;
        o.gamma = gamma > 0 ? gamma : 1.0 / double(x.front().size());
        model_ = svm::train_kernel_svm(z, y, o);
        fitted_ = true;
    }

    bool fitted() const override { return fitted_; }

    double decision_value(const std::vector<double>& features) const {
        detail::require_fitted(fitted_, "glad-like");
        return model_.decision(scaler_.apply(features));
    }

    Verdict decide(const ProblemView& p, std::uint64_t) const override {
        double f = decision_value(glad_like_features(p, order));
        return make_verdict(logistic(f), f >= 0.0);
    }

    nlohmann::json save_state() const override {
        return {{"scaler", scaler_.to_json()}, {"svm", model_.to_json()}};
    }
    void load_state(const nlohmann::json& j) override {
        scaler_ = svm::Standardizer::from_json(j.at("scaler"));
        model_ = svm::KernelModel::from_json(j.at("svm"));
        fitted_ = true;
    }

private:
    bool fitted_ = false;
    svm::Standardizer scaler_;
    svm::KernelModel model_;
};

// ---------------------------------------------------------------------------
// unmasking

struct UnmaskingOptions {
    std::size_t chunk_words = 500;
    std::size_t min_chunk_words = 50;
    std::size_t top_words = 250;
    std::size_t remove_per_class = 3;
    std::size_t rounds = 10;
    std::size_t folds = 5;
};

/// Degradation curve of cross-validated chunk-classification accuracy for
/// D_u against concat(A). The chunk size shrinks from chunk_words so that
/// each side yields at least two chunks, but never below min_chunk_words.
inline std::vector<double> unmasking_curve(const ProblemView& p, const UnmaskingOptions& o, std::uint64_t seed) {
    auto wu = detail::lower_words(p.unknown.text());
    std::vector<std::string> wa;
    for (const auto& d : p.known) {
        auto w = detail::lower_words(d.text());
        wa.insert(wa.end(), w.begin(), w.end());
    }
    const std::size_t size = std::min({o.chunk_words, wu.size() / 2, wa.size() / 2});
    if (size < o.min_chunk_words || size == 0) throw ValidationError("documents too short for unmasking");

    std::unordered_map<std::string, std::size_t> freq;
    for (const auto& w : wu) ++freq[w];
    for (const auto& w : wa) ++freq[w];
    std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
        return x.second != y.second ? x.second > y.second : x.first < y.first;
    });
    if (ranked.size() > o.top_words) ranked.resize(o.top_words);
    std::unordered_map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < ranked.size(); ++i) column[ranked[i].first] = i;

    svm::Matrix x;
    std::vector<int> y;
    auto add_chunks = [&](const std::vector<std::string>& w, int label) {
        for (std::size_t start = 0; start + size <= w.size(); start += size) {
            std::vector<double> row(ranked.size(), 0.0);
            for (std::size_t i = start; i < start + size; ++i) {
                auto it = column.find(w[i]);
                if (it != column.end()) row[it->second] += 1.0 / double(size);
            }
            x.push_back(std::move(row));
            y.push_back(label);
        }
    };
    add_chunks(wu, 1);
    add_chunks(wa, -1);

    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < y.size(); ++i) (y[i] == 1 ? pos : neg).push_back(i);
    const std::size_t k = std::max<std::size_t>(2, std::min({o.folds, pos.size(), neg.size()}));

    Rng rng(seed);
    std::vector<bool> active(ranked.size(), true);
    std::vector<double> curve;
    svm::LinearSvmOptions lo;
    for (std::size_t round = 0; round < o.rounds; ++round) {
        auto masked = [&](const std::vector<double>& row) {
            std::vector<double> r(row);
            for (std::size_t j = 0; j < r.size(); ++j)
                if (!active[j]) r[j] = 0.0;
            return r;
        };
        // stratified folds over a fresh shuffle
        std::vector<std::size_t> fold(y.size());
        for (auto* cls : {&pos, &neg}) {
            std::vector<std::size_t> order(*cls);
            std::shuffle(order.begin(), order.end(), rng);
            for (std::size_t i = 0; i < order.size(); ++i) fold[order[i]] = i % k;
        }
        std::size_t correct = 0;
        for (std::size_t f = 0; f < k; ++f) {
            svm::Matrix tx;
            std::vector<int> ty;
            for (std::size_t i = 0; i < y.size(); ++i)
                if (fold[i] != f) tx.push_back(masked(x[i])), ty.push_back(y[i]);
            auto m = svm::train_linear_svm(tx, ty, lo, rng());
            for (std::size_t i = 0; i < y.size(); ++i)
                if (fold[i] == f && ((m.decision(masked(x[i])) >= 0.0) == (y[i] == 1))) ++correct;
        }
        curve.push_back(double(correct) / double(y.size()));

        // drop the strongest features of each class from a fit on all chunks
        svm::Matrix all;
        for (const auto& row : x) all.push_back(masked(row));
        auto m = svm::train_linear_svm(all, y, lo, rng());
        std::vector<std::size_t> idx;
        for (std::size_t j = 0; j < active.size(); ++j)
            if (active[j]) idx.push_back(j);
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return m.w[a] > m.w[b]; });
        for (std::size_t r = 0; r < o.remove_per_class && r < idx.size(); ++r) active[idx[r]] = false;
        for (std::size_t r = 0; r < o.remove_per_class && r < idx.size(); ++r) active[idx[idx.size() - 1 - r]] = false;
    }
    return curve;
}

/// Curve plus its first differences.
inline std::vector<double> unmasking_meta_features(const std::vector<double>& curve) {
    std::vector<double> f(curve);
    for (std::size_t i = 1; i < curve.size(); ++i) f.push_back(curve[i] - curve[i - 1]);
    return f;
}

class UnmaskingVerifier final : public IntrinsicVerifier {
public:
    UnmaskingOptions options;
    std::size_t jobs = 1;

    MethodDescriptor descriptor() const override {
        return {"unmasking", Category::binary_intrinsic, false, true, Provenance::labeled_corpus};
    }
    DecisionCriterion criterion() const override {
        return {DecisionCriterion::Kind::decision_model, 0.0, fitted_ ? save_state() : nlohmann::json(),
                Provenance::labeled_corpus};
    }
    nlohmann::json parameters() const override {
        return {{"unmasking.chunk_words", options.chunk_words},   {"unmasking.min_chunk_words", options.min_chunk_words},
                {"unmasking.top_words", options.top_words},       {"unmasking.remove", options.remove_per_class},
                {"unmasking.rounds", options.rounds},             {"unmasking.folds", options.folds}};
    }

    void fit(const Corpus& train, std::uint64_t seed) override {
        auto y = detail::training_labels(train, "unmasking");
        svm::Matrix x(train.size());
        parallel_for(train.size(), jobs, [&](std::size_t i) {
            x[i] = unmasking_meta_features(
                unmasking_curve(train[i].view(), options, derive_seed(seed, 0, train[i].id())));
        });
        scaler_ = svm::Standardizer::fit(x);
        svm::Matrix z;
        for (const auto& row : x) z.push_back(scaler_.apply(row));
        model_ = svm::train_linear_svm(z, y, svm::LinearSvmOptions{}, derive_seed(seed, "unmasking/meta"));
        fitted_ = true;
    }

    bool fitted() const override { return fitted_; }

    Verdict decide(const ProblemView& p, std::uint64_t seed) const override {
        detail::require_fitted(fitted_, "unmasking");
        double f = model_.decision(scaler_.apply(unmasking_meta_features(unmasking_curve(p, options, seed))));
        return make_verdict(logistic(f), f >= 0.0);
    }

    nlohmann::json save_state() const override {
        return {{"scaler", scaler_.to_json()}, {"meta", model_.to_json()}};
    }
    void load_state(const nlohmann::json& j) override {
        scaler_ = svm::Standardizer::from_json(j.at("scaler"));
        model_ = svm::LinearModel::from_json(j.at("meta"));
        fitted_ = true;
    }

private:
    bool fitted_ = false;
    svm::Standardizer scaler_;
    svm::LinearModel model_;
};

// ---------------------------------------------------------------------------
// General Impostors

/// For K iterations, restrict Ruzicka similarity to a random fraction r of
/// the feature keys and count how often the best reference document beats
/// the best of m sampled impostors. Score = count / K; Y iff score >= sigma.
class GiVerifier final : public ExtrinsicVerifier {
public:
    FeatureSpec features;
    std::size_t impostors = 30;
    std::size_t iterations = 100;
    double fraction = 0.5;
    double sigma = 0.5;
    std::size_t jobs = 1;

    MethodDescriptor descriptor() const override {
        return {"gi", Category::binary_extrinsic, false, true, Provenance::external_documents};
    }
    DecisionCriterion criterion() const override {
        return {DecisionCriterion::Kind::scalar_threshold, sigma, {}, Provenance::external_documents};
    }
    nlohmann::json parameters() const override {
        auto j = detail::feature_parameters(features);
        j["gi.impostors"] = impostors;
        j["gi.iterations"] = iterations;
        j["gi.fraction"] = fraction;
        j["gi.sigma"] = sigma;
        return j;
    }

    void validate() const {
        if (impostors == 0) throw ValidationError("gi.impostors must be at least 1");
        if (iterations == 0) throw ValidationError("gi.iterations must be at least 1");
        if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("gi.fraction must lie in (0, 1]");
    }

    /// count / K for one problem.
    double raw_score(const ProblemView& p, const ImpostorPool& pool, std::uint64_t seed) const {
        validate();
        if (pool.empty()) throw ValidationError("impostor pool for '" + pool.problem_id + "' is empty");
        std::size_t m = impostors;
        if (m > pool.size()) {
            warn_once("gi-clamp-" + std::to_string(m) + "-" + std::to_string(pool.size()),
                      "gi: " + std::to_string(m) + " impostors requested but the pool holds " +
                          std::to_string(pool.size()) + "; using the whole pool");
            m = pool.size();
        }
        Rng rng(seed);
        std::vector<std::size_t> pick(pool.size());
        std::iota(pick.begin(), pick.end(), 0);
        for (std::size_t i = 0; i < m; ++i) std::swap(pick[i], pick[i + uniform_index(rng, pick.size() - i)]);
        pick.resize(m);
        std::sort(pick.begin(), pick.end());

        SparseVector u = extract_features(p.unknown, features);
        std::vector<SparseVector> refs, imps;
        for (const auto& d : p.known) refs.push_back(extract_features(d, features));
        for (std::size_t i : pick) imps.push_back(extract_features(pool.documents[i].get(), features));

        // global key set (first-appearance order); ids[v][i] is the key index of entry i of vector v
        std::unordered_map<std::string_view, std::uint32_t> index_of;
        index_of.reserve(4 * u.size());
        auto collect = [&](const SparseVector& v) {
            std::vector<std::uint32_t> ids;
            ids.reserve(v.size());
            for (const auto& e : v) ids.push_back(index_of.emplace(e.first, std::uint32_t(index_of.size())).first->second);
            return ids;
        };
        const auto u_ids = collect(u);
        std::vector<std::vector<std::uint32_t>> ref_ids, imp_ids;
        for (const auto& v : refs) ref_ids.push_back(collect(v));
        for (const auto& v : imps) imp_ids.push_back(collect(v));
        const std::size_t n_keys = index_of.size();

        // per-pair (key, min, max) over the union of the two supports
        struct Term {
            std::uint32_t key;
            double lo, hi;
        };
        auto pair_terms = [&](const SparseVector& other, const std::vector<std::uint32_t>& other_ids) {
            std::vector<Term> t;
            t.reserve(u.size() + other.size());
            const auto& x = u.entries();
            const auto& y = other.entries();
            std::size_t i = 0, j = 0;
            while (i < x.size() || j < y.size()) {
                if (j == y.size() || (i < x.size() && x[i].first < y[j].first)) {
                    t.push_back({u_ids[i], 0.0, x[i].second});
                    ++i;
                } else if (i == x.size() || y[j].first < x[i].first) {
                    t.push_back({other_ids[j], 0.0, y[j].second});
                    ++j;
                } else {
                    t.push_back({u_ids[i], std::min(x[i].second, y[j].second), std::max(x[i].second, y[j].second)});
                    ++i, ++j;
                }
            }
            return t;
        };
        std::vector<std::vector<Term>> ref_terms, imp_terms;
        for (std::size_t r = 0; r < refs.size(); ++r) ref_terms.push_back(pair_terms(refs[r], ref_ids[r]));
        for (std::size_t m2 = 0; m2 < imps.size(); ++m2) imp_terms.push_back(pair_terms(imps[m2], imp_ids[m2]));

        const std::size_t sample = std::max<std::size_t>(1, std::size_t(std::llround(fraction * double(n_keys))));
        std::vector<std::uint32_t> perm(n_keys);
        std::iota(perm.begin(), perm.end(), 0u);
        std::vector<std::uint8_t> mask(n_keys);
        auto restricted = [&](const std::vector<Term>& terms) {
            double lo = 0.0, hi = 0.0;
            for (const auto& t : terms) {  // branch-free: the mask is half ones, half zeros
                const double w = mask[t.key];
                lo += w * t.lo;
                hi += w * t.hi;
            }
            return hi > 0.0 ? lo / hi : 0.0;
        };
        std::size_t count = 0;
        for (std::size_t it = 0; it < iterations; ++it) {
            std::fill(mask.begin(), mask.end(), std::uint8_t(0));
            for (std::size_t i = 0; i < sample; ++i) {
                std::swap(perm[i], perm[i + uniform_index(rng, perm.size() - i)]);
                mask[perm[i]] = 1;
            }
            double best_ref = 0.0, best_imp = 0.0;
            for (const auto& t : ref_terms) best_ref = std::max(best_ref, restricted(t));
            for (const auto& t : imp_terms) best_imp = std::max(best_imp, restricted(t));
            if (best_ref > best_imp) ++count;
        }
        return double(count) / double(iterations);
    }

    /// The score stays on the {0, 1/K, ..., 1} grid; with the default sigma of
    /// 0.5 it also obeys the uniform Y <=> score >= 0.5 rule.
    Verdict decide(const ProblemView& p, const ImpostorPool& pool, std::uint64_t seed) const override {
        double s = raw_score(p, pool, seed);
        return Verdict{s, s >= sigma ? Label::Y : Label::N};
    }

    bool tunable() const override { return true; }

    /// Sweeps sigma for training accuracy, pools drawn from the training corpus.
    void fit(const Corpus& train, std::uint64_t seed) override {
        auto y = detail::training_labels(train, "gi");
        std::vector<double> s(train.size());
        parallel_for(train.size(), jobs, [&](std::size_t i) {
            s[i] = raw_score(train[i].view(), impostor_pool_for(train, train[i].id()), derive_seed(seed, 0, train[i].id()));
        });
        std::vector<std::pair<double, bool>> scored;
        for (std::size_t i = 0; i < s.size(); ++i) scored.emplace_back(s[i], y[i] == 1);
        sigma = detail::accuracy_sweep(scored).theta;
    }

    nlohmann::json save_state() const override { return {{"sigma", sigma}}; }
    void load_state(const nlohmann::json& j) override { sigma = j.at("sigma").get<double>(); }
};

// ---------------------------------------------------------------------------
// NNCD

/// Nearest neighbour by NCD over A and the pool; Y iff the nearest is in A
/// (ties reject). Score ncd_imp_min / (ncd_A_min + ncd_imp_min).
class NncdVerifier final : public ExtrinsicVerifier {
public:
    std::size_t order = 5;

    MethodDescriptor descriptor() const override {
        return {"nncd", Category::binary_extrinsic, true, false, Provenance::external_documents};
    }
    DecisionCriterion criterion() const override {
        return {DecisionCriterion::Kind::scalar_threshold, 0.5, {}, Provenance::external_documents};
    }
    nlohmann::json parameters() const override { return {{"nncd.order", order}}; }

    struct Nearest {
        double known_min = std::numeric_limits<double>::infinity();
        double impostor_min = std::numeric_limits<double>::infinity();
    };

    Nearest nearest(const ProblemView& p, const ImpostorPool& pool) const {
        if (pool.empty()) throw ValidationError("impostor pool for '" + pool.problem_id + "' is empty");
        PpmCompressor c(order);
        const std::string& u = p.unknown.text();
        if (u.empty()) throw ValidationError("ncd requires non-empty inputs");
        const double cu = double(c.compressed_size(u));
        auto dist = [&](const std::string& x) {
            if (x.empty()) throw ValidationError("ncd requires non-empty inputs");
            const double cx = double(c.compressed_size(x));
            return std::min(ncd_from_sizes(cu, cx, double(c.compressed_size(u + x))),
                            ncd_from_sizes(cu, cx, double(c.compressed_size(x + u))));
        };
        Nearest r;
        for (const auto& d : p.known) r.known_min = std::min(r.known_min, dist(d.text()));
        for (const auto& d : pool.documents) r.impostor_min = std::min(r.impostor_min, dist(d.get().text()));
        return r;
    }

    Verdict decide(const ProblemView& p, const ImpostorPool& pool, std::uint64_t) const override {
        auto r = nearest(p, pool);
        double a = std::max(r.known_min, 0.0), b = std::max(r.impostor_min, 0.0);
        double score = (a + b == 0.0) ? 0.5 : b / (a + b);
        return make_verdict(score, r.known_min < r.impostor_min);
    }
};

}  // namespace averify
