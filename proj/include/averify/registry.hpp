#pragma once

#include <charconv>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "averify/binary.hpp"
#include "averify/unary.hpp"
#include "averify/verifier.hpp"

// Method construction by name from namespaced string parameters
// ("lof.k" = "3", "features.orders" = "2,3,4", ...), and the model artifact
// format written by `averify train`.

namespace averify {

using ParamMap = std::map<std::string, std::string>;

/// Unary verifier that peeks at the truth labels of the other problems in its
/// corpus. It exists only to prove that the audit catches such leaks.
class LeakySiblingLabelsVerifier final : public UnaryVerifier {
public:
    explicit LeakySiblingLabelsVerifier(const Corpus* corpus) : corpus_(corpus) {
        if (!corpus_) throw ValidationError("leaky-sibling-labels needs a corpus");
    }

    MethodDescriptor descriptor() const override {
        return {"leaky-sibling-labels", Category::unary, true, true, Provenance::target_class_only};
    }
    DecisionCriterion criterion() const override {
        return {DecisionCriterion::Kind::scalar_threshold, 0.5, {}, Provenance::target_class_only};
    }
    nlohmann::json parameters() const override { return nlohmann::json::object(); }

    Verdict decide(const ProblemView& p, std::uint64_t) const override {
        std::size_t y = 0, total = 0;
        for (const auto& q : corpus_->problems()) {
            if (&q.unknown() == &p.unknown) continue;
            if (q.label()) y += *q.label() == Label::Y, ++total;
        }
        double share = total ? double(y) / double(total) : 0.5;
        return make_verdict(share, share >= 0.5);
    }

private:
    const Corpus* corpus_;
};

namespace detail {

inline const std::vector<std::string>& public_methods() {
    static const std::vector<std::string> names{"occ_knn",   "occav",     "lof",        "iforest", "svdd",
                                                "threshold", "glad-like", "unmasking", "gi",      "nncd"};
    return names;
}

inline std::string canonical_method(std::string name) {
    std::map<std::string, std::string> aliases{{"occ-knn", "occ_knn"}, {"glad", "glad-like"}, {"glad_like", "glad-like"}};
    auto it = aliases.find(name);
    return it == aliases.end() ? name : it->second;
}

inline const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "features.orders",       "features.punct",     "features.fw",          "features.keep_all",
        "features.top_k",        "features.normalize", "occ_knn.distance",     "occ_knn.profile_length",
        "occav.order",           "lof.k",              "lof.tau",              "lof.distance",
        "lof.profile_length",    "iforest.trees",      "svdd.gamma",           "svdd.nu",
        "threshold.similarity",  "threshold.profile_length", "threshold.order", "glad.order",
        "glad.c",                "glad.gamma",         "unmasking.chunk_words", "unmasking.min_chunk_words",
        "unmasking.top_words",   "unmasking.remove",   "unmasking.rounds",     "unmasking.folds",
        "gi.impostors",          "gi.iterations",      "gi.fraction",          "gi.sigma",
        "nncd.order"};
    return keys;
}

class Params {
public:
    explicit Params(const ParamMap& m) : m_(m) {}

    std::optional<std::string> raw(const std::string& key) const {
        auto it = m_.find(key);
        return it == m_.end() ? std::nullopt : std::optional<std::string>(it->second);
    }

    std::size_t size(const std::string& key, std::size_t fallback) const {
        auto v = raw(key);
        if (!v) return fallback;
        std::size_t out = 0;
        auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
        if (ec != std::errc() || p != v->data() + v->size())
            throw ValidationError("parameter " + key + " must be a non-negative integer, got '" + *v + "'");
        return out;
    }

    double real(const std::string& key, double fallback) const {
        auto v = raw(key);
        if (!v) return fallback;
        try {
            std::size_t used = 0;
            double d = std::stod(*v, &used);
            if (used != v->size() || !std::isfinite(d)) throw std::invalid_argument("trailing");
            return d;
        } catch (const std::exception&) {
            throw ValidationError("parameter " + key + " must be a number, got '" + *v + "'");
        }
    }

    bool flag(const std::string& key, bool fallback) const {
        auto v = raw(key);
        if (!v) return fallback;
        if (*v == "true" || *v == "1" || *v == "yes") return true;
        if (*v == "false" || *v == "0" || *v == "no") return false;
        throw ValidationError("parameter " + key + " must be true or false, got '" + *v + "'");
    }

private:
    const ParamMap& m_;
};

inline FeatureSpec feature_spec(const Params& p) {
    FeatureSpec f;
    if (auto v = p.raw("features.orders")) {
        f.char_ngram_orders.clear();
        std::string item;
        std::stringstream ss(*v);
        while (std::getline(ss, item, ',')) {
            if (item.empty()) continue;
            try {
                f.char_ngram_orders.insert(std::stoi(item));
            } catch (const std::exception&) {
                throw ValidationError("features.orders must be a comma-separated list of integers, got '" + *v + "'");
            }
        }
    }
    f.include_punctuation = p.flag("features.punct", f.include_punctuation);
    f.include_function_words = p.flag("features.fw", f.include_function_words);
    f.keep_all_features = p.flag("features.keep_all", f.keep_all_features);
    f.top_k = p.size("features.top_k", f.top_k);
    if (auto v = p.raw("features.normalize")) {
        if (*v == "global")
            f.normalization = FeatureSpec::Normalization::global;
        else if (*v == "family")
            f.normalization = FeatureSpec::Normalization::family;
        else
            throw ValidationError("features.normalize must be global or family, got '" + *v + "'");
    }
    f.validate();
    return f;
}

inline DistanceSpec distance_spec(const Params& p, const std::string& ns) {
    DistanceSpec d;
    if (auto v = p.raw(ns + ".distance")) d.kind = parse_distance_kind(*v);
    d.profile_length = p.size(ns + ".profile_length", d.profile_length);
    if (d.profile_length == 0) throw ValidationError(ns + ".profile_length must be positive");
    return d;
}

inline std::size_t compression_order(const Params& p, const std::string& key) {
    std::size_t order = p.size(key, 5);
    if (order < 1 || order > 8) throw ValidationError(key + " must lie in 1..8");
    return order;
}

}  // namespace detail

/// Names accepted by make_verifier, in presentation order (hidden test-only
/// methods excluded).
inline const std::vector<std::string>& method_names() { return detail::public_methods(); }

/// Rejects keys that no method understands.
inline void validate_parameter_keys(const ParamMap& params) {
    for (const auto& [k, v] : params)
        if (!detail::known_keys().count(k)) throw ValidationError("unknown parameter '" + k + "'");
}

/// `context` is only consulted by the hidden leaky test verifier.
inline std::unique_ptr<Verifier> make_verifier(const std::string& requested, const ParamMap& params = {},
                                               const Corpus* context = nullptr) {
    validate_parameter_keys(params);
    const std::string name = detail::canonical_method(requested);
    detail::Params p(params);

    if (name == "occ_knn") {
        auto v = std::make_unique<OccKnnVerifier>();
        v->features = detail::feature_spec(p);
        v->distance = detail::distance_spec(p, "occ_knn");
        return v;
    }
    if (name == "occav") {
        auto v = std::make_unique<OccavVerifier>();
        v->order = detail::compression_order(p, "occav.order");
        return v;
    }
    if (name == "lof") {
        auto v = std::make_unique<LofVerifier>();
        v->features = detail::feature_spec(p);
        v->distance = detail::distance_spec(p, "lof");
        v->k = p.size("lof.k", 0);
        v->tau = p.real("lof.tau", 1.2);
        if (!(v->tau > 0)) throw ValidationError("lof.tau must be positive");
        return v;
    }
    if (name == "iforest") {
        auto v = std::make_unique<IForestVerifier>();
        v->features = detail::feature_spec(p);
        v->trees = p.size("iforest.trees", 100);
        if (v->trees == 0) throw ValidationError("iforest.trees must be positive");
        return v;
    }
    if (name == "svdd") {
        auto v = std::make_unique<SvddVerifier>();
        v->features = detail::feature_spec(p);
        v->gamma = p.real("svdd.gamma", 0.0);
        v->nu = p.real("svdd.nu", 0.1);
        if (v->gamma < 0) throw ValidationError("svdd.gamma must be >= 0 (0 = median heuristic)");
        if (!(v->nu > 0 && v->nu <= 1)) throw ValidationError("svdd.nu must lie in (0, 1]");
        return v;
    }
    if (name == "threshold") {
        auto v = std::make_unique<ThresholdVerifier>();
        v->features = detail::feature_spec(p);
        std::map<std::string, double> sp;
        auto kind = parse_similarity_kind(p.raw("threshold.similarity").value_or("manhattan-sim"));
        if (p.raw("threshold.profile_length")) sp["profile_length"] = double(p.size("threshold.profile_length", 300));
        if (p.raw("threshold.order")) sp["order"] = double(p.size("threshold.order", 5));
        v->similarity = SimilaritySpec(kind, sp);
        return v;
    }
    if (name == "glad-like") {
        auto v = std::make_unique<GladLikeVerifier>();
        v->order = detail::compression_order(p, "glad.order");
        v->c = p.real("glad.c", 1.0);
        v->gamma = p.real("glad.gamma", 0.0);
        if (!(v->c > 0)) throw ValidationError("glad.c must be positive");
        if (v->gamma < 0) throw ValidationError("glad.gamma must be >= 0 (0 = 1/12)");
        return v;
    }
    if (name == "unmasking") {
        auto v = std::make_unique<UnmaskingVerifier>();
        auto& o = v->options;
        o.chunk_words = p.size("unmasking.chunk_words", o.chunk_words);
        o.min_chunk_words = p.size("unmasking.min_chunk_words", o.min_chunk_words);
        o.top_words = p.size("unmasking.top_words", o.top_words);
        o.remove_per_class = p.size("unmasking.remove", o.remove_per_class);
        o.rounds = p.size("unmasking.rounds", o.rounds);
        o.folds = p.size("unmasking.folds", o.folds);
        if (o.chunk_words == 0 || o.min_chunk_words == 0 || o.top_words == 0 || o.rounds == 0 || o.folds < 2)
            throw ValidationError("unmasking parameters must be positive (folds >= 2)");
        return v;
    }
    if (name == "gi") {
        auto v = std::make_unique<GiVerifier>();
        v->features = detail::feature_spec(p);
        v->impostors = p.size("gi.impostors", v->impostors);
        v->iterations = p.size("gi.iterations", v->iterations);
        v->fraction = p.real("gi.fraction", v->fraction);
        v->sigma = p.real("gi.sigma", v->sigma);
        v->validate();
        return v;
    }
    if (name == "nncd") {
        auto v = std::make_unique<NncdVerifier>();
        v->order = detail::compression_order(p, "nncd.order");
        return v;
    }
    if (name == "leaky-sibling-labels") return std::make_unique<LeakySiblingLabelsVerifier>(context);

    std::string known;
    for (const auto& m : method_names()) known += (known.empty() ? "" : ", ") + m;
    throw ValidationError("unknown method '" + requested + "' (known: " + known + ")");
}

/// Forwards a worker count to verifiers whose fit can fan out.
inline void set_fit_jobs(Verifier& v, std::size_t jobs) {
    if (auto* t = dynamic_cast<ThresholdVerifier*>(&v)) t->jobs = jobs;
    if (auto* g = dynamic_cast<GladLikeVerifier*>(&v)) g->jobs = jobs;
    if (auto* u = dynamic_cast<UnmaskingVerifier*>(&v)) u->jobs = jobs;
    if (auto* i = dynamic_cast<GiVerifier*>(&v)) i->jobs = jobs;
}

// ---------------------------------------------------------------------------
// model artifacts

inline constexpr int kModelVersion = 1;

/// Parameters back to the string form make_verifier accepts.
inline ParamMap parameters_to_map(const nlohmann::json& params) {
    ParamMap m;
    for (auto it = params.begin(); it != params.end(); ++it) {
        const auto& v = it.value();
        if (v.is_string())
            m[it.key()] = v.get<std::string>();
        else if (v.is_boolean())
            m[it.key()] = v.get<bool>() ? "true" : "false";
        else if (v.is_array()) {
            std::string s;
            for (const auto& x : v) s += (s.empty() ? "" : ",") + x.dump();
            m[it.key()] = s;
        } else
            m[it.key()] = v.dump();
    }
    return m;
}

struct TrainingInfo {
    std::string corpus_id;
    std::size_t problems = 0;
    std::uint64_t seed = 0;
};

inline nlohmann::json save_model(const Verifier& v, const TrainingInfo& info) {
    const auto d = v.descriptor();
    nlohmann::json state;
    if (auto* i = dynamic_cast<const IntrinsicVerifier*>(&v)) {
        detail::require_fitted(i->fitted(), d.name);
        state = i->save_state();
    } else if (auto* e = dynamic_cast<const ExtrinsicVerifier*>(&v)) {
        state = e->save_state();
    } else {
        throw ValidationError(d.name + " is unary and has no trainable state");
    }
    return {{"format", "averify-model"},
            {"version", kModelVersion},
            {"method", d.name},
            {"category", to_string(d.category)},
            {"parameters", v.parameters()},
            {"criterion", v.criterion().to_json()},
            {"training", {{"corpus", info.corpus_id}, {"problems", info.problems}, {"seed", info.seed}}},
            {"state", state}};
}

inline std::unique_ptr<Verifier> load_model(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "averify-model") throw ValidationError("not an averify model file");
        if (j.at("version").get<int>() != kModelVersion)
            throw ValidationError("unsupported model version " + std::to_string(j.at("version").get<int>()));
        auto v = make_verifier(j.at("method").get<std::string>(), parameters_to_map(j.at("parameters")));
        if (auto* i = dynamic_cast<IntrinsicVerifier*>(v.get()))
            i->load_state(j.at("state"));
        else if (auto* e = dynamic_cast<ExtrinsicVerifier*>(v.get()))
            e->load_state(j.at("state"));
        return v;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed model file: ") + e.what());
    }
}

}  // namespace averify
