#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <vector>

#include "averify/compression.hpp"
#include "averify/features.hpp"
#include "averify/svm.hpp"
#include "averify/verifier.hpp"

// One-class verifiers. Everything here sees only D_u and A.

namespace averify {

namespace detail {

inline void require_references(const ProblemView& p, std::size_t at_least, const char* message) {
    if (p.known.size() < at_least) throw ValidationError(message);
}

struct ProblemVectors {
    SparseVector unknown;
    std::vector<SparseVector> known;
};

inline ProblemVectors vectors_of(const ProblemView& p, const FeatureSpec& spec) {
    ProblemVectors v{extract_features(p.unknown, spec), {}};
    v.known.reserve(p.known.size());
    for (const auto& d : p.known) v.known.push_back(extract_features(d, spec));
    return v;
}

/// Dense coordinates over the union of the keys of `basis` (sorted), so the
/// same layout can be applied to further vectors.
class DenseLayout {
public:
    explicit DenseLayout(std::span<const SparseVector> basis) {
        std::set<std::string> keys;
        for (const auto& v : basis)
            for (const auto& [k, w] : v) keys.insert(k);
        keys_.assign(keys.begin(), keys.end());
    }

    std::vector<double> project(const SparseVector& v) const {
        std::vector<double> out(keys_.size(), 0.0);
        auto it = v.begin();
        for (std::size_t i = 0; i < keys_.size() && it != v.end(); ++i) {
            while (it != v.end() && it->first < keys_[i]) ++it;
            if (it != v.end() && it->first == keys_[i]) out[i] = it->second;
        }
        return out;
    }

    std::size_t size() const noexcept { return keys_.size(); }

private:
    std::vector<std::string> keys_;
};

inline nlohmann::json feature_parameters(const FeatureSpec& f) {
    return {{"features.orders", std::vector<int>(f.char_ngram_orders.begin(), f.char_ngram_orders.end())},
            {"features.punct", f.include_punctuation},
            {"features.fw", f.include_function_words},
            {"features.keep_all", f.keep_all_features},
            {"features.top_k", f.top_k},
            {"features.normalize", f.normalization == FeatureSpec::Normalization::global ? "global" : "family"}};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// OCC-kNN

/// Accept when the nearest reference is at least as close to D_u as that
/// reference is to its own nearest neighbour in A. Ties accept.
class OccKnnVerifier final : public UnaryVerifier {
public:
    FeatureSpec features;
    DistanceSpec distance;

    MethodDescriptor descriptor() const override {
        return {"occ_knn", Category::unary, true, true, Provenance::target_class_only};
    }
    DecisionCriterion criterion() const override {
        return {DecisionCriterion::Kind::scalar_threshold, 1.0, {}, Provenance::target_class_only};
    }
    nlohmann::json parameters() const override {
        auto j = detail::feature_parameters(features);
        j["occ_knn.distance"] = to_string(distance.kind);
        j["occ_knn.profile_length"] = distance.profile_length;
        return j;
    }

    Verdict decide(const ProblemView& p, std::uint64_t) const override {
        detail::require_references(p, 2, "reference set too small for OCC-kNN");
        auto v = detail::vectors_of(p, features);
        std::size_t nearest = 0;
        double d1 = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < v.known.size(); ++i) {
            double d = distance(v.unknown, v.known[i]);
            if (d < d1) d1 = d, nearest = i;
        }
        double d2 = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < v.known.size(); ++j)
            if (j != nearest) d2 = std::min(d2, distance(v.known[nearest], v.known[j]));
        double score = (d1 + d2 == 0.0) ? 0.5 : d2 / (d1 + d2);
        return make_verdict(score, d1 <= d2);
    }
};

// ---------------------------------------------------------------------------
// OCCAV

/// Compression-based one-class rule: accept iff d_min < d_avg (strict).
class OccavVerifier final : public UnaryVerifier {
public:
    std::size_t order = 5;

    MethodDescriptor descriptor() const override {
        return {"occav", Category::unary, true, false, Provenance::target_class_only};
    }
    DecisionCriterion criterion() const override {
        return {DecisionCriterion::Kind::scalar_threshold, 1.0, {}, Provenance::target_class_only};
    }
    nlohmann::json parameters() const override { return {{"occav.order", order}}; }

    struct Distances {
        double d_min = 0.0;
        double d_avg = 0.0;
        std::size_t nearest = 0;
    };

    /// d_min = min_i cbc(D_u, A_i) at A_near; d_avg = mean_j!=near cbc(A_near, A_j).
    Distances distances(const ProblemView& p) const {
        detail::require_references(p, 2, "reference set too small for OCCAV (d_avg undefined)");
        PpmCompressor c(order);
        const std::string& u = p.unknown.text();
        std::vector<const std::string*> a;
        for (const auto& d : p.known) a.push_back(&d.text());
        auto size_of = [&](const std::string& s) { return double(c.compressed_size(s)); };
        const double cu = size_of(u);
        std::vector<double> ca;
        for (auto* s : a) ca.push_back(size_of(*s));
        auto joint = [&](const std::string& x, const std::string& y) { return size_of(x + y); };

        Distances r;
        r.d_min = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < a.size(); ++i) {
            double d = cbc_from_sizes(cu, ca[i], joint(u, *a[i]));
            if (d < r.d_min) r.d_min = d, r.nearest = i;
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j)
            if (j != r.nearest) sum += cbc_from_sizes(ca[r.nearest], ca[j], joint(*a[r.nearest], *a[j]));
        r.d_avg = sum / double(a.size() - 1);
        return r;
    }

    Verdict decide(const ProblemView& p, std::uint64_t) const override {
        auto d = distances(p);
        // cbc can dip marginally below zero for near-duplicates; clip for the score only
        double lo = std::max(d.d_min, 0.0), hi = std::max(d.d_avg, 0.0);
        double score = (lo + hi == 0.0) ? 0.5 : hi / (lo + hi);
        return make_verdict(score, d.d_min < d.d_avg);
    }
};

// ---------------------------------------------------------------------------
// LOF

/// LOF of a query against reference points, from distances only.
///   among[i][j]  distance between references i and j
///   query[i]     distance from the query to reference i
/// Neighbourhoods include every point tied with the k-th distance.
inline double lof_from_distances(const svm::Matrix& among, const std::vector<double>& query, std::size_t k) {
    const std::size_t n = query.size();
    if (k < 1 || k + 1 > n)
        throw ValidationError("LOF k must lie in 1.." + std::to_string(n == 0 ? 0 : n - 1) + ", got " + std::to_string(k));
    constexpr double floor = 1e-12;

    auto kth = [&](std::vector<double> d) {
        std::nth_element(d.begin(), d.begin() + long(k - 1), d.end());
        return d[k - 1];
    };
    // k-distance of each reference within A \ {itself}
    std::vector<double> kdist(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> d;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) d.push_back(among[i][j]);
        kdist[i] = kth(d);
    }
    auto lrd_ref = [&](std::size_t i) {
        double sum = 0.0;
        std::size_t m = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && among[i][j] <= kdist[i]) sum += std::max(kdist[j], among[i][j]), ++m;
        return 1.0 / std::max(sum / double(m), floor);
    };
    const double kq = kth(query);
    double reach = 0.0;
    std::vector<std::size_t> hood;
    for (std::size_t j = 0; j < n; ++j)
        if (query[j] <= kq) {
            hood.push_back(j);
            reach += std::max(kdist[j], query[j]);
        }
    const double lrd_q = 1.0 / std::max(reach / double(hood.size()), floor);
    double ratio = 0.0;
    for (std::size_t j : hood) ratio += lrd_ref(j) / lrd_q;
    return ratio / double(hood.size());
}

inline double lof_score(const SparseVector& unknown, const std::vector<SparseVector>& known, std::size_t k,
                        const DistanceSpec& dist) {
    const std::size_t n = known.size();
    svm::Matrix among(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) among[i][j] = among[j][i] = dist(known[i], known[j]);
    std::vector<double> query(n);
    for (std::size_t i = 0; i < n; ++i) query[i] = dist(unknown, known[i]);
    return lof_from_distances(among, query, k);
}

/// Y iff LOF <= tau, tau fixed a priori (never tuned on data).
class LofVerifier final : public UnaryVerifier {
public:
    FeatureSpec features;
    DistanceSpec distance;
    std::size_t k = 0;  // 0: min(5, |A| - 1)
    double tau = 1.2;

    MethodDescriptor descriptor() const override {
        return {"lof", Category::unary, true, true, Provenance::target_class_only};
    }
    DecisionCriterion criterion() const override {
        return {DecisionCriterion::Kind::scalar_threshold, tau, {}, Provenance::target_class_only};
    }
    nlohmann::json parameters() const override {
        auto j = detail::feature_parameters(features);
        j["lof.k"] = k;
        j["lof.tau"] = tau;
        j["lof.distance"] = to_string(distance.kind);
        return j;
    }

    Verdict decide(const ProblemView& p, std::uint64_t) const override {
        detail::require_references(p, 2, "reference set too small for LOF (needs k <= |A| - 1)");
        auto v = detail::vectors_of(p, features);
        std::size_t kk = k ? k : std::min<std::size_t>(5, v.known.size() - 1);
        double lof = lof_score(v.unknown, v.known, kk, distance);
        return make_verdict(tau / (tau + lof), lof <= tau);
    }
};

// ---------------------------------------------------------------------------
// Isolation Forest

/// c(n): average path length of an unsuccessful BST search.
inline double iforest_c(std::size_t n) {
    if (n <= 1) return 0.0;
    const double m = double(n - 1);
    return 2.0 * (std::log(m) + 0.5772156649) - 2.0 * m / double(n);
}

struct IsolationTree {
    struct Node {
        int feature = -1;  // -1: leaf
        double split = 0.0;
        int left = -1, right = -1;
        std::size_t size = 0;  // training points reaching this node
    };
    std::vector<Node> nodes;  // nodes[0] is the root

    /// Edges to the leaf plus c(leaf size).
    double path_length(const std::vector<double>& x) const {
        std::size_t depth = 0;
        int at = 0;
        while (nodes[std::size_t(at)].feature >= 0) {
            const Node& nd = nodes[std::size_t(at)];
            at = x[std::size_t(nd.feature)] < nd.split ? nd.left : nd.right;
            ++depth;
        }
        return double(depth) + iforest_c(nodes[std::size_t(at)].size);
    }
};

class IsolationForest {
public:
    std::vector<IsolationTree> trees;
    std::size_t sample_size = 0;
    std::size_t depth_limit = 0;

    IsolationForest(const svm::Matrix& data, std::size_t n_trees, std::uint64_t seed) {
        if (data.size() < 2) throw ValidationError("isolation forest needs at least two reference points");
        if (n_trees == 0) throw ValidationError("isolation forest needs at least one tree");
        sample_size = data.size();
        depth_limit = static_cast<std::size_t>(std::ceil(std::log2(double(sample_size))));
        Rng rng(seed);
        std::vector<std::size_t> all(data.size());
        std::iota(all.begin(), all.end(), 0);
        trees.reserve(n_trees);
        for (std::size_t t = 0; t < n_trees; ++t) {
            IsolationTree tree;
            grow(tree, data, all, 0, rng);
            trees.push_back(std::move(tree));
        }
    }

    double mean_path_length(const std::vector<double>& x) const {
        double s = 0.0;
        for (const auto& t : trees) s += t.path_length(x);
        return s / double(trees.size());
    }

    /// s = 2^(-E[h] / c(n)); near 1 for anomalies, well below 0.5 for inliers.
    double anomaly_score(const std::vector<double>& x) const {
        return std::pow(2.0, -mean_path_length(x) / iforest_c(sample_size));
    }

private:
    int grow(IsolationTree& tree, const svm::Matrix& data, const std::vector<std::size_t>& rows, std::size_t depth,
             Rng& rng) {
        const int id = int(tree.nodes.size());
        tree.nodes.push_back({-1, 0.0, -1, -1, rows.size()});
        if (rows.size() <= 1 || depth >= depth_limit) return id;

        std::vector<std::size_t> candidates;
        for (std::size_t f = 0; f < data.front().size(); ++f) {
            double lo = data[rows[0]][f], hi = lo;
            for (std::size_t r : rows) lo = std::min(lo, data[r][f]), hi = std::max(hi, data[r][f]);
            if (hi > lo) candidates.push_back(f);
        }
        if (candidates.empty()) return id;  // identical points cannot be separated

        const std::size_t f = candidates[uniform_index(rng, candidates.size())];
        double lo = data[rows[0]][f], hi = lo;
        for (std::size_t r : rows) lo = std::min(lo, data[r][f]), hi = std::max(hi, data[r][f]);
        double split = uniform_real(rng, lo, hi);
        if (split <= lo) split = std::nextafter(lo, hi);  // keep both sides non-empty
        std::vector<std::size_t> left, right;
        for (std::size_t r : rows) (data[r][f] < split ? left : right).push_back(r);

        tree.nodes[std::size_t(id)].feature = int(f);
        tree.nodes[std::size_t(id)].split = split;
        int l = grow(tree, data, left, depth + 1, rng);
        int r = grow(tree, data, right, depth + 1, rng);
        tree.nodes[std::size_t(id)].left = l;
        tree.nodes[std::size_t(id)].right = r;
        return id;
    }
};

/// Y iff the anomaly score s < 0.5; verdict score 1 - s. When every reference
/// vector is identical no split exists: accept exactly the identical D_u.
class IForestVerifier final : public UnaryVerifier {
public:
    FeatureSpec features;
    std::size_t trees = 100;

    MethodDescriptor descriptor() const override {
        return {"iforest", Category::unary, false, true, Provenance::target_class_only};
    }
    DecisionCriterion criterion() const override {
        return {DecisionCriterion::Kind::scalar_threshold, 0.5, {}, Provenance::target_class_only};
    }
    nlohmann::json parameters() const override {
        auto j = detail::feature_parameters(features);
        j["iforest.trees"] = trees;
        return j;
    }

    Verdict decide(const ProblemView& p, std::uint64_t seed) const override {
        detail::require_references(p, 2, "reference set too small for isolation forest");
        auto v = detail::vectors_of(p, features);
        if (std::all_of(v.known.begin(), v.known.end(), [&](const auto& x) { return x == v.known.front(); })) {
            bool same = v.unknown == v.known.front();
            return make_verdict(same ? 1.0 : 0.0, same);
        }
        detail::DenseLayout layout(v.known);
        svm::Matrix data;
        for (const auto& x : v.known) data.push_back(layout.project(x));
        IsolationForest forest(data, trees, seed);
        double s = forest.anomaly_score(layout.project(v.unknown));
        return make_verdict(1.0 - s, s < 0.5);
    }
};

// ---------------------------------------------------------------------------
// SVDD

namespace detail {

inline double squared_euclidean(const SparseVector& a, const SparseVector& b) {
    double s = 0.0;
    merge_walk(a, b, [&](const std::string&, double x, double y) { s += (x - y) * (x - y); });
    return s;
}

}  // namespace detail

/// Minimal enclosing hypersphere of A in RBF feature space.
struct SvddModel {
    std::vector<SparseVector> points;
    std::vector<double> alpha;
    double gamma = 1.0;
    double radius2 = 0.0;
    double alpha_k_alpha = 0.0;

    double kernel(const SparseVector& a, const SparseVector& b) const {
        return std::exp(-gamma * detail::squared_euclidean(a, b));
    }

    /// Squared kernel-space distance from x to the centre.
    double distance2(const SparseVector& x) const {
        double cross = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i)
            if (alpha[i] > 0) cross += alpha[i] * kernel(points[i], x);
        return std::max(0.0, 1.0 - 2.0 * cross + alpha_k_alpha);
    }
};

/// gamma: 0 picks 1 / median squared pairwise distance (1.0 if undefined).
inline SvddModel fit_svdd(const std::vector<SparseVector>& points, double gamma, double nu) {
    const std::size_t n = points.size();
    if (n == 0) throw ValidationError("SVDD needs at least one reference document");
    if (!(nu > 0.0 && nu <= 1.0)) throw ValidationError("svdd.nu must lie in (0, 1]");
    if (gamma < 0.0) throw ValidationError("svdd.gamma must be positive (0 selects the median heuristic)");
    SvddModel m;
    m.points = points;
    svm::Matrix d2(n, std::vector<double>(n, 0.0));
    std::vector<double> pairs;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) pairs.push_back(d2[i][j] = d2[j][i] = detail::squared_euclidean(points[i], points[j]));
    if (gamma > 0.0) {
        m.gamma = gamma;
    } else if (!pairs.empty()) {
        std::nth_element(pairs.begin(), pairs.begin() + long(pairs.size() / 2), pairs.end());
        double med = pairs[pairs.size() / 2];
        if (pairs.size() % 2 == 0) {
            double lower = *std::max_element(pairs.begin(), pairs.begin() + long(pairs.size() / 2));
            med = (med + lower) / 2.0;
        }
        m.gamma = med > 0.0 ? 1.0 / med : 1.0;
    }
    svm::Matrix k(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) k[i][j] = std::exp(-m.gamma * d2[i][j]);

    const double c = 1.0 / (double(n) * nu);
    auto sol = svm::solve_svdd(k, c);
    m.alpha = sol.alpha;
    m.alpha_k_alpha = sol.objective + 1.0;  // objective = a'Ka - sum a_i K_ii and K_ii = 1, sum a = 1

    // radius from unbounded support vectors, else the midpoint of the feasible band
    constexpr double eps = 1e-12;
    double sum = 0.0, inside = 0.0, outside = std::numeric_limits<double>::infinity();
    std::size_t free = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double di = m.distance2(points[i]);
        if (m.alpha[i] > eps && m.alpha[i] < c - eps) sum += di, ++free;
        else if (m.alpha[i] <= eps) inside = std::max(inside, di);
        else outside = std::min(outside, di);
    }
    m.radius2 = free ? sum / double(free) : (std::isfinite(outside) ? (inside + outside) / 2.0 : inside);
    return m;
}

/// Y iff the kernel distance to the centre is within the radius (1e-9 slack
/// on squared distances); score R / (R + dist), 0.5 when both vanish.
class SvddVerifier final : public UnaryVerifier {
public:
    FeatureSpec features;
    double gamma = 0.0;
    double nu = 0.1;

    MethodDescriptor descriptor() const override {
        return {"svdd", Category::unary, true, true, Provenance::target_class_only};
    }
    DecisionCriterion criterion() const override {
        return {DecisionCriterion::Kind::scalar_threshold, nu, {}, Provenance::target_class_only};
    }
    nlohmann::json parameters() const override {
        auto j = detail::feature_parameters(features);
        j["svdd.gamma"] = gamma;
        j["svdd.nu"] = nu;
        return j;
    }

    Verdict decide(const ProblemView& p, std::uint64_t) const override {
        detail::require_references(p, 1, "SVDD needs at least one reference document");
        auto v = detail::vectors_of(p, features);
        auto model = fit_svdd(v.known, gamma, nu);
        double d2 = model.distance2(v.unknown);
        bool inside = d2 <= model.radius2 + 1e-9;
        double r = std::sqrt(model.radius2), d = std::sqrt(d2);
        double score = (r + d == 0.0) ? 0.5 : r / (r + d);
        return make_verdict(score, inside);
    }
};

}  // namespace averify
