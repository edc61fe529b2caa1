#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "json.hpp"

#include "averify/common.hpp"

// Small dense solvers: kernel C-SVM (SMO), linear SVM (dual coordinate
// descent) and the SVDD hypersphere dual. Sizes here are tiny (hundreds of
// training points at most), so kernels are precomputed in full.

namespace averify::svm {

using Matrix = std::vector<std::vector<double>>;

inline double squared_euclidean(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double rbf(const std::vector<double>& a, const std::vector<double>& b, double gamma) {
    return std::exp(-gamma * squared_euclidean(a, b));
}

// ---------------------------------------------------------------------------
// standardisation

struct Standardizer {
    std::vector<double> mean, scale;

    static Standardizer fit(const Matrix& x) {
        Standardizer s;
        if (x.empty()) return s;
        const std::size_t d = x.front().size();
        s.mean.assign(d, 0.0);
        s.scale.assign(d, 1.0);
        for (const auto& row : x)
            for (std::size_t j = 0; j < d; ++j) s.mean[j] += row[j];
        for (auto& m : s.mean) m /= double(x.size());
        for (std::size_t j = 0; j < d; ++j) {
            double v = 0.0;
            for (const auto& row : x) v += (row[j] - s.mean[j]) * (row[j] - s.mean[j]);
            v /= double(x.size());
            s.scale[j] = v > 0.0 ? std::sqrt(v) : 1.0;  // constant column: leave unscaled
        }
        return s;
    }

    std::vector<double> apply(std::vector<double> row) const {
        for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean[j]) / scale[j];
        return row;
    }

    nlohmann::json to_json() const { return {{"mean", mean}, {"scale", scale}}; }
    static Standardizer from_json(const nlohmann::json& j) {
        return Standardizer{j.at("mean").get<std::vector<double>>(), j.at("scale").get<std::vector<double>>()};
    }
};

// ---------------------------------------------------------------------------
// kernel C-SVM

/// f(x) = sum_i coef_i K(sv_i, x) - rho, with coef_i = alpha_i y_i.
struct KernelModel {
    double gamma = 1.0;
    double rho = 0.0;
    Matrix support;
    std::vector<double> coef;

    double decision(const std::vector<double>& x) const {
        double f = -rho;
        for (std::size_t i = 0; i < support.size(); ++i) f += coef[i] * rbf(support[i], x, gamma);
        return f;
    }

    nlohmann::json to_json() const {
        return {{"gamma", gamma}, {"rho", rho}, {"support", support}, {"coef", coef}};
    }
    static KernelModel from_json(const nlohmann::json& j) {
        KernelModel m;
        m.gamma = j.at("gamma").get<double>();
        m.rho = j.at("rho").get<double>();
        m.support = j.at("support").get<Matrix>();
        m.coef = j.at("coef").get<std::vector<double>>();
        if (m.support.size() != m.coef.size()) throw ValidationError("kernel model: support/coef size mismatch");
        return m;
    }
};

struct KernelSvmOptions {
    double c = 1.0;
    double gamma = 1.0;
    double tolerance = 1e-3;
    std::size_t max_iterations = 0;  // 0 = max(1e6, 100 n)
};

/// SMO with second-order working-set selection on
///   min 1/2 a'Qa - e'a,  0 <= a_i <= C,  y'a = 0,  Q_ij = y_i y_j K_ij.
/// Labels are +1 / -1; both classes must be present.
inline KernelModel train_kernel_svm(const Matrix& x, const std::vector<int>& y, const KernelSvmOptions& o) {
    const std::size_t n = x.size();
    if (n == 0 || y.size() != n) throw ValidationError("kernel SVM: empty or mismatched training data");
    if (std::find(y.begin(), y.end(), 1) == y.end() || std::find(y.begin(), y.end(), -1) == y.end())
        throw ValidationError("kernel SVM needs both classes in the training data");
    if (!(o.c > 0.0) || !(o.gamma > 0.0)) throw ValidationError("kernel SVM: C and gamma must be positive");

    Matrix q(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) q[i][j] = q[j][i] = double(y[i] * y[j]) * rbf(x[i], x[j], o.gamma);

    std::vector<double> a(n, 0.0), g(n, -1.0);  // gradient of the dual: Qa - e
    const double c = o.c;
    const double tau = 1e-12;
    const std::size_t budget = o.max_iterations ? o.max_iterations : std::max<std::size_t>(1000000, 100 * n);
    auto up = [&](std::size_t t) { return (y[t] == 1 && a[t] < c) || (y[t] == -1 && a[t] > 0); };
    auto low = [&](std::size_t t) { return (y[t] == 1 && a[t] > 0) || (y[t] == -1 && a[t] < c); };

    double gap = 0.0;
    std::size_t iter = 0;
    for (;; ++iter) {
        // i: maximal -y g over I_up
        std::size_t i = n;
        double gmax = -std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < n; ++t)
            if (up(t) && -y[t] * g[t] >= gmax) gmax = -y[t] * g[t], i = t;
        // j: second-order choice over I_low
        std::size_t j = n;
        double gmin = std::numeric_limits<double>::infinity(), best = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < n; ++t) {
            if (!low(t)) continue;
            double v = -y[t] * g[t];
            gmin = std::min(gmin, v);
            double b = gmax - v;
            if (i < n && b > 0) {
                double curv = q[i][i] + q[t][t] - 2.0 * double(y[i] * y[t]) * q[i][t];
                curv = curv > 0 ? curv : tau;
                double obj = -b * b / curv;
                if (obj <= best) best = obj, j = t;
            }
        }
        gap = gmax - gmin;
        if (i == n || j == n || gap < o.tolerance) break;
        if (iter >= budget) throw ConvergenceError("kernel SVM did not converge within " + std::to_string(budget) + " iterations", gap);

        // two-variable subproblem (as in LIBSVM)
        const double old_ai = a[i], old_aj = a[j];
        if (y[i] != y[j]) {
            double quad = q[i][i] + q[j][j] + 2.0 * q[i][j];
            if (quad <= 0) quad = tau;
            double delta = (-g[i] - g[j]) / quad;
            double diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if (diff > 0 && a[j] < 0) a[j] = 0, a[i] = diff;
            else if (diff <= 0 && a[i] < 0) a[i] = 0, a[j] = -diff;
            if (diff > 0 && a[i] > c) a[i] = c, a[j] = c - diff;
            else if (diff <= 0 && a[j] > c) a[j] = c, a[i] = c + diff;
        } else {
            double quad = q[i][i] + q[j][j] - 2.0 * q[i][j];
            if (quad <= 0) quad = tau;
            double delta = (g[i] - g[j]) / quad;
            double sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if (sum > c && a[i] > c) a[i] = c, a[j] = sum - c;
            else if (sum <= c && a[j] < 0) a[j] = 0, a[i] = sum;
            if (sum > c && a[j] > c) a[j] = c, a[i] = sum - c;
            else if (sum <= c && a[i] < 0) a[i] = 0, a[j] = sum;
        }
        const double di = a[i] - old_ai, dj = a[j] - old_aj;
        for (std::size_t t = 0; t < n; ++t) g[t] += q[t][i] * di + q[t][j] * dj;
    }

    // rho from free variables, else midpoint of the feasible interval
    double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        double yg = y[t] * g[t];
        if (a[t] >= c) {
            if (y[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else if (a[t] <= 0) {
            if (y[t] == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    KernelModel m;
    m.gamma = o.gamma;
    m.rho = n_free ? sum_free / double(n_free) : (ub + lb) / 2.0;
    for (std::size_t t = 0; t < n; ++t)
        if (a[t] > 0) {
            m.support.push_back(x[t]);
            m.coef.push_back(a[t] * y[t]);
        }
    return m;
}

// ---------------------------------------------------------------------------
// linear SVM

struct LinearModel {
    std::vector<double> w;
    double bias = 0.0;

    double decision(const std::vector<double>& x) const {
        double f = bias;
        for (std::size_t j = 0; j < w.size(); ++j) f += w[j] * x[j];
        return f;
    }

    nlohmann::json to_json() const { return {{"w", w}, {"bias", bias}}; }
    static LinearModel from_json(const nlohmann::json& j) {
        return LinearModel{j.at("w").get<std::vector<double>>(), j.at("bias").get<double>()};
    }
};

struct LinearSvmOptions {
    double c = 1.0;
    double tolerance = 1e-4;
    std::size_t max_epochs = 2000;
};

/// L2-regularised hinge-loss SVM by dual coordinate descent; the bias is an
/// extra constant feature. Coordinates are visited in a seeded random order.
/// Hitting the epoch budget is not an error here: the solver is used inside
/// cross-validation where a near-optimal separator is good enough.
inline LinearModel train_linear_svm(const Matrix& x, const std::vector<int>& y, const LinearSvmOptions& o,
                                    std::uint64_t seed) {
    const std::size_t n = x.size();
    if (n == 0 || y.size() != n) throw ValidationError("linear SVM: empty or mismatched training data");
    const std::size_t d = x.front().size();
    std::vector<double> w(d + 1, 0.0), alpha(n, 0.0), qii(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 1.0;  // bias feature
        for (double v : x[i]) s += v * v;
        qii[i] = s;
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (std::size_t epoch = 0; epoch < o.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double max_pg = -std::numeric_limits<double>::infinity(), min_pg = -max_pg;
        for (std::size_t i : order) {
            double f = w[d];
            for (std::size_t j = 0; j < d; ++j) f += w[j] * x[i][j];
            double g = y[i] * f - 1.0;
            double pg = g;
            if (alpha[i] == 0.0) pg = std::min(g, 0.0);
            else if (alpha[i] == o.c) pg = std::max(g, 0.0);
            max_pg = std::max(max_pg, pg);
            min_pg = std::min(min_pg, pg);
            if (pg == 0.0) continue;
            double old = alpha[i];
            alpha[i] = std::clamp(alpha[i] - g / qii[i], 0.0, o.c);
            double step = (alpha[i] - old) * y[i];
            for (std::size_t j = 0; j < d; ++j) w[j] += step * x[i][j];
            w[d] += step;
        }
        if (max_pg - min_pg < o.tolerance) break;
    }
    LinearModel m;
    m.bias = w[d];
    w.pop_back();
    m.w = std::move(w);
    return m;
}

// ---------------------------------------------------------------------------
// SVDD

struct SvddSolution {
    std::vector<double> alpha;
    double objective = 0.0;  // a'Ka - sum a_i K_ii (minimised)
    std::size_t iterations = 0;
};

inline double svdd_objective(const Matrix& k, const std::vector<double>& a) {
    double f = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        f -= a[i] * k[i][i];
        for (std::size_t j = 0; j < a.size(); ++j) f += a[i] * a[j] * k[i][j];
    }
    return f;
}

/// min a'Ka - sum a_i K_ii  s.t. sum a = 1, 0 <= a_i <= c, by pairwise SMO on
/// the maximal violating pair. Needs c >= 1/n for feasibility.
inline SvddSolution solve_svdd(const Matrix& k, double c, double tolerance = 1e-10,
                               std::size_t max_iterations = 1000000) {
    const std::size_t n = k.size();
    if (n == 0) throw ValidationError("SVDD needs at least one point");
    if (c * double(n) < 1.0 - 1e-12) throw ValidationError("SVDD box constraint below 1/n is infeasible");
    SvddSolution s;
    s.alpha.assign(n, 1.0 / double(n));
    std::vector<double> g(n);  // gradient 2Ka - diag(K)
    for (std::size_t i = 0; i < n; ++i) {
        double v = 0.0;
        for (std::size_t j = 0; j < n; ++j) v += k[i][j] * s.alpha[j];
        g[i] = 2.0 * v - k[i][i];
    }
    auto& a = s.alpha;
    for (;; ++s.iterations) {
        std::size_t i = n, j = n;  // i gains weight, j loses it
        for (std::size_t t = 0; t < n; ++t) {
            if (a[t] < c && (i == n || g[t] < g[i])) i = t;
            if (a[t] > 0 && (j == n || g[t] > g[j])) j = t;
        }
        if (i == n || j == n) break;
        double violation = g[j] - g[i];
        if (violation <= tolerance) break;
        if (s.iterations >= max_iterations)
            throw ConvergenceError("SVDD solver did not converge within " + std::to_string(max_iterations) + " iterations",
                                   violation);
        double curv = 2.0 * (k[i][i] + k[j][j] - 2.0 * k[i][j]);
        double t = curv > 0 ? violation / curv : std::numeric_limits<double>::infinity();
        t = std::min({t, c - a[i], a[j]});
        a[i] += t;
        a[j] -= t;
        if (a[j] < 1e-15) a[j] = 0.0;
        for (std::size_t r = 0; r < n; ++r) g[r] += 2.0 * t * (k[r][i] - k[r][j]);
    }
    s.objective = svdd_objective(k, a);
    return s;
}

}  // namespace averify::svm
