#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace opcalc {

// Shared quadrature knobs. Tolerances are absolute unless an operation says
// otherwise; budgets count integrand evaluations.
struct QuadratureConfig {
    double tolerance = 1e-6;      // target residual for dual-path agreement
    int nodes_per_axis = 32;      // base Gauss-Legendre nodes per simplex axis
    int max_nodes_per_axis = 256; // refinement ceiling per axis
    int density_atoms = 256;      // atom count when a measure density is atomized
    std::size_t max_evals = 10000; // adaptive integrator evaluation cap
};

struct GaussLegendreRule {
    std::vector<double> nodes;   // ascending, on [-1, 1]
    std::vector<double> weights; // positive, sum to 2
};

// Nodes and weights via Newton iteration on P_n. Deterministic; cached.
// Accuracy of the roots is limited only by double precision.
inline const GaussLegendreRule& gauss_legendre(int n) {
    static std::map<int, GaussLegendreRule> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    GaussLegendreRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        // Chebyshev-like initial guess, then Newton on the recurrence.
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 64; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Roots come out in descending order; store ascending and mirror the
        // other half exactly so the rule is symmetric to the last bit.
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) rule.nodes[half - 1] = 0.0;
    return cache.emplace(n, std::move(rule)).first->second;
}

// Single-panel Gauss-Legendre on [a, b].
template <typename F>
auto integrate_gl(F&& f, double a, double b, int n) -> decltype(f(0.0)) {
    const auto& rule = gauss_legendre(n);
    const double mid = 0.5 * (a + b), hw = 0.5 * (b - a);
    decltype(f(0.0)) acc{};
    for (int i = 0; i < n; ++i) acc += rule.weights[i] * f(mid + hw * rule.nodes[i]);
    return hw * acc;
}

struct AdaptiveResult {
    double value = 0.0;
    double error_estimate = 0.0;
    std::size_t evaluations = 0;
};

// Adaptive bisection with an embedded Gauss pair (15 vs 31 nodes) as the
// local error estimate. Handles integrands with finitely many kinks or jumps:
// intervals that stop shrinking usefully (width below the resolution floor)
// are accepted and their disagreement is charged to the error estimate.
template <typename F>
AdaptiveResult integrate_adaptive(F&& f, double a, double b, double tol,
                                  std::size_t max_evals) {
    AdaptiveResult out;
    if (a == b) return out;
    const double total_len = std::abs(b - a);
    const double width_floor = 1e-13 * (1.0 + total_len);

    struct Segment {
        double a, b, coarse, fine, err;
    };
    auto measure = [&](double lo, double hi) -> Segment {
        double coarse = integrate_gl(f, lo, hi, 15);
        double fine = integrate_gl(f, lo, hi, 31);
        out.evaluations += 46;
        return {lo, hi, coarse, fine, std::abs(fine - coarse)};
    };

    std::vector<Segment> stack{measure(a, b)};
    double value = 0.0, err_acc = 0.0;
    while (!stack.empty()) {
        Segment s = stack.back();
        stack.pop_back();
        const double local_tol = tol * std::abs(s.b - s.a) / total_len;
        if (s.err <= std::max(local_tol, 1e-16 * (1.0 + std::abs(s.fine))) ||
            std::abs(s.b - s.a) < width_floor) {
            value += s.fine;
            err_acc += s.err;
            continue;
        }
        if (out.evaluations + 92 > max_evals)
            throw QuadratureBudgetExceeded("adaptive integrator exceeded " +
                                           std::to_string(max_evals) + " evaluations");
        const double mid = 0.5 * (s.a + s.b);
        stack.push_back(measure(s.a, mid));
        stack.push_back(measure(mid, s.b));
    }
    out.value = value;
    out.error_estimate = err_acc;
    return out;
}

} // namespace opcalc
