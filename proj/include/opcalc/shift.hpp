#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <utility>
#include <vector>

#include "block_operator.hpp"
#include "quadrature.hpp"
#include "step_function.hpp"
#include "wiener.hpp"

namespace opcalc {

// Spectral shift function of the pair (H, H+V) as an exact step function:
// xi(x) = weighted count of spectrum of H at or below x, minus the same count
// for H+V. Breakpoints are the merged spectra, so the result is exact up to
// the eigensolver; no quadrature or limiting procedure is involved.
inline StepFunction xi_counting(const BlockOperator& h, const BlockOperator& v) {
    require_same_shape(h, v);
    const BlockOperator a = h + v;
    const SpectralDecomposition dh(h), da(a);

    std::vector<double> breaks;
    for (std::size_t b = 0; b < h.block_count(); ++b) {
        const auto& eh = dh.eigenvalues(b);
        const auto& ea = da.eigenvalues(b);
        breaks.insert(breaks.end(), eh.data(), eh.data() + eh.size());
        breaks.insert(breaks.end(), ea.data(), ea.data() + ea.size());
    }
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    std::vector<double> values(breaks.size() + 1, 0.0);
    for (std::size_t k = 0; k < breaks.size(); ++k) {
        const auto ch = dh.counts_below(breaks[k]);
        const auto ca = da.counts_below(breaks[k]);
        std::vector<long> diff(ch.size());
        for (std::size_t b = 0; b < ch.size(); ++b) diff[b] = ch[b] - ca[b];
        values[k + 1] = combine_weighted_counts(h.weights(), diff);
    }
    // Right tail: every eigenvalue of both operators is counted, so the
    // difference is exactly zero; values.back() already is.
    return StepFunction(std::move(breaks), std::move(values));
}

struct KreinCheck {
    Complex trace_difference; // tau(f(H+V) - f(H))
    Complex shift_pairing;    // sum_k xi_k (f(b_{k+1}) - f(b_k))
    double residual = 0.0;
};

// Trace formula: the weighted trace of f(H+V) - f(H) equals the pairing of
// f' against xi. Both sides reduce to weighted sums of f over the two
// spectra, evaluated through independent code paths.
inline KreinCheck krein_trace_check(const WienerFunction& f, const BlockOperator& h,
                                    const BlockOperator& v) {
    const BlockOperator a = h + v;
    const SpectralDecomposition dh(h), da(a);
    Complex lhs(0.0, 0.0);
    for (std::size_t b = 0; b < h.block_count(); ++b) {
        Complex block_sum(0.0, 0.0);
        const auto& eh = dh.eigenvalues(b);
        const auto& ea = da.eigenvalues(b);
        for (Eigen::Index i = 0; i < ea.size(); ++i) block_sum += f.evaluate(ea[i], 0);
        for (Eigen::Index i = 0; i < eh.size(); ++i) block_sum -= f.evaluate(eh[i], 0);
        lhs += h.weights()[b] * block_sum;
    }
    const StepFunction xi = xi_counting(h, v);
    const Complex rhs = xi.increment_sum([&f](double x) { return f.evaluate(x, 0); });
    return {lhs, rhs, std::abs(lhs - rhs)};
}

struct XiBoundsReport {
    double l1_xi = 0.0;
    double trace_norm_v = 0.0;
    double integral_xi = 0.0;
    double trace_v = 0.0;
    double max_xi = 0.0;
    double min_xi = 0.0;
    double upper_bound = 0.0; // weighted rank of the positive part of V
    double lower_bound = 0.0; // minus the weighted rank of the negative part
    bool l1_ok = false;
    bool integral_ok = false;
    bool range_ok = false;
    bool all_ok = false;
};

// Classical a priori bounds on xi in terms of the perturbation alone.
inline XiBoundsReport xi_bounds_check(const BlockOperator& h, const BlockOperator& v,
                                      double integral_tolerance = 1e-9) {
    XiBoundsReport rep;
    const StepFunction xi = xi_counting(h, v);
    rep.l1_xi = xi.l1_norm();
    rep.trace_norm_v = trace_norm(v);
    rep.integral_xi = xi.integral();
    rep.trace_v = weighted_trace(v).real();
    rep.max_xi = xi.max_value();
    rep.min_xi = xi.min_value();

    const SpectralDecomposition dv(v);
    const double tol = default_kernel_tolerance(dv);
    std::vector<long> pos(v.block_count(), 0), neg(v.block_count(), 0);
    for (std::size_t b = 0; b < v.block_count(); ++b) {
        const auto& ev = dv.eigenvalues(b);
        for (Eigen::Index i = 0; i < ev.size(); ++i) {
            if (ev[i] > tol) ++pos[b];
            if (ev[i] < -tol) ++neg[b];
        }
    }
    rep.upper_bound = combine_weighted_counts(v.weights(), pos);
    rep.lower_bound = -combine_weighted_counts(v.weights(), neg);

    rep.l1_ok = rep.l1_xi <= rep.trace_norm_v * (1.0 + 1e-9) + integral_tolerance;
    rep.integral_ok = std::abs(rep.integral_xi - rep.trace_v) <= integral_tolerance;
    rep.range_ok = rep.max_xi <= rep.upper_bound + 1e-12 && rep.min_xi >= rep.lower_bound - 1e-12;
    rep.all_ok = rep.l1_ok && rep.integral_ok && rep.range_ok;
    return rep;
}

struct BsResult {
    double value = 0.0;
    double error_estimate = 0.0;
    long evaluations = 0;
};

// Couplings r at which some eigenvalue of H + rV equals the level: roots of
// det((H - level) + rV) = 0, i.e. r = -1/mu over eigenvalues mu of
// (H - level)^{-1} V per block. Only real roots inside (0,1) matter.
inline std::vector<double> coupling_crossings(const BlockOperator& h, const BlockOperator& v,
                                              double level) {
    std::vector<double> out;
    for (std::size_t b = 0; b < h.block_count(); ++b) {
        const Eigen::Index d = h.block(b).rows();
        const Eigen::MatrixXcd shifted =
            h.block(b) - level * Eigen::MatrixXcd::Identity(d, d);
        const Eigen::MatrixXcd k = shifted.partialPivLu().solve(v.block(b));
        if (!k.allFinite()) continue; // level sits on the r=0 spectrum; 0 is a boundary anyway
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(k, false);
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
            const Complex mu = es.eigenvalues()[i];
            if (std::abs(mu) < 1e-14) continue;
            const Complex r = -1.0 / mu;
            if (std::abs(r.imag()) <= 1e-9 * (1.0 + std::abs(r.real())) && r.real() > 1e-12 &&
                r.real() < 1.0 - 1e-12)
                out.push_back(r.real());
        }
    }
    return out;
}

// Coupling-averaged spectral measure: integral over r in [0,1] of
// tau(V E_{H+rV}(a,b)) with the open interval (a,b). The integrand jumps
// whenever an eigenvalue of H+rV crosses a or b; those couplings are
// computed up front (pencil eigenproblem) and the integral is split there,
// so each piece is smooth and narrow excursions through the interval cannot
// slip between quadrature nodes.
inline BsResult birman_solomyak_measure(const BlockOperator& h, const BlockOperator& v, double a,
                                        double b, const QuadratureConfig& cfg = {}) {
    require_same_shape(h, v);
    if (!(a < b)) throw ShapeMismatch("interval endpoints must satisfy a < b");
    auto integrand = [&](double r) {
        const BlockOperator hr = h + v.scaled(r);
        const SpectralDecomposition dr(hr);
        double acc = 0.0;
        for (std::size_t blk = 0; blk < h.block_count(); ++blk) {
            const auto& ev = dr.eigenvalues(blk);
            const auto& u = dr.unitary(blk);
            double block_sum = 0.0;
            for (Eigen::Index i = 0; i < ev.size(); ++i) {
                if (ev[i] > a && ev[i] < b) {
                    const Eigen::VectorXcd col = u.col(i);
                    block_sum += (col.adjoint() * v.block(blk) * col)(0, 0).real();
                }
            }
            acc += h.weights()[blk] * block_sum;
        }
        return acc;
    };

    std::vector<double> cuts{0.0, 1.0};
    for (double r : coupling_crossings(h, v, a)) cuts.push_back(r);
    for (double r : coupling_crossings(h, v, b)) cuts.push_back(r);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(),
                           [](double x, double y) { return y - x < 1e-12; }),
               cuts.end());

    BsResult out;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double len = cuts[k + 1] - cuts[k];
        const AdaptiveResult r = integrate_adaptive(integrand, cuts[k], cuts[k + 1],
                                                    cfg.tolerance * std::max(len, 0.05),
                                                    cfg.max_evals);
        out.value += r.value;
        out.error_estimate += r.error_estimate;
        out.evaluations += static_cast<long>(r.evaluations);
    }
    return out;
}

// Interval-function view of the averaged measure, for additivity checks.
class AveragedMeasure {
  public:
    AveragedMeasure(BlockOperator h, BlockOperator v, QuadratureConfig cfg = {})
        : h_(std::move(h)), v_(std::move(v)), cfg_(cfg) {
        require_same_shape(h_, v_);
    }

    double operator()(double a, double b) const {
        return birman_solomyak_measure(h_, v_, a, b, cfg_).value;
    }

    // Total mass over any interval containing both spectra equals tau(V).
    double expected_total_mass() const { return weighted_trace(v_).real(); }

    std::pair<double, double> spectral_hull() const {
        const SpectralDecomposition dh(h_), da(BlockOperator(h_ + v_));
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t b = 0; b < h_.block_count(); ++b) {
            lo = std::min({lo, dh.eigenvalues(b).minCoeff(), da.eigenvalues(b).minCoeff()});
            hi = std::max({hi, dh.eigenvalues(b).maxCoeff(), da.eigenvalues(b).maxCoeff()});
        }
        return {lo, hi};
    }

  private:
    BlockOperator h_, v_;
    QuadratureConfig cfg_;
};

struct AveragingRow {
    double a = 0.0;
    double b = 0.0;
    double averaged = 0.0;     // coupling-averaged measure of (a,b)
    double xi_integral = 0.0;  // integral of xi over the same interval
    double residual = 0.0;
    long evaluations = 0;
};

struct AveragingIdentityReport {
    std::vector<AveragingRow> rows;
    double max_residual = 0.0;
    long total_evaluations = 0;
};

// Cross-check of the averaging identity: the coupling-averaged measure of
// (a,b) must equal the integral of xi over (a,b) on every test interval.
inline AveragingIdentityReport averaging_identity_check(
    const BlockOperator& h, const BlockOperator& v,
    const std::vector<std::pair<double, double>>& intervals, const QuadratureConfig& cfg = {}) {
    AveragingIdentityReport rep;
    const StepFunction xi = xi_counting(h, v);
    for (const auto& [a, b] : intervals) {
        const BsResult bs = birman_solomyak_measure(h, v, a, b, cfg);
        AveragingRow row;
        row.a = a;
        row.b = b;
        row.averaged = bs.value;
        row.xi_integral = xi.integral_over(a, b);
        row.residual = std::abs(row.averaged - row.xi_integral);
        row.evaluations = bs.evaluations;
        rep.rows.push_back(row);
        rep.max_residual = std::max(rep.max_residual, row.residual);
        rep.total_evaluations += bs.evaluations;
    }
    return rep;
}

// Uniform grid of adjacent intervals covering [a, b].
inline std::vector<std::pair<double, double>> interval_grid(double a, double b, int n) {
    if (!(a < b) || n < 1) throw ShapeMismatch("interval grid needs a < b and n >= 1");
    std::vector<std::pair<double, double>> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double lo = a + (b - a) * k / n;
        const double hi = a + (b - a) * (k + 1) / n;
        out.emplace_back(lo, hi);
    }
    return out;
}

// Mollification of xi by the Gaussian approximate identity with width
// parameter eps: (j_eps * xi)(x) = sum_k xi_k (Phi((x-l_k)/s) - Phi((x-r_k)/s))
// written through the segment endpoints, where Phi is the standard normal CDF
// and s = sqrt(1/(2 eps)). Exact per segment, no quadrature.
inline double mollified_xi(const StepFunction& xi, double eps, double x) {
    const double s = std::sqrt(0.5 / eps);
    auto cdf = [s](double t) { return 0.5 * std::erfc(-t / (s * M_SQRT2)); };
    const auto& bp = xi.breakpoints();
    const auto& vals = xi.values();
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < bp.size(); ++k)
        acc += vals[k + 1] * (cdf(x - bp[k]) - cdf(x - bp[k + 1]));
    return acc;
}

// L1 distance between xi and its mollification, by direct quadrature on a
// grid refined around the breakpoints. Used to verify the 1/sqrt(eps)
// convergence law of the approximate identity.
inline double mollification_l1_error(const StepFunction& xi, double eps,
                                     const QuadratureConfig& cfg = {}) {
    const auto& bp = xi.breakpoints();
    if (bp.empty()) return 0.0;
    const double s = std::sqrt(0.5 / eps);
    const double pad = 12.0 * s + 1.0;
    std::vector<double> cuts;
    cuts.push_back(bp.front() - pad);
    for (double x : bp) cuts.push_back(x);
    cuts.push_back(bp.back() + pad);
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const AdaptiveResult r = integrate_adaptive(
            [&](double x) { return std::abs(mollified_xi(xi, eps, x) - xi(x)); }, cuts[k],
            cuts[k + 1], cfg.tolerance * 0.1, cfg.max_evals);
        acc += r.value;
    }
    return acc;
}

} // namespace opcalc
