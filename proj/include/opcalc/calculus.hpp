#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "block_operator.hpp"
#include "moi.hpp"
#include "quadrature.hpp"
#include "wiener.hpp"

namespace opcalc {

// Gauss quadrature of the unitary-group difference identity
//   e^{isA} - e^{isB} = Integral_0^s e^{i(s-t)A} i(A-B) e^{itB} dt,
// oriented in t so negative s needs no special casing.
inline BlockOperator duhamel_difference(double s, const BlockOperator& a, const BlockOperator& b,
                                        int nodes = 64) {
    a.require_same_shape(b, "duhamel_difference");
    SpectralDecomposition da(a), db(b);
    std::vector<Matrix> out(a.block_count());
    for (std::size_t blk = 0; blk < a.block_count(); ++blk) {
        const Matrix x = Complex(0.0, 1.0) * (a.block(blk) - b.block(blk));
        Matrix acc = Matrix::Zero(a.dim(blk), a.dim(blk));
        const auto& rule = gauss_legendre(nodes);
        const double mid = 0.5 * s, hw = 0.5 * s;
        for (int q = 0; q < nodes; ++q) {
            const double t = mid + hw * rule.nodes[q];
            acc += (hw * rule.weights[q]) *
                   (da.unitary_exp(blk, s - t) * x * db.unitary_exp(blk, t));
        }
        out[blk] = std::move(acc);
    }
    return BlockOperator(std::move(out), a.weights(), false);
}

struct OperatorDifferenceCheck {
    BlockOperator via_moi;        // T^{A,B}_{f^[1]}(A - B)
    BlockOperator via_functional; // f(A) - f(B)
    double residual = 0.0;
};

// First-order perturbation identity f(A) - f(B) = T^{A,B}_{f^[1]}(A - B),
// both sides evaluated independently.
inline OperatorDifferenceCheck operator_difference(const WienerFunction& f,
                                                   const BlockOperator& a,
                                                   const BlockOperator& b) {
    MOIRequest req{1, {a, b}, {a - b}, f};
    BlockOperator via_moi = moi_spectral(req).value;
    auto scalar = [&f](double x) { return f.evaluate(x, 0); };
    BlockOperator via_functional = apply_function(scalar, a) - apply_function(scalar, b);
    double residual = uniform_norm(via_moi - via_functional);
    return OperatorDifferenceCheck{std::move(via_moi), std::move(via_functional), residual};
}

// n-th Frechet derivative of the operator function at H:
//   D^n f(H)(V_1..V_n) = sum over permutations sigma of T^{H..H}_{f^[n]}(V_sigma).
// Symmetric in the directions by construction.
inline BlockOperator frechet_derivative(const WienerFunction& f, const BlockOperator& h,
                                        const std::vector<BlockOperator>& directions) {
    const int n = static_cast<int>(directions.size());
    if (n < 1) throw ShapeMismatch("frechet_derivative needs at least one direction");
    std::vector<BlockOperator> operators(n + 1, h);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    BlockOperator acc = BlockOperator::zero_like(h);
    do {
        std::vector<BlockOperator> dirs;
        dirs.reserve(n);
        for (int j : perm) dirs.push_back(directions[j]);
        MOIRequest req{n, operators, dirs, f};
        acc = acc + moi_spectral(req).value;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return acc;
}

struct TaylorRemainder {
    BlockOperator remainder;
    double uniform_residual = 0.0;
    double trace_residual = 0.0;
};

// Remainder of the operator Taylor expansion,
//   f(H+V) - f(H) - sum_{k=1..n} T^{H..H}_{f^[k]}(V,..,V),
// expected to shrink like ||V||^{n+1}.
inline TaylorRemainder taylor_remainder(const WienerFunction& f, const BlockOperator& h,
                                        const BlockOperator& v, int n) {
    auto scalar = [&f](double x) { return f.evaluate(x, 0); };
    BlockOperator acc = apply_function(scalar, h + v) - apply_function(scalar, h);
    for (int k = 1; k <= n; ++k) {
        std::vector<BlockOperator> operators(k + 1, h);
        std::vector<BlockOperator> dirs(k, v);
        MOIRequest req{k, operators, dirs, f};
        acc = acc - moi_spectral(req).value;
    }
    TaylorRemainder out{acc, uniform_norm(acc), trace_norm(acc)};
    return out;
}

struct LipschitzProbe {
    double lhs_uniform = 0.0;
    double rhs_uniform = 0.0;
    double lhs_trace = 0.0;
    double rhs_trace = 0.0;
    bool uniform_ok = false;
    bool trace_ok = false;
};

// Derivative Lipschitz estimate in the stated (unsharpened) form:
//   ||Df(H+X)(V) - Df(H)(V)||_E <= ||m_{f''}|| ||V||_E ||X||_E,
// checked in the uniform and trace norms.
inline LipschitzProbe derivative_lipschitz_probe(const WienerFunction& f, const BlockOperator& h,
                                                 const BlockOperator& x, const BlockOperator& v) {
    BlockOperator lhs = frechet_derivative(f, h + x, {v}) - frechet_derivative(f, h, {v});
    const double tv2 = f.fourier_measure(2).total_variation();
    LipschitzProbe p;
    p.lhs_uniform = uniform_norm(lhs);
    p.rhs_uniform = tv2 * uniform_norm(v) * uniform_norm(x);
    p.lhs_trace = trace_norm(lhs);
    p.rhs_trace = tv2 * trace_norm(v) * trace_norm(x);
    const double slack = 1.0 + 1e-6;
    p.uniform_ok = p.lhs_uniform <= p.rhs_uniform * slack;
    p.trace_ok = p.lhs_trace <= p.rhs_trace * slack;
    return p;
}

// Telescoping of one base-leg switch: for leg p of the tuple,
//   T^{..A..}_{f^[n]} - T^{..B..}_{f^[n]} = T^{..A,B..}_{f^[n+1]} with X = A-B
// inserted as the direction between the duplicated legs. Summing over legs
// connects the all-A and all-B integrals; the residual of that chain is what
// this check reports.
inline double chain_consistency_check(const WienerFunction& f, const BlockOperator& a,
                                      const BlockOperator& b,
                                      const std::vector<BlockOperator>& directions) {
    const int n = static_cast<int>(directions.size());
    const BlockOperator x = a - b;
    std::vector<BlockOperator> all_a(n + 1, a), all_b(n + 1, b);
    MOIRequest req_a{n, all_a, directions, f};
    MOIRequest req_b{n, all_b, directions, f};
    BlockOperator lhs = moi_spectral(req_a).value - moi_spectral(req_b).value;

    BlockOperator rhs = BlockOperator::zero_like(a);
    for (int p = 0; p <= n; ++p) {
        std::vector<BlockOperator> base;
        base.reserve(n + 2);
        for (int l = 0; l < p; ++l) base.push_back(a);
        base.push_back(a);
        base.push_back(b);
        for (int l = p + 1; l <= n; ++l) base.push_back(b);
        std::vector<BlockOperator> dirs;
        dirs.reserve(n + 1);
        for (int j = 0; j < p; ++j) dirs.push_back(directions[j]);
        dirs.push_back(x);
        for (int j = p; j < n; ++j) dirs.push_back(directions[j]);
        MOIRequest req{n + 1, base, dirs, f};
        rhs = rhs + moi_spectral(req).value;
    }
    return uniform_norm(lhs - rhs);
}

} // namespace opcalc
