#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "block_operator.hpp"
#include "quadrature.hpp"
#include "shift.hpp"

namespace opcalc {

struct PQIndexResult {
    double value = 0.0;
    std::vector<long> block_indices;
    std::vector<long> ker_right_dims; // kernel of T restricted to ran Q
    std::vector<long> ker_left_dims;  // kernel of T* restricted to ran P
};

namespace detail {

// Orthonormal basis of the range of an orthogonal projection block, read off
// its eigenvectors with eigenvalue near 1.
inline Eigen::MatrixXcd projection_range_basis(const Eigen::MatrixXcd& p) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(p);
    const auto& ev = es.eigenvalues();
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev[i] > 0.5) ++rank;
    Eigen::MatrixXcd basis(p.rows(), rank);
    Eigen::Index col = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev[i] > 0.5) basis.col(col++) = es.eigenvectors().col(i);
    return basis;
}

inline long svd_rank(const Eigen::MatrixXcd& m, double tol) {
    if (m.rows() == 0 || m.cols() == 0) return 0;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
    long rank = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()[i] > tol) ++rank;
    return rank;
}

} // namespace detail

// Index of T as an operator from ran Q to ran P: the weighted kernel
// dimension of T on ran Q minus that of T* on ran P. Requires T to be
// compressed, i.e. T = P T Q up to roundoff.
inline PQIndexResult pq_index(const BlockOperator& t, const WeightedProjection& p,
                              const WeightedProjection& q, double rank_tol = -1.0) {
    require_same_shape(t, p.projection);
    require_same_shape(t, q.projection);
    const BlockOperator compressed = multiply(multiply(p.projection, t), q.projection);
    const double comp_dev = max_abs_diff(t, compressed);
    if (comp_dev > 1e-9 * (1.0 + t.max_abs()))
        throw NotCompressed("operator deviates from its P..Q compression by " +
                            std::to_string(comp_dev));
    if (rank_tol < 0.0) rank_tol = 1e-9 * (1.0 + uniform_norm(t));

    PQIndexResult out;
    for (std::size_t b = 0; b < t.block_count(); ++b) {
        const Eigen::MatrixXcd bp = detail::projection_range_basis(p.projection.block(b));
        const Eigen::MatrixXcd bq = detail::projection_range_basis(q.projection.block(b));
        const Eigen::MatrixXcd m = bp.adjoint() * t.block(b) * bq;
        const long rank = detail::svd_rank(m, rank_tol);
        const long ker_right = static_cast<long>(bq.cols()) - rank;
        const long ker_left = static_cast<long>(bp.cols()) - rank;
        out.ker_right_dims.push_back(ker_right);
        out.ker_left_dims.push_back(ker_left);
        out.block_indices.push_back(ker_right - ker_left);
    }
    out.value = combine_weighted_counts(t.weights(), out.block_indices);
    return out;
}

struct FlowValue {
    double value = 0.0;
    std::vector<long> block_counts;
};

namespace detail {

inline void require_off_spectrum(const SpectralDecomposition& dec, double mu,
                                 const char* which) {
    const double tol = default_kernel_tolerance(dec);
    if (dec.distance_to_spectrum(mu) <= tol)
        throw EndpointKernel(std::string(which) +
                             " has spectrum within tolerance of the flow level");
}

inline std::vector<long> kernel_counts(const SpectralDecomposition& dec, double mu, double tol) {
    std::vector<long> counts(dec.block_count(), 0);
    for (std::size_t b = 0; b < dec.block_count(); ++b) {
        const auto& ev = dec.eigenvalues(b);
        for (Eigen::Index i = 0; i < ev.size(); ++i)
            if (std::abs(ev[i] - mu) <= tol) ++counts[b];
    }
    return counts;
}

} // namespace detail

// Spectral flow of the straight path from D0 to D0+V through the level mu,
// by eigenvalue counting at the endpoints. Requires mu to avoid both
// endpoint spectra.
inline FlowValue spectral_flow_counting(const BlockOperator& d0, const BlockOperator& v,
                                        double mu) {
    require_same_shape(d0, v);
    const BlockOperator d1 = d0 + v;
    const SpectralDecomposition dec0(d0), dec1(d1);
    detail::require_off_spectrum(dec0, mu, "initial endpoint");
    detail::require_off_spectrum(dec1, mu, "final endpoint");
    const auto c0 = dec0.counts_below(mu);
    const auto c1 = dec1.counts_below(mu);
    FlowValue out;
    out.block_counts.resize(c0.size());
    for (std::size_t b = 0; b < c0.size(); ++b) out.block_counts[b] = c0[b] - c1[b];
    out.value = combine_weighted_counts(d0.weights(), out.block_counts);
    return out;
}

struct PartitionFlowResult {
    double value = 0.0;
    std::vector<long> block_counts;
    int depth = 0;           // dyadic refinement depth that was accepted
    std::size_t segments = 0;
    double max_norm_gap = 0.0; // largest projection gap over accepted segments
    long rank_transitions = 0; // segments accepted through the rank criterion
};

// Spectral flow by partitioning the path, pairing the positive spectral
// projections of adjacent nodes, and summing their relative indices. The
// partition is refined dyadically until every segment either has projection
// gap strictly below 1 or exhibits a rank transition once the partition is
// fine enough (depth >= 4); the summed index is then partition independent
// because adjacent contributions telescope.
inline PartitionFlowResult spectral_flow_partition(const BlockOperator& d0,
                                                   const BlockOperator& v, double mu,
                                                   int min_depth = 0,
                                                   std::size_t max_segments = 16384) {
    require_same_shape(d0, v);
    const SpectralDecomposition dec0(d0), dec1(BlockOperator(d0 + v));
    detail::require_off_spectrum(dec0, mu, "initial endpoint");
    detail::require_off_spectrum(dec1, mu, "final endpoint");

    const std::size_t nblocks = d0.block_count();
    const Interval positive{mu, std::numeric_limits<double>::infinity(), true, true};

    for (int depth = std::max(min_depth, 0);; ++depth) {
        const std::size_t segs = std::size_t{1} << depth;
        if (segs > max_segments)
            throw PartitionBudgetExceeded("partition refinement exceeded " +
                                          std::to_string(max_segments) + " segments");

        // Positive spectral projections at the partition nodes.
        std::vector<std::vector<Eigen::MatrixXcd>> proj(segs + 1);
        std::vector<std::vector<long>> ranks(segs + 1, std::vector<long>(nblocks, 0));
        for (std::size_t j = 0; j <= segs; ++j) {
            const double r = static_cast<double>(j) / static_cast<double>(segs);
            const SpectralDecomposition dec(BlockOperator(d0 + v.scaled(r)));
            const WeightedProjection wp = spectral_projection(dec, positive);
            proj[j].reserve(nblocks);
            for (std::size_t b = 0; b < nblocks; ++b) {
                proj[j].push_back(wp.projection.block(b));
                ranks[j][b] = wp.block_ranks[b];
            }
        }

        bool all_ok = true;
        double max_gap = 0.0;
        long transitions = 0;
        for (std::size_t j = 1; j <= segs && all_ok; ++j) {
            double gap = 0.0;
            bool rank_change = false;
            for (std::size_t b = 0; b < nblocks; ++b) {
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(proj[j - 1][b] - proj[j][b],
                                                                   Eigen::EigenvaluesOnly);
                gap = std::max(gap,
                               std::max(std::abs(es.eigenvalues().minCoeff()),
                                        std::abs(es.eigenvalues().maxCoeff())));
                if (ranks[j - 1][b] != ranks[j][b]) rank_change = true;
            }
            const bool norm_ok = gap < 1.0 - 1e-9;
            const bool rank_ok = rank_change && depth >= 4;
            if (norm_ok || rank_ok) {
                max_gap = std::max(max_gap, gap);
                if (!norm_ok) ++transitions;
            } else {
                all_ok = false;
            }
        }
        if (!all_ok) continue;

        // Relative index of each adjacent projection pair: kernel dimensions
        // of P_{j-1} P_j as a map from ran P_j to ran P_{j-1}.
        PartitionFlowResult out;
        out.block_counts.assign(nblocks, 0);
        out.depth = depth;
        out.segments = segs;
        out.max_norm_gap = max_gap;
        out.rank_transitions = transitions;
        for (std::size_t j = 1; j <= segs; ++j) {
            for (std::size_t b = 0; b < nblocks; ++b) {
                const Eigen::MatrixXcd bp = detail::projection_range_basis(proj[j - 1][b]);
                const Eigen::MatrixXcd bq = detail::projection_range_basis(proj[j][b]);
                const long rank = detail::svd_rank(bp.adjoint() * bq, 1e-6);
                const long ker_right = static_cast<long>(bq.cols()) - rank;
                const long ker_left = static_cast<long>(bp.cols()) - rank;
                out.block_counts[b] += ker_right - ker_left;
            }
        }
        out.value = combine_weighted_counts(d0.weights(), out.block_counts);
        return out;
    }
}

// Eta invariant of D at heat scale eps, relative to the level mu: the
// erfc-weighted signature sum over the spectrum. Eigenvalues within the
// kernel tolerance of mu carry signature zero.
inline double eta_invariant(const BlockOperator& d, double eps, double mu = 0.0) {
    const SpectralDecomposition dec(d);
    const double tol = default_kernel_tolerance(dec);
    double acc = 0.0;
    for (std::size_t b = 0; b < d.block_count(); ++b) {
        const auto& ev = dec.eigenvalues(b);
        double block_sum = 0.0;
        for (Eigen::Index i = 0; i < ev.size(); ++i) {
            const double lam = ev[i] - mu;
            if (std::abs(lam) <= tol) continue;
            const double sgn = lam > 0.0 ? 1.0 : -1.0;
            block_sum += sgn * std::erfc(std::sqrt(eps) * std::abs(lam));
        }
        acc += d.weights()[b] * block_sum;
    }
    return acc;
}

// Independent evaluation of the same eta invariant as the truncated heat
// integral (1/sqrt(pi)) int_eps^inf tau((D-mu) exp(-t (D-mu)^2)) t^{-1/2} dt,
// by Gauss-Legendre panels on a geometric subdivision. Eigenvalues within
// the kernel tolerance are excluded, matching the signature-zero convention.
inline double eta_invariant_quadrature(const BlockOperator& d, double eps, double mu = 0.0,
                                       int nodes_per_panel = 32) {
    const SpectralDecomposition dec(d);
    const double tol = default_kernel_tolerance(dec);
    std::vector<std::pair<double, double>> modes; // (weight, shifted eigenvalue)
    double min_abs = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < d.block_count(); ++b) {
        const auto& ev = dec.eigenvalues(b);
        for (Eigen::Index i = 0; i < ev.size(); ++i) {
            const double lam = ev[i] - mu;
            if (std::abs(lam) <= tol) continue;
            modes.emplace_back(d.weights()[b], lam);
            min_abs = std::min(min_abs, std::abs(lam));
        }
    }
    if (modes.empty()) return 0.0;

    auto integrand = [&modes](double t) {
        double acc = 0.0;
        for (const auto& [w, lam] : modes) acc += w * lam * std::exp(-t * lam * lam);
        return acc / std::sqrt(M_PI * t);
    };
    const double t_end = std::max(2.0 * eps, 60.0 / (min_abs * min_abs));
    double acc = 0.0;
    double lo = eps;
    while (lo < t_end) {
        const double hi = std::min(2.0 * lo, t_end);
        acc += integrate_gl(integrand, lo, hi, nodes_per_panel);
        lo = hi;
    }
    return acc;
}

struct CpFlowResult {
    double value = 0.0;
    double integral_term = 0.0; // sqrt(eps/pi) * averaged heat pairing with V
    double eta_term = 0.0;      // half the eta difference of the endpoints
    double kernel_term = 0.0;   // half the weighted kernel dimension difference
    double quad_error = 0.0;
    long evaluations = 0;
};

// Spectral flow through mu by the heat-kernel path integral plus endpoint
// eta and kernel corrections. Valid at any eps > 0; the three terms vary
// with eps individually but their sum does not.
inline CpFlowResult carey_phillips_flow(const BlockOperator& d0, const BlockOperator& v,
                                        double mu, double eps,
                                        const QuadratureConfig& cfg = {}) {
    require_same_shape(d0, v);
    const BlockOperator d1 = d0 + v;

    auto integrand = [&](double r) {
        const SpectralDecomposition dec(BlockOperator(d0 + v.scaled(r)));
        double acc = 0.0;
        for (std::size_t b = 0; b < d0.block_count(); ++b) {
            const auto& ev = dec.eigenvalues(b);
            const auto& u = dec.unitary(b);
            double block_sum = 0.0;
            for (Eigen::Index i = 0; i < ev.size(); ++i) {
                const double lam = ev[i] - mu;
                const Eigen::VectorXcd col = u.col(i);
                block_sum += std::exp(-eps * lam * lam) *
                             (col.adjoint() * v.block(b) * col)(0, 0).real();
            }
            acc += d0.weights()[b] * block_sum;
        }
        return acc;
    };
    const AdaptiveResult heat =
        integrate_adaptive(integrand, 0.0, 1.0, cfg.tolerance * 1e-3, cfg.max_evals);

    CpFlowResult out;
    out.integral_term = std::sqrt(eps / M_PI) * heat.value;
    out.quad_error = std::sqrt(eps / M_PI) * heat.error_estimate;
    out.evaluations = static_cast<long>(heat.evaluations);
    out.eta_term = 0.5 * (eta_invariant(d1, eps, mu) - eta_invariant(d0, eps, mu));

    const SpectralDecomposition dec0(d0), dec1(d1);
    const double tol0 = default_kernel_tolerance(dec0);
    const double tol1 = default_kernel_tolerance(dec1);
    const auto k0 = detail::kernel_counts(dec0, mu, tol0);
    const auto k1 = detail::kernel_counts(dec1, mu, tol1);
    std::vector<long> kdiff(k0.size());
    for (std::size_t b = 0; b < k0.size(); ++b) kdiff[b] = k1[b] - k0[b];
    out.kernel_term = 0.5 * combine_weighted_counts(d0.weights(), kdiff);

    out.value = out.integral_term + out.eta_term + out.kernel_term;
    return out;
}

struct FlowRequest {
    BlockOperator d0;
    BlockOperator v;
    double mu = 0.0;
    double epsilon = 1.0;
    std::size_t partition_budget = 16384;
    QuadratureConfig quadrature;
};

inline FlowValue spectral_flow_counting(const FlowRequest& req) {
    return spectral_flow_counting(req.d0, req.v, req.mu);
}

inline PartitionFlowResult spectral_flow_partition(const FlowRequest& req, int min_depth = 0) {
    return spectral_flow_partition(req.d0, req.v, req.mu, min_depth, req.partition_budget);
}

inline CpFlowResult carey_phillips_flow(const FlowRequest& req) {
    return carey_phillips_flow(req.d0, req.v, req.mu, req.epsilon, req.quadrature);
}

struct FlowReport {
    double mu = 0.0;
    bool skipped = false;       // mu collided with an endpoint spectrum
    double sf_counting = 0.0;
    double sf_partition = 0.0;
    double sf_cp = 0.0;
    double xi = 0.0;            // spectral shift of (D0, V) at mu
    double kernel_corr = 0.0;   // kernel correction term of the heat formula
    double cp_gap = 0.0;        // |sf_cp - sf_counting|
    bool counting_eq_partition = false; // bitwise
    bool counting_eq_xi = false;        // bitwise
};

// Sweeps the flow level over a grid and evaluates all three flow routes plus
// the spectral shift function of the same pair. Grid points that collide
// with an endpoint spectrum are reported as skipped rows.
inline std::vector<FlowReport> flow_shift_identity_check(const FlowRequest& base,
                                                         const std::vector<double>& mu_grid) {
    std::vector<FlowReport> rows;
    rows.reserve(mu_grid.size());
    const StepFunction xi = xi_counting(base.d0, base.v);
    for (double mu : mu_grid) {
        FlowRequest req = base;
        req.mu = mu;
        FlowReport row;
        row.mu = mu;
        try {
            const FlowValue counting = spectral_flow_counting(req);
            const PartitionFlowResult part = spectral_flow_partition(req);
            const CpFlowResult cp = carey_phillips_flow(req);
            row.sf_counting = counting.value;
            row.sf_partition = part.value;
            row.sf_cp = cp.value;
            row.xi = xi(mu);
            row.kernel_corr = cp.kernel_term;
            row.cp_gap = std::abs(cp.value - counting.value);
            row.counting_eq_partition = counting.value == part.value;
            row.counting_eq_xi = counting.value == row.xi;
        } catch (const EndpointKernel&) {
            row.skipped = true;
        }
        rows.push_back(row);
    }
    return rows;
}

} // namespace opcalc
