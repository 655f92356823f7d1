#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace opcalc {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;

// Finite model of a semifinite trace: block-diagonal operators carrying one
// positive weight per block, tau(X) = sum_b w_b * tr(X_b). Non-unit weights
// are what make shift/flow values land off the integers.
//
// Instances are immutable after construction; all arithmetic returns fresh
// values, so everything here is safe to use from parallel loops.
class BlockOperator {
  public:
    BlockOperator() = default;

    BlockOperator(std::vector<Matrix> blocks, std::vector<double> weights,
                  bool hermitian = false)
        : blocks_(std::move(blocks)), weights_(std::move(weights)), hermitian_(hermitian) {
        if (blocks_.size() != weights_.size())
            throw DimensionMismatch("block/weight counts differ: " +
                                    std::to_string(blocks_.size()) + " vs " +
                                    std::to_string(weights_.size()));
        if (blocks_.empty()) throw DimensionMismatch("operator needs at least one block");
        for (std::size_t b = 0; b < blocks_.size(); ++b) {
            if (blocks_[b].rows() != blocks_[b].cols())
                throw DimensionMismatch("block " + std::to_string(b) + " is not square");
            if (blocks_[b].rows() == 0)
                throw DimensionMismatch("block " + std::to_string(b) + " is empty");
            if (!(weights_[b] > 0.0))
                throw DimensionMismatch("weight " + std::to_string(b) + " must be positive");
        }
        if (hermitian_) {
            // Relative hermiticity check at 1e-12.
            const double scale = 1.0 + max_abs();
            for (std::size_t b = 0; b < blocks_.size(); ++b) {
                double dev = (blocks_[b] - blocks_[b].adjoint()).cwiseAbs().maxCoeff();
                if (dev > 1e-12 * scale)
                    throw NotHermitian("block " + std::to_string(b) +
                                       " deviates from its adjoint by " + std::to_string(dev));
            }
        }
    }

    std::size_t block_count() const { return blocks_.size(); }
    const Matrix& block(std::size_t b) const { return blocks_[b]; }
    const std::vector<Matrix>& blocks() const { return blocks_; }
    double weight(std::size_t b) const { return weights_[b]; }
    const std::vector<double>& weights() const { return weights_; }
    bool hermitian_flag() const { return hermitian_; }

    Eigen::Index dim(std::size_t b) const { return blocks_[b].rows(); }
    Eigen::Index total_dim() const {
        Eigen::Index n = 0;
        for (const auto& m : blocks_) n += m.rows();
        return n;
    }

    bool same_shape(const BlockOperator& o) const {
        if (blocks_.size() != o.blocks_.size()) return false;
        for (std::size_t b = 0; b < blocks_.size(); ++b)
            if (dim(b) != o.dim(b) || weights_[b] != o.weights_[b]) return false;
        return true;
    }

    void require_same_shape(const BlockOperator& o, const char* what) const {
        if (!same_shape(o))
            throw ShapeMismatch(std::string(what) + ": block shapes or weights disagree");
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& blk : blocks_) m = std::max(m, blk.cwiseAbs().maxCoeff());
        return m;
    }

    BlockOperator operator+(const BlockOperator& o) const {
        require_same_shape(o, "operator+");
        std::vector<Matrix> out(blocks_.size());
        for (std::size_t b = 0; b < blocks_.size(); ++b) out[b] = blocks_[b] + o.blocks_[b];
        return BlockOperator(std::move(out), weights_, hermitian_ && o.hermitian_);
    }

    BlockOperator operator-(const BlockOperator& o) const {
        require_same_shape(o, "operator-");
        std::vector<Matrix> out(blocks_.size());
        for (std::size_t b = 0; b < blocks_.size(); ++b) out[b] = blocks_[b] - o.blocks_[b];
        return BlockOperator(std::move(out), weights_, hermitian_ && o.hermitian_);
    }

    BlockOperator scaled(Complex c) const {
        std::vector<Matrix> out(blocks_.size());
        for (std::size_t b = 0; b < blocks_.size(); ++b) out[b] = c * blocks_[b];
        const bool herm = hermitian_ && c.imag() == 0.0;
        return BlockOperator(std::move(out), weights_, herm);
    }

    BlockOperator adjoint() const {
        std::vector<Matrix> out(blocks_.size());
        for (std::size_t b = 0; b < blocks_.size(); ++b) out[b] = blocks_[b].adjoint();
        return BlockOperator(std::move(out), weights_, hermitian_);
    }

    static BlockOperator zero_like(const BlockOperator& ref) {
        std::vector<Matrix> out(ref.blocks_.size());
        for (std::size_t b = 0; b < ref.blocks_.size(); ++b)
            out[b] = Matrix::Zero(ref.dim(b), ref.dim(b));
        return BlockOperator(std::move(out), ref.weights_, true);
    }

    static BlockOperator identity_like(const BlockOperator& ref) {
        std::vector<Matrix> out(ref.blocks_.size());
        for (std::size_t b = 0; b < ref.blocks_.size(); ++b)
            out[b] = Matrix::Identity(ref.dim(b), ref.dim(b));
        return BlockOperator(std::move(out), ref.weights_, true);
    }

  private:
    std::vector<Matrix> blocks_;
    std::vector<double> weights_;
    bool hermitian_ = false;
};

inline BlockOperator operator*(Complex c, const BlockOperator& x) { return x.scaled(c); }
inline BlockOperator operator*(double c, const BlockOperator& x) { return x.scaled(Complex(c, 0.0)); }

inline void require_same_shape(const BlockOperator& a, const BlockOperator& b) {
    a.require_same_shape(b, "operands");
}

// Blockwise composition. Weights must agree; the product keeps them.
inline BlockOperator multiply(const BlockOperator& a, const BlockOperator& b) {
    a.require_same_shape(b, "multiply");
    std::vector<Matrix> out(a.block_count());
    for (std::size_t i = 0; i < a.block_count(); ++i) out[i] = a.block(i) * b.block(i);
    return BlockOperator(std::move(out), a.weights(), false);
}

inline Complex weighted_trace(const BlockOperator& x) {
    Complex acc(0.0, 0.0);
    for (std::size_t b = 0; b < x.block_count(); ++b) acc += x.weight(b) * x.block(b).trace();
    return acc;
}

// tau-weighted Schatten-1 norm: sum_b w_b * sum_i sigma_i(X_b).
inline double trace_norm(const BlockOperator& x) {
    double acc = 0.0;
    for (std::size_t b = 0; b < x.block_count(); ++b) {
        Eigen::JacobiSVD<Matrix> svd(x.block(b));
        acc += x.weight(b) * svd.singularValues().sum();
    }
    return acc;
}

// Operator norm: largest singular value over all blocks (weights play no role).
inline double uniform_norm(const BlockOperator& x) {
    double m = 0.0;
    for (std::size_t b = 0; b < x.block_count(); ++b) {
        Eigen::JacobiSVD<Matrix> svd(x.block(b));
        if (svd.singularValues().size() > 0) m = std::max(m, svd.singularValues()(0));
    }
    return m;
}

inline double max_abs_diff(const BlockOperator& a, const BlockOperator& b) {
    a.require_same_shape(b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.block_count(); ++i)
        m = std::max(m, (a.block(i) - b.block(i)).cwiseAbs().maxCoeff());
    return m;
}

// Combines per-block integer counts into a tau value. Every operation whose
// results must agree bit-for-bit (counting flow, partition flow, step values)
// funnels through this one combiner so the floating-point op sequence is
// identical on all paths.
inline double combine_weighted_counts(const std::vector<double>& weights,
                                      const std::vector<long>& counts) {
    double acc = 0.0;
    for (std::size_t b = 0; b < weights.size(); ++b)
        acc += weights[b] * static_cast<double>(counts[b]);
    return acc;
}

// Eigendecomposition of a hermitian block operator. Eigenvalues ascending per
// block; tau data (weights) travels along. The source is retained so callers
// can state reconstruction residuals against the exact input.
class SpectralDecomposition {
  public:
    explicit SpectralDecomposition(const BlockOperator& source) : source_(source) {
        if (!source.hermitian_flag())
            throw NotHermitian("eigh requires the hermitian flag to be set");
        eigenvalues_.reserve(source.block_count());
        unitaries_.reserve(source.block_count());
        for (std::size_t b = 0; b < source.block_count(); ++b) {
            Eigen::SelfAdjointEigenSolver<Matrix> solver(source.block(b));
            if (solver.info() != Eigen::Success)
                throw Error("eigensolver failed on block " + std::to_string(b));
            eigenvalues_.push_back(solver.eigenvalues());
            unitaries_.push_back(solver.eigenvectors());
        }
    }

    const BlockOperator& source() const { return source_; }
    std::size_t block_count() const { return source_.block_count(); }
    double weight(std::size_t b) const { return source_.weight(b); }
    const std::vector<double>& weights() const { return source_.weights(); }
    Eigen::Index dim(std::size_t b) const { return source_.dim(b); }
    const RealVector& eigenvalues(std::size_t b) const { return eigenvalues_[b]; }
    const Matrix& unitary(std::size_t b) const { return unitaries_[b]; }

    double spectral_radius() const {
        double r = 0.0;
        for (const auto& ev : eigenvalues_)
            r = std::max({r, std::abs(ev(0)), std::abs(ev(ev.size() - 1))});
        return r;
    }

    // e^{i s H} restricted to one block.
    Matrix unitary_exp(std::size_t b, double s) const {
        const auto& ev = eigenvalues_[b];
        Eigen::VectorXcd phase(ev.size());
        for (Eigen::Index i = 0; i < ev.size(); ++i)
            phase(i) = std::exp(Complex(0.0, s * ev(i)));
        return unitaries_[b] * phase.asDiagonal() * unitaries_[b].adjoint();
    }

    // Per-block count of eigenvalues <= lambda (closed right end, the
    // counting-function convention N(lambda) = tau E(-inf, lambda]).
    std::vector<long> counts_below(double lambda) const {
        std::vector<long> counts(block_count(), 0);
        for (std::size_t b = 0; b < block_count(); ++b) {
            const auto& ev = eigenvalues_[b];
            long c = 0;
            for (Eigen::Index i = 0; i < ev.size(); ++i)
                if (ev(i) <= lambda) ++c;
            counts[b] = c;
        }
        return counts;
    }

    double counting_function(double lambda) const {
        return combine_weighted_counts(weights(), counts_below(lambda));
    }

    double distance_to_spectrum(double mu) const {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& ev : eigenvalues_)
            for (Eigen::Index i = 0; i < ev.size(); ++i) d = std::min(d, std::abs(ev(i) - mu));
        return d;
    }

  private:
    BlockOperator source_;
    std::vector<RealVector> eigenvalues_;
    std::vector<Matrix> unitaries_;
};

inline SpectralDecomposition eigh(const BlockOperator& h) { return SpectralDecomposition(h); }

// Functional calculus through a decomposition. The scalar function must be
// finite at every eigenvalue; values with vanishing imaginary part yield a
// hermitian result flag.
inline BlockOperator apply_function(const std::function<Complex(double)>& f,
                                    const SpectralDecomposition& d) {
    std::vector<Matrix> out(d.block_count());
    bool real_valued = true;
    for (std::size_t b = 0; b < d.block_count(); ++b) {
        const auto& ev = d.eigenvalues(b);
        Eigen::VectorXcd fv(ev.size());
        for (Eigen::Index i = 0; i < ev.size(); ++i) {
            Complex v = f(ev(i));
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
                throw FunctionDomain("function not finite at eigenvalue " + std::to_string(ev(i)));
            if (std::abs(v.imag()) > 1e-14 * (1.0 + std::abs(v.real()))) real_valued = false;
            fv(i) = v;
        }
        out[b] = d.unitary(b) * fv.asDiagonal() * d.unitary(b).adjoint();
    }
    return BlockOperator(std::move(out), d.weights(), real_valued);
}

inline BlockOperator apply_function(const std::function<Complex(double)>& f,
                                    const BlockOperator& h) {
    return apply_function(f, eigh(h));
}

// Spectral interval with independent open/closed endpoint flags.
struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool open_lo = true;
    bool open_hi = false; // default shape (a, b]

    static Interval open(double a, double b) { return {a, b, true, true}; }
    static Interval closed(double a, double b) { return {a, b, false, false}; }
    static Interval left_open(double a, double b) { return {a, b, true, false}; }
    static Interval up_to(double b) {
        return {-std::numeric_limits<double>::infinity(), b, true, false};
    }

    bool contains(double x) const {
        const bool lo_ok = open_lo ? x > lo : x >= lo;
        const bool hi_ok = open_hi ? x < hi : x <= hi;
        return lo_ok && hi_ok;
    }
};

// Spectral projection bundled with its tau-rank. Per-block integer ranks are
// kept alongside for the exact-agreement contracts downstream.
struct WeightedProjection {
    BlockOperator projection;
    double weighted_rank = 0.0;
    std::vector<long> block_ranks;
};

inline WeightedProjection spectral_projection(const SpectralDecomposition& d,
                                              const Interval& window) {
    std::vector<Matrix> blocks(d.block_count());
    std::vector<long> ranks(d.block_count(), 0);
    for (std::size_t b = 0; b < d.block_count(); ++b) {
        const auto& ev = d.eigenvalues(b);
        Matrix p = Matrix::Zero(ev.size(), ev.size());
        long rank = 0;
        for (Eigen::Index i = 0; i < ev.size(); ++i) {
            if (window.contains(ev(i))) {
                p += d.unitary(b).col(i) * d.unitary(b).col(i).adjoint();
                ++rank;
            }
        }
        blocks[b] = std::move(p);
        ranks[b] = rank;
    }
    WeightedProjection out{BlockOperator(std::move(blocks), d.weights(), true),
                           combine_weighted_counts(d.weights(), ranks), std::move(ranks)};
    return out;
}

inline double default_kernel_tolerance(const SpectralDecomposition& d) {
    return 1e-9 * (1.0 + d.spectral_radius());
}

inline WeightedProjection kernel_projection(const SpectralDecomposition& d, double mu,
                                            double tol = -1.0) {
    if (tol < 0.0) tol = default_kernel_tolerance(d);
    std::vector<Matrix> blocks(d.block_count());
    std::vector<long> ranks(d.block_count(), 0);
    for (std::size_t b = 0; b < d.block_count(); ++b) {
        const auto& ev = d.eigenvalues(b);
        Matrix p = Matrix::Zero(ev.size(), ev.size());
        long rank = 0;
        for (Eigen::Index i = 0; i < ev.size(); ++i) {
            if (std::abs(ev(i) - mu) <= tol) {
                p += d.unitary(b).col(i) * d.unitary(b).col(i).adjoint();
                ++rank;
            }
        }
        blocks[b] = std::move(p);
        ranks[b] = rank;
    }
    return WeightedProjection{BlockOperator(std::move(blocks), d.weights(), true),
                              combine_weighted_counts(d.weights(), ranks), std::move(ranks)};
}

} // namespace opcalc
