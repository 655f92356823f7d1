#include <gtest/gtest.h>

#include <opcalc/moi.hpp>
#include <opcalc/rng.hpp>

#include <cmath>
#include <complex>
#include <vector>

using namespace opcalc;

namespace {

BlockOperator random_hermitian_op(NormalGenerator& gen,
                                  const std::vector<std::pair<int, double>>& dims) {
    std::vector<Matrix> blocks;
    std::vector<double> weights;
    for (const auto& [d, w] : dims) {
        Matrix a(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) a(i, j) = gen.complex_unit_normal();
        blocks.push_back(Matrix(0.5 * (a + a.adjoint())));
        weights.push_back(w);
    }
    return BlockOperator(std::move(blocks), std::move(weights), true);
}

const std::vector<std::pair<int, double>> kDims{{2, 1.0}, {3, 0.5}};

BlockOperator scalar_op(double x) {
    Matrix m(1, 1);
    m(0, 0) = Complex(x, 0.0);
    return BlockOperator({m}, {1.0}, true);
}

SeparableKernel one_sided(std::function<Complex(double)> left,
                          std::function<Complex(double)> right) {
    SeparableKernel k;
    SeparableKernel::Term t;
    t.weight = Complex(1.0, 0.0);
    t.slots.push_back(std::move(left));
    t.slots.push_back(std::move(right));
    k.terms.push_back(std::move(t));
    return k;
}

const auto kOne = [](double) { return Complex(1.0, 0.0); };

} // namespace

TEST(MoiRequest, ValidatesShapeOrderAndKernelBudget) {
    NormalGenerator gen(1);
    BlockOperator h = random_hermitian_op(gen, kDims);
    BlockOperator v = random_hermitian_op(gen, kDims);
    WienerFunction f = WienerFunction::gaussian(1.0, 1);

    EXPECT_THROW(MOIRequest({0, {h}, {}, f}).validate(), ShapeMismatch);
    EXPECT_THROW(MOIRequest({1, {h}, {v}, f}).validate(), ShapeMismatch);
    EXPECT_THROW(MOIRequest({1, {h, h}, {}, f}).validate(), ShapeMismatch);
    EXPECT_THROW(MOIRequest({2, {h, h, h}, {v, v}, f}).validate(), KernelDomain);
    EXPECT_THROW(MOIRequest({2, {h, h, h}, {v, v}, SeparableKernel::constant(1, Complex(1.0, 0.0))})
                     .validate(),
                 ShapeMismatch);

    BlockOperator x = v.scaled(Complex(0.0, 1.0)); // hermitian flag dropped
    EXPECT_THROW(MOIRequest({1, {h, x}, {v}, f}).validate(), NotHermitian);
}

TEST(MoiSpectral, ConstantKernelActsAsTheIdentity) {
    NormalGenerator gen(2);
    BlockOperator h0 = random_hermitian_op(gen, kDims);
    BlockOperator h1 = random_hermitian_op(gen, kDims);
    BlockOperator v = random_hermitian_op(gen, kDims);
    MOIRequest req{1, {h0, h1}, {v}, SeparableKernel::constant(1, Complex(1.0, 0.0))};
    EXPECT_LT(max_abs_diff(moi_spectral(req).value, v), 1e-13);
}

TEST(MoiSpectral, ZeroDirectionGivesZero) {
    NormalGenerator gen(3);
    BlockOperator h0 = random_hermitian_op(gen, kDims);
    BlockOperator h1 = random_hermitian_op(gen, kDims);
    MOIRequest req{1, {h0, h1}, {BlockOperator::zero_like(h0)}, WienerFunction::gaussian(1.0)};
    EXPECT_EQ(moi_spectral(req).value.max_abs(), 0.0);
}

TEST(MoiSpectral, SharedLegReducesToASchurProduct) {
    NormalGenerator gen(4);
    BlockOperator h = random_hermitian_op(gen, kDims);
    BlockOperator v = random_hermitian_op(gen, kDims);
    WienerFunction f = WienerFunction::gaussian(0.9);

    MOIRequest req{1, {h, h}, {v}, f};
    BlockOperator t = moi_spectral(req).value;

    SpectralDecomposition d(h);
    for (std::size_t b = 0; b < h.block_count(); ++b) {
        const auto& ev = d.eigenvalues(b);
        Matrix vt = d.unitary(b).adjoint() * v.block(b) * d.unitary(b);
        Matrix core(ev.size(), ev.size());
        for (Eigen::Index i = 0; i < ev.size(); ++i)
            for (Eigen::Index j = 0; j < ev.size(); ++j)
                core(i, j) = divided_difference(f, {ev(i), ev(j)}) * vt(i, j);
        Matrix expected = d.unitary(b) * core * d.unitary(b).adjoint();
        EXPECT_LT((t.block(b) - expected).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(MoiFourier, ScalarCaseMatchesTheDifferenceQuotient) {
    const double x = 0.3, y = -0.8, a = 1.1;
    WienerFunction f = WienerFunction::complex_exponential(a);
    QuadratureConfig cfg;
    cfg.tolerance = 1e-8;
    MOIRequest req{1, {scalar_op(x), scalar_op(y)}, {scalar_op(1.0)}, f};
    const Complex got = moi_fourier(req, cfg).value.block(0)(0, 0);
    const Complex expected = (f.evaluate(x, 0) - f.evaluate(y, 0)) / (x - y);
    EXPECT_LE(std::abs(got - expected), 1e-7);
}

TEST(MoiFourier, AgreesWithTheSpectralPathAndReportsHonestError) {
    QuadratureConfig cfg; // default 1e-6 budget
    NormalGenerator gen(5);
    for (int n : {1, 2}) {
        std::vector<BlockOperator> ops;
        for (int j = 0; j <= n; ++j) ops.push_back(random_hermitian_op(gen, kDims));
        std::vector<BlockOperator> dirs;
        for (int j = 0; j < n; ++j) {
            BlockOperator w = random_hermitian_op(gen, kDims);
            dirs.push_back(w.scaled(Complex(1.0 / uniform_norm(w), 0.0)));
        }
        MOIRequest req{n, ops, dirs, WienerFunction::gaussian(1.0)};
        MOIResult exact = moi_spectral(req);
        MOIResult quad = moi_fourier(req, cfg);
        const double actual = uniform_norm(exact.value - quad.value);
        EXPECT_LE(actual, 1e-6) << "n=" << n;
        EXPECT_LE(actual, quad.error_estimate + 1e-10) << "n=" << n;
        EXPECT_EQ(quad.path, MoiPath::fourier);
    }
}

TEST(MoiFourier, RejectsSeparableKernels) {
    NormalGenerator gen(6);
    BlockOperator h = random_hermitian_op(gen, kDims);
    MOIRequest req{1, {h, h}, {h}, SeparableKernel::constant(1, Complex(1.0, 0.0))};
    EXPECT_THROW(moi_fourier(req), KernelDomain);
}

TEST(MoiFourier, ThrowsWhenTheNodeBudgetRunsOut) {
    QuadratureConfig cfg;
    cfg.tolerance = 1e-12;
    cfg.nodes_per_axis = 2;
    cfg.max_nodes_per_axis = 4;
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = -3.0;
    m(1, 1) = 2.5;
    BlockOperator h({m}, {1.0}, true);
    // The direction must not commute with h, or the integrand loses its
    // oscillatory entries and every rule converges trivially.
    Matrix x = Matrix::Zero(2, 2);
    x(0, 1) = 1.0;
    x(1, 0) = 1.0;
    MOIRequest req{1, {h, h}, {BlockOperator({x}, {1.0}, true)},
                   WienerFunction::complex_exponential(25.0)};
    EXPECT_THROW(moi_fourier(req, cfg), QuadratureBudgetExceeded);
}

TEST(MoiSpectral, ValueIsRepresentationIndependent) {
    NormalGenerator gen(7);
    BlockOperator h0 = random_hermitian_op(gen, kDims);
    BlockOperator h1 = random_hermitian_op(gen, kDims);
    BlockOperator v = random_hermitian_op(gen, kDims);

    SeparableKernel merged = separable_from_divided_difference(WienerFunction::gaussian(1.0), 12);
    SeparableKernel split;
    for (const auto& t : merged.terms) {
        SeparableKernel::Term half = t;
        half.weight *= 0.5;
        split.terms.push_back(half);
        split.terms.push_back(half);
    }

    MOIRequest mreq{1, {h0, h1}, {v}, merged};
    MOIRequest sreq{1, {h0, h1}, {v}, split};
    EXPECT_LT(uniform_norm(moi_spectral(mreq).value - moi_spectral(sreq).value), 1e-12);
}

TEST(MoiSpectral, SeparableStandInTracksTheDividedDifferenceKernel) {
    NormalGenerator gen(8);
    BlockOperator h0 = random_hermitian_op(gen, kDims);
    BlockOperator h1 = random_hermitian_op(gen, kDims);
    BlockOperator v = random_hermitian_op(gen, kDims);
    WienerFunction f = WienerFunction::gaussian(1.0);

    MOIRequest exact{1, {h0, h1}, {v}, f};
    MOIRequest stand_in{1, {h0, h1}, {v}, separable_from_divided_difference(f)};
    EXPECT_LT(uniform_norm(moi_spectral(exact).value - moi_spectral(stand_in).value), 1e-6);
}

TEST(DoiCompose, IdentityKernelsPassThePerturbationThrough) {
    NormalGenerator gen(9);
    BlockOperator h0 = random_hermitian_op(gen, kDims);
    BlockOperator h1 = random_hermitian_op(gen, kDims);
    BlockOperator v = random_hermitian_op(gen, kDims);
    SeparableKernel one = SeparableKernel::constant(1, Complex(1.0, 0.0));
    DoiProductCheck check = doi_compose(one, one, h0, h1, v);
    EXPECT_LT(max_abs_diff(check.composed, v), 1e-13);
    EXPECT_LT(max_abs_diff(check.nested, v), 1e-13);
    EXPECT_LT(check.residual, 1e-13);
}

TEST(DoiCompose, OneSidedKernelsGiveTheSandwichProduct) {
    NormalGenerator gen(10);
    BlockOperator h0 = random_hermitian_op(gen, kDims);
    BlockOperator h1 = random_hermitian_op(gen, kDims);
    BlockOperator v = random_hermitian_op(gen, kDims);
    auto alpha = [](double x) { return Complex(std::cos(x), 0.0); };
    auto beta = [](double x) { return Complex(1.0 / (1.0 + x * x), 0.0); };

    DoiProductCheck check =
        doi_compose(one_sided(alpha, kOne), one_sided(kOne, beta), h0, h1, v);
    BlockOperator expected =
        multiply(multiply(apply_function(alpha, h0), v), apply_function(beta, h1));
    EXPECT_LT(max_abs_diff(check.composed, expected), 1e-12);
    EXPECT_LT(check.residual, 1e-12);
}

TEST(DoiCompose, ProductRuleHoldsOnGenericBoundedKernels) {
    NormalGenerator gen(11);
    BlockOperator h0 = random_hermitian_op(gen, kDims);
    BlockOperator h1 = random_hermitian_op(gen, kDims);
    BlockOperator v = random_hermitian_op(gen, kDims);

    SeparableKernel phi1 = one_sided([](double x) { return Complex(std::cos(1.3 * x), 0.0); },
                                     [](double x) { return std::exp(Complex(0.0, 0.7 * x)); });
    phi1 = phi1 + one_sided([](double x) { return Complex(std::exp(-x * x), 0.0); }, kOne)
                      .scaled(Complex(0.4, -0.2));
    SeparableKernel phi2 = one_sided([](double x) { return std::exp(Complex(0.0, -0.4 * x)); },
                                     [](double x) { return Complex(1.0 / (1.0 + x * x), 0.0); });
    phi2 = phi2 + SeparableKernel::constant(1, Complex(0.3, 0.1));

    EXPECT_LT(doi_compose(phi1, phi2, h0, h1, v).residual, 1e-9);
}

TEST(MoiSpectral, LinearInTheKernel) {
    NormalGenerator gen(12);
    BlockOperator h0 = random_hermitian_op(gen, kDims);
    BlockOperator h1 = random_hermitian_op(gen, kDims);
    BlockOperator v = random_hermitian_op(gen, kDims);
    SeparableKernel phi1 = one_sided([](double x) { return Complex(std::sin(x), 0.0); }, kOne);
    SeparableKernel phi2 = one_sided(kOne, [](double x) { return Complex(std::cos(x), 0.0); });
    EXPECT_LT(moi_linearity_check(phi1, phi2, {h0, h1}, {v}), 1e-10);
}

TEST(MoiContinuity, OutputGapsTrackInputGapsLinearly) {
    NormalGenerator gen(13);
    BlockOperator h = random_hermitian_op(gen, kDims);
    BlockOperator v = random_hermitian_op(gen, kDims);
    BlockOperator w = random_hermitian_op(gen, kDims);

    std::vector<BlockOperator> sequence{v, v + w.scaled(Complex(0.5, 0.0)),
                                        v + w.scaled(Complex(0.25, 0.0)),
                                        v + w.scaled(Complex(0.125, 0.0))};
    ContinuityReport rep =
        moi_continuity_probe(WienerFunction::gaussian(1.0), {h, h}, v, sequence);

    ASSERT_EQ(rep.output_gaps.size(), 4u);
    EXPECT_EQ(rep.output_gaps[0], 0.0); // identical input, identical contraction
    EXPECT_GT(rep.kernel_bound, 0.0);
    for (std::size_t k = 1; k < 4; ++k)
        EXPECT_LE(rep.output_gaps[k], rep.kernel_bound * rep.input_gaps[k] * (1.0 + 1e-9) + 1e-15);
    // Halving the input halves the output: the integral is linear in V.
    EXPECT_NEAR(rep.output_gaps[1] / rep.output_gaps[2], 2.0, 1e-9);
    EXPECT_NEAR(rep.output_gaps[2] / rep.output_gaps[3], 2.0, 1e-9);
}

TEST(MoiSpectral, TraceNormContractionUnderTheKernelBound) {
    NormalGenerator gen(14);
    for (const auto& f : {WienerFunction::sine(1.3), WienerFunction::gaussian(0.9)}) {
        BlockOperator h0 = random_hermitian_op(gen, kDims);
        BlockOperator h1 = random_hermitian_op(gen, kDims);
        BlockOperator v = random_hermitian_op(gen, kDims);
        MOIRequest req{1, {h0, h1}, {v}, f};
        const double bound =
            kernel_norm_bound(req.kernel, 1, {{0.0}, {0.0}}); // spectra unused for this kernel
        EXPECT_LE(trace_norm(moi_spectral(req).value),
                  bound * trace_norm(v) * (1.0 + 1e-9) + 1e-12)
            << f.name();
    }
}

TEST(MoiSpectral, RealKernelsPreserveHermiticity) {
    NormalGenerator gen(15);
    BlockOperator h = random_hermitian_op(gen, kDims);
    BlockOperator v = random_hermitian_op(gen, kDims);
    for (const auto& f : {WienerFunction::sine(1.1), WienerFunction::lorentzian(1.5)}) {
        MOIRequest req{1, {h, h}, {v}, f};
        BlockOperator t = moi_spectral(req).value;
        EXPECT_LT(max_abs_diff(t, t.adjoint()), 1e-10) << f.name();
    }
}
