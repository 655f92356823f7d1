#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "quadrature.hpp"

namespace opcalc {

using Complex = std::complex<double>;

// Everything here follows one Fourier convention, fixed project-wide:
//
//   f(lambda) = (2*pi)^{-1/2} * Integral e^{i s lambda} m_f(ds)
//
// so the measure of the j-th derivative is (i s)^j m_f(ds), and the total
// variation of the order-n simplex measure is ||m_{f^{(n)}}|| / n!.

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779;
inline constexpr double kSqrt2Pi = 2.5066282746310005024;

inline Complex ipow(Complex z, int j) {
    Complex acc(1.0, 0.0);
    for (int k = 0; k < j; ++k) acc *= z;
    return acc;
}

inline double factorial(int n) {
    double acc = 1.0;
    for (int k = 2; k <= n; ++k) acc *= k;
    return acc;
}

struct MeasureAtom {
    double s = 0.0;
    Complex mass{0.0, 0.0};
};

// Finite complex measure on the line: point atoms plus an optional sampled
// density. The density is interpreted by the trapezoid rule on its grid; the
// grid need not be uniform, only ascending.
struct FourierMeasure {
    struct Density {
        std::vector<double> grid;
        std::vector<Complex> values;
    };

    std::vector<MeasureAtom> atoms;
    std::optional<Density> density;
    double truncation_radius = 0.0;

    double total_variation() const {
        double tv = 0.0;
        for (const auto& a : atoms) tv += std::abs(a.mass);
        if (density) {
            const auto& g = density->grid;
            const auto& v = density->values;
            for (std::size_t k = 0; k + 1 < g.size(); ++k)
                tv += 0.5 * (g[k + 1] - g[k]) * (std::abs(v[k]) + std::abs(v[k + 1]));
        }
        return tv;
    }

    // (2*pi)^{-1/2} Integral e^{i s lambda} dm(s); the certification route for
    // the reconstruction contracts.
    Complex reconstruct(double lambda) const {
        Complex acc(0.0, 0.0);
        for (const auto& a : atoms) acc += a.mass * std::exp(Complex(0.0, a.s * lambda));
        if (density) {
            const auto& g = density->grid;
            const auto& v = density->values;
            for (std::size_t k = 0; k + 1 < g.size(); ++k) {
                const Complex f0 = v[k] * std::exp(Complex(0.0, g[k] * lambda));
                const Complex f1 = v[k + 1] * std::exp(Complex(0.0, g[k + 1] * lambda));
                acc += 0.5 * (g[k + 1] - g[k]) * (f0 + f1);
            }
        }
        return kInvSqrt2Pi * acc;
    }

    // Measure of the j-th derivative: multiply by (i s)^j, atom-wise and
    // density-wise.
    FourierMeasure derivative_lift(int j) const {
        FourierMeasure out = *this;
        for (auto& a : out.atoms) a.mass *= ipow(Complex(0.0, a.s), j);
        if (out.density)
            for (std::size_t k = 0; k < out.density->grid.size(); ++k)
                out.density->values[k] *= ipow(Complex(0.0, out.density->grid[k]), j);
        return out;
    }
};

// The closed family of certified Wiener-class functions. Each member knows
// its derivatives analytically and its Fourier measure explicitly; max_order
// is the declared smoothness budget callers may draw on.
class WienerFunction {
  public:
    enum class Family { complex_exponential, sine, cosine, gaussian, lorentzian, finite_trig_combo };

    static WienerFunction complex_exponential(double a, int max_order = 6) {
        return WienerFunction(Family::complex_exponential, a, {}, max_order);
    }
    static WienerFunction sine(double a, int max_order = 6) {
        return WienerFunction(Family::sine, a, {}, max_order);
    }
    static WienerFunction cosine(double a, int max_order = 6) {
        return WienerFunction(Family::cosine, a, {}, max_order);
    }
    static WienerFunction gaussian(double sigma, int max_order = 6) {
        if (!(sigma > 0.0)) throw ConfigParse("gaussian needs sigma > 0");
        return WienerFunction(Family::gaussian, sigma, {}, max_order);
    }
    static WienerFunction lorentzian(double a, int max_order = 6) {
        if (!(a > 0.0)) throw ConfigParse("lorentzian needs a > 0");
        return WienerFunction(Family::lorentzian, a, {}, max_order);
    }
    static WienerFunction finite_trig_combo(std::vector<std::pair<Complex, double>> terms,
                                            int max_order = 6) {
        return WienerFunction(Family::finite_trig_combo, 0.0, std::move(terms), max_order);
    }

    Family family() const { return family_; }
    double param() const { return param_; }
    int max_order() const { return max_order_; }
    const std::vector<std::pair<Complex, double>>& combo_terms() const { return terms_; }

    bool real_valued() const {
        return family_ == Family::sine || family_ == Family::cosine ||
               family_ == Family::gaussian || family_ == Family::lorentzian;
    }

    std::string name() const {
        char buf[128];
        switch (family_) {
            case Family::complex_exponential:
                std::snprintf(buf, sizeof buf, "complex_exponential(a=%g)", param_);
                return buf;
            case Family::sine:
                std::snprintf(buf, sizeof buf, "sine(a=%g)", param_);
                return buf;
            case Family::cosine:
                std::snprintf(buf, sizeof buf, "cosine(a=%g)", param_);
                return buf;
            case Family::gaussian:
                std::snprintf(buf, sizeof buf, "gaussian(sigma=%g)", param_);
                return buf;
            case Family::lorentzian:
                std::snprintf(buf, sizeof buf, "lorentzian(a=%g)", param_);
                return buf;
            case Family::finite_trig_combo:
                std::snprintf(buf, sizeof buf, "finite_trig_combo(%zu terms)", terms_.size());
                return buf;
        }
        return "unknown";
    }

    // f^{(order)}(lambda), analytic formulas throughout.
    Complex evaluate(double lambda, int order = 0) const {
        require_order(order);
        const double a = param_;
        switch (family_) {
            case Family::complex_exponential:
                return ipow(Complex(0.0, a), order) * std::exp(Complex(0.0, a * lambda));
            case Family::sine:
                return std::pow(a, order) * std::sin(a * lambda + order * M_PI_2);
            case Family::cosine:
                return std::pow(a, order) * std::cos(a * lambda + order * M_PI_2);
            case Family::gaussian: {
                // d^j/du^j e^{-u^2} = (-1)^j H_j(u) e^{-u^2}, u = lambda/(sigma*sqrt(2)).
                const double u = lambda / (a * M_SQRT2);
                double h0 = 1.0, h1 = 2.0 * u;
                double hj = (order == 0) ? h0 : h1;
                for (int k = 2; k <= order; ++k) {
                    const double h2 = 2.0 * u * h1 - 2.0 * (k - 1) * h0;
                    h0 = h1;
                    h1 = h2;
                    hj = h2;
                }
                const double chain = std::pow(-1.0 / (a * M_SQRT2), order);
                return Complex(chain * hj * std::exp(-u * u), 0.0);
            }
            case Family::lorentzian: {
                // a^2/(a^2+l^2) = (a/2i)[(l-ia)^{-1} - (l+ia)^{-1}]; the two
                // terms are conjugates, so the derivative stays exactly real.
                const Complex z = Complex(lambda, -a);
                Complex zpow = Complex(1.0, 0.0) / z;
                for (int k = 0; k < order; ++k) zpow /= z;
                const double sgn = (order % 2 == 0) ? 1.0 : -1.0;
                return Complex(a * sgn * factorial(order) * zpow.imag(), 0.0);
            }
            case Family::finite_trig_combo: {
                Complex acc(0.0, 0.0);
                for (const auto& [c, s] : terms_)
                    acc += c * ipow(Complex(0.0, s), order) * std::exp(Complex(0.0, s * lambda));
                return acc;
            }
        }
        throw Error("unreachable family");
    }

    double default_truncation_radius() const {
        switch (family_) {
            case Family::gaussian:
                return 12.0 / param_; // density std is 1/sigma; 12 of those
            case Family::lorentzian:
                // e^{-a R} = e^{-30} ~ 9e-14 of the mass past the cut; the
                // |s|^j lift for j <= 6 stays below 1e-8 of the lifted mass.
                return 30.0 / param_;
            default:
                return 0.0; // purely atomic
        }
    }

    // Certified measure of f^{(order)}. Atomic families and the lorentzian
    // ship atoms; the gaussian ships a uniform-grid density (trapezoid is
    // spectrally accurate there; for e^{-a|s|} the kink at 0 would cap a
    // uniform grid near 1e-5, hence atoms for the lorentzian).
    FourierMeasure fourier_measure(int order, double truncation_radius = 0.0) const {
        require_order(order);
        if (truncation_radius <= 0.0) truncation_radius = default_truncation_radius();
        FourierMeasure m;
        m.truncation_radius = truncation_radius;
        switch (family_) {
            case Family::complex_exponential:
                m.atoms.push_back({param_, Complex(kSqrt2Pi, 0.0)});
                break;
            case Family::sine:
                m.atoms.push_back({param_, Complex(0.0, -0.5) * kSqrt2Pi});
                m.atoms.push_back({-param_, Complex(0.0, 0.5) * kSqrt2Pi});
                break;
            case Family::cosine:
                m.atoms.push_back({param_, Complex(0.5, 0.0) * kSqrt2Pi});
                m.atoms.push_back({-param_, Complex(0.5, 0.0) * kSqrt2Pi});
                break;
            case Family::gaussian: {
                const int n_points = 2001; // odd: s = 0 lands on the grid
                FourierMeasure::Density den;
                den.grid.resize(n_points);
                den.values.resize(n_points);
                const double h = 2.0 * truncation_radius / (n_points - 1);
                for (int k = 0; k < n_points; ++k) {
                    const double s = -truncation_radius + k * h;
                    den.grid[k] = s;
                    den.values[k] = Complex(param_ * std::exp(-0.5 * param_ * param_ * s * s), 0.0);
                }
                m.density = std::move(den);
                break;
            }
            case Family::lorentzian: {
                // Panel-atomized density sqrt(pi/2) * a * e^{-a|s|}; Gauss
                // nodes per smooth half-line keep the reconstruction residual
                // at spectral accuracy.
                append_halfline_atoms(m.atoms, truncation_radius, /*positive=*/true);
                append_halfline_atoms(m.atoms, truncation_radius, /*positive=*/false);
                break;
            }
            case Family::finite_trig_combo:
                for (const auto& [c, s] : terms_) m.atoms.push_back({s, kSqrt2Pi * c});
                break;
        }
        if (order > 0) m = m.derivative_lift(order);
        return m;
    }

    // Analytic atomization of m_{f^{(order)}} for oscillatory quadrature.
    // Atomic families pass through; density families are sampled on Gauss
    // nodes with the analytic density, cfg.density_atoms nodes in total.
    std::vector<MeasureAtom> quadrature_atoms(int order, const QuadratureConfig& cfg) const {
        require_order(order);
        std::vector<MeasureAtom> atoms;
        switch (family_) {
            case Family::gaussian: {
                const double R = default_truncation_radius();
                const int per_half = std::max(8, cfg.density_atoms / 2);
                const auto& rule = gauss_legendre(per_half);
                for (int side = 0; side < 2; ++side) {
                    const double lo = side == 0 ? 0.0 : -R;
                    const double hi = side == 0 ? R : 0.0;
                    const double mid = 0.5 * (lo + hi), hw = 0.5 * (hi - lo);
                    for (int q = 0; q < per_half; ++q) {
                        const double s = mid + hw * rule.nodes[q];
                        const double g = param_ * std::exp(-0.5 * param_ * param_ * s * s);
                        atoms.push_back({s, Complex(std::abs(hw) * rule.weights[q] * g, 0.0)});
                    }
                }
                break;
            }
            case Family::lorentzian: {
                const double R = default_truncation_radius();
                append_halfline_atoms(atoms, R, true);
                append_halfline_atoms(atoms, R, false);
                break;
            }
            default: {
                FourierMeasure m = fourier_measure(0);
                atoms = std::move(m.atoms);
                break;
            }
        }
        if (order > 0)
            for (auto& a : atoms) a.mass *= ipow(Complex(0.0, a.s), order);
        return atoms;
    }

  private:
    WienerFunction(Family fam, double param, std::vector<std::pair<Complex, double>> terms,
                   int max_order)
        : family_(fam), param_(param), terms_(std::move(terms)), max_order_(max_order) {
        if (max_order_ < 0) throw ConfigParse("max_order must be >= 0");
    }

    void require_order(int order) const {
        if (order < 0) throw OrderExceeded("negative derivative order");
        if (order > max_order_)
            throw OrderExceeded("order " + std::to_string(order) + " exceeds declared budget " +
                                std::to_string(max_order_));
    }

    void append_halfline_atoms(std::vector<MeasureAtom>& atoms, double R, bool positive) const {
        // 8 panels x 16 Gauss nodes per half-line.
        const int panels = 8, per_panel = 16;
        const auto& rule = gauss_legendre(per_panel);
        const double a = param_;
        for (int p = 0; p < panels; ++p) {
            const double lo = R * p / panels, hi = R * (p + 1) / panels;
            const double mid = 0.5 * (lo + hi), hw = 0.5 * (hi - lo);
            for (int q = 0; q < per_panel; ++q) {
                const double s_abs = mid + hw * rule.nodes[q];
                const double g = std::sqrt(M_PI / 2.0) * a * std::exp(-a * s_abs);
                const double s = positive ? s_abs : -s_abs;
                atoms.push_back({s, Complex(hw * rule.weights[q] * g, 0.0)});
            }
        }
    }

    Family family_;
    double param_;
    std::vector<std::pair<Complex, double>> terms_;
    int max_order_;
};

// Divided difference over an arbitrary node multiset, confluent rule for
// repeats (Hermite table). Nodes are sorted, then nodes closer than
// 1e-12*(1+max|node|) are snapped to their cluster mean: below that gap the
// difference quotient loses more accuracy to cancellation than the confluent
// substitute f''*(gap)/2 gives up, and snapping keeps kernels functions of
// spectral projections on degenerate spectra.
inline Complex divided_difference(const WienerFunction& f, std::vector<double> nodes) {
    if (nodes.empty()) throw KernelDomain("divided difference needs at least one node");
    const int n = static_cast<int>(nodes.size()) - 1;
    if (n > f.max_order())
        throw OrderExceeded("divided difference of order " + std::to_string(n) +
                            " exceeds budget " + std::to_string(f.max_order()));
    std::sort(nodes.begin(), nodes.end());
    double max_abs = 0.0;
    for (double x : nodes) max_abs = std::max(max_abs, std::abs(x));
    const double snap = 1e-12 * (1.0 + max_abs);
    std::size_t lo = 0;
    for (std::size_t k = 1; k <= nodes.size(); ++k) {
        if (k == nodes.size() || nodes[k] - nodes[k - 1] > snap) {
            if (k - lo > 1) {
                double mean = 0.0;
                for (std::size_t j = lo; j < k; ++j) mean += nodes[j];
                mean /= static_cast<double>(k - lo);
                for (std::size_t j = lo; j < k; ++j) nodes[j] = mean;
            }
            lo = k;
        }
    }

    std::vector<Complex> table(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) table[i] = f.evaluate(nodes[i], 0);
    // Column j holds differences over windows nodes[i..i+j].
    for (int j = 1; j <= n; ++j) {
        for (std::size_t i = 0; i + j < nodes.size(); ++i) {
            if (nodes[i + j] == nodes[i]) {
                table[i] = f.evaluate(nodes[i], j) / factorial(j);
            } else {
                table[i] = (table[i + 1] - table[i]) / (nodes[i + j] - nodes[i]);
            }
        }
        table.resize(nodes.size() - j);
    }
    return table[0];
}

namespace detail {

// Iterated map of the ordered simplex {|s_n| <= ... <= |s_1| <= |s_0|, equal
// signs} onto the unit cube: s_j = s_0 t_1 ... t_j, giving the volume factor
// s_0^n prod t_j^{n-j} with orientation carried by the sign of s_0.
template <typename Body>
void for_each_cube_node(int n, int nodes_per_axis, Body&& body) {
    const auto& rule = gauss_legendre(nodes_per_axis);
    std::vector<int> idx(n, 0);
    std::vector<double> t(n), w(n);
    while (true) {
        double weight = 1.0;
        for (int ax = 0; ax < n; ++ax) {
            // Map [-1,1] -> [0,1].
            t[ax] = 0.5 * (rule.nodes[idx[ax]] + 1.0);
            w[ax] = 0.5 * rule.weights[idx[ax]];
            weight *= w[ax];
        }
        body(t, weight);
        int ax = n - 1;
        while (ax >= 0 && ++idx[ax] == nodes_per_axis) idx[ax--] = 0;
        if (ax < 0) break;
    }
}

inline double cube_jacobian(const std::vector<double>& t) {
    const int n = static_cast<int>(t.size());
    double j = 1.0;
    for (int ax = 0; ax < n - 1; ++ax) {
        for (int p = 0; p < n - 1 - ax; ++p) j *= t[ax];
    }
    return j;
}

} // namespace detail

// Order-n divided difference through the Fourier side: the simplex integral
// of e^{i(s_0 - s_1) l_0} ... e^{i s_n l_n} against (i^n/sqrt(2 pi)) m_f x
// Lebesgue. Independent of the recursion path above; agreement between the
// two is a core dual-path check.
inline Complex divided_difference_via_fourier(const WienerFunction& f,
                                              const std::vector<double>& nodes,
                                              const QuadratureConfig& cfg = {}) {
    if (nodes.empty()) throw KernelDomain("divided difference needs at least one node");
    const int n = static_cast<int>(nodes.size()) - 1;
    if (n > f.max_order())
        throw OrderExceeded("divided difference of order " + std::to_string(n) +
                            " exceeds budget " + std::to_string(f.max_order()));
    const auto atoms = f.quadrature_atoms(0, cfg);
    if (n == 0) {
        Complex acc(0.0, 0.0);
        for (const auto& a : atoms) acc += a.mass * std::exp(Complex(0.0, a.s * nodes[0]));
        return kInvSqrt2Pi * acc;
    }

    double mass_scale = 0.0;
    for (const auto& a : atoms) mass_scale += std::abs(a.mass) * std::pow(std::abs(a.s), n);
    const double skip_below =
        0.05 * cfg.tolerance / (kInvSqrt2Pi * std::max<std::size_t>(atoms.size(), 1));

    Complex total(0.0, 0.0);
    double dropped = 0.0;
    for (const auto& atom : atoms) {
        const double s0 = atom.s;
        const double contrib_bound =
            std::abs(atom.mass) * std::pow(std::abs(s0), n) / factorial(n);
        if (contrib_bound <= skip_below) {
            dropped += contrib_bound;
            continue;
        }
        // Absolute budget share for this atom, relative to the prefactorless
        // contribution c * s0^n * inner.
        const double tol_inner =
            0.5 * cfg.tolerance / (kInvSqrt2Pi * static_cast<double>(atoms.size())) /
            std::max(std::abs(atom.mass) * std::pow(std::abs(s0), n), 1e-300);

        Complex prev(0.0, 0.0);
        bool have_prev = false, converged = false;
        for (int m = cfg.nodes_per_axis; m <= cfg.max_nodes_per_axis; m *= 2) {
            Complex inner(0.0, 0.0);
            detail::for_each_cube_node(n, m, [&](const std::vector<double>& t, double w) {
                double phase = 0.0;
                double prefix = s0;
                // s_0 - s_1 multiplies l_0, then telescoping down to s_n l_n.
                for (int j = 0; j < n; ++j) {
                    const double next = prefix * t[j];
                    phase += (prefix - next) * nodes[j];
                    prefix = next;
                }
                phase += prefix * nodes[n];
                inner += w * detail::cube_jacobian(t) * std::exp(Complex(0.0, phase));
            });
            if (have_prev && std::abs(inner - prev) <= tol_inner) {
                prev = inner;
                converged = true;
                break;
            }
            prev = inner;
            have_prev = true;
        }
        if (!converged && n >= 1) {
            // One refinement past the ceiling would be needed; report budget.
            throw QuadratureBudgetExceeded(
                "simplex quadrature did not converge at " +
                std::to_string(cfg.max_nodes_per_axis) + " nodes per axis for " + f.name());
        }
        total += atom.mass * std::pow(s0, n) * prev;
    }
    (void)dropped;
    return ipow(Complex(0.0, 1.0), n) * kInvSqrt2Pi * total;
}

// Total variation of the order-n simplex measure, by direct quadrature of the
// simplex volume against |m_f|. Reported without the i^n/sqrt(2 pi) head
// constant, i.e. the quantity equal to ||m_{f^{(n)}}||/n!.
inline double simplex_measure_mass(const WienerFunction& f, int n,
                                   const QuadratureConfig& cfg = {}) {
    if (n < 0) throw KernelDomain("order must be >= 0");
    if (n > f.max_order())
        throw OrderExceeded("order " + std::to_string(n) + " exceeds budget " +
                            std::to_string(f.max_order()));
    const auto atoms = f.quadrature_atoms(0, cfg);
    double abs_mass_sn = 0.0;
    for (const auto& a : atoms) abs_mass_sn += std::abs(a.mass) * std::pow(std::abs(a.s), n);
    if (n == 0) return abs_mass_sn;
    double volume = 0.0;
    detail::for_each_cube_node(n, cfg.nodes_per_axis, [&](const std::vector<double>& t, double w) {
        volume += w * detail::cube_jacobian(t);
    });
    return abs_mass_sn * volume;
}

} // namespace opcalc
