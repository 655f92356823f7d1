#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <vector>

#include "errors.hpp"

namespace opcalc {

// Right-continuous real step function with finitely many breakpoints.
// values[k] is the value on [breakpoints[k-1], breakpoints[k]); values.front()
// and values.back() are the two unbounded tails.
class StepFunction {
  public:
    StepFunction(std::vector<double> breakpoints, std::vector<double> values)
        : breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
        if (values_.size() != breakpoints_.size() + 1)
            throw ShapeMismatch("step function needs one more value than breakpoints");
        for (std::size_t k = 1; k < breakpoints_.size(); ++k)
            if (!(breakpoints_[k - 1] < breakpoints_[k]))
                throw ShapeMismatch("step function breakpoints must be strictly ascending");
    }

    const std::vector<double>& breakpoints() const { return breakpoints_; }
    const std::vector<double>& values() const { return values_; }
    double left_tail() const { return values_.front(); }
    double right_tail() const { return values_.back(); }

    double operator()(double x) const {
        const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), x);
        return values_[static_cast<std::size_t>(it - breakpoints_.begin())];
    }

    // L1 norm over the finite segments; compact support (zero tails) is the
    // caller's responsibility when a finite answer is expected.
    double l1_norm() const {
        double acc = 0.0;
        for (std::size_t k = 0; k + 1 < breakpoints_.size(); ++k)
            acc += std::abs(values_[k + 1]) * (breakpoints_[k + 1] - breakpoints_[k]);
        return acc;
    }

    double integral() const {
        double acc = 0.0;
        for (std::size_t k = 0; k + 1 < breakpoints_.size(); ++k)
            acc += values_[k + 1] * (breakpoints_[k + 1] - breakpoints_[k]);
        return acc;
    }

    // Integral over [a, b] assuming the tails vanish outside the breakpoint
    // hull (contributions from tail segments use the stored tail values).
    double integral_over(double a, double b) const {
        if (!(a <= b)) std::swap(a, b);
        double acc = 0.0;
        // Segment boundaries: (-inf, bp0), [bp0,bp1), ..., [bp_last, inf).
        for (std::size_t seg = 0; seg < values_.size(); ++seg) {
            const double lo = seg == 0 ? -std::numeric_limits<double>::infinity()
                                       : breakpoints_[seg - 1];
            const double hi = seg == breakpoints_.size()
                                  ? std::numeric_limits<double>::infinity()
                                  : breakpoints_[seg];
            const double ov_lo = std::max(lo, a), ov_hi = std::min(hi, b);
            if (ov_hi > ov_lo && values_[seg] != 0.0) acc += values_[seg] * (ov_hi - ov_lo);
        }
        return acc;
    }

    // Exact pairing with f': sum_k value_k (f(right_k) - f(left_k)) over the
    // finite segments. With zero tails this telescopes to the difference of
    // weighted eigenvalue sums, so no quadrature enters.
    std::complex<double> increment_sum(const std::function<std::complex<double>(double)>& f) const {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t k = 0; k + 1 < breakpoints_.size(); ++k)
            acc += values_[k + 1] * (f(breakpoints_[k + 1]) - f(breakpoints_[k]));
        return acc;
    }

    double max_value() const { return *std::max_element(values_.begin(), values_.end()); }
    double min_value() const { return *std::min_element(values_.begin(), values_.end()); }

  private:
    std::vector<double> breakpoints_;
    std::vector<double> values_;
};

} // namespace opcalc
