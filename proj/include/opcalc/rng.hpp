#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace opcalc {

// Deterministic standard-normal stream: mt19937_64 driving Box-Muller.
// std::normal_distribution is avoided on purpose (its draw sequence is
// implementation-defined); this stream is byte-stable for a fixed seed.
class NormalGenerator {
  public:
    static constexpr const char* name = "mt19937_64/box-muller";

    explicit NormalGenerator(std::uint64_t seed) : engine_(seed) {}

    double operator()() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // 53-bit uniforms shifted into (0,1) so the log is always finite.
        const double u1 = (static_cast<double>(engine_() >> 11) + 0.5) * 0x1p-53;
        const double u2 = (static_cast<double>(engine_() >> 11) + 0.5) * 0x1p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * M_PI * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

    std::complex<double> complex_unit_normal() {
        // Variance 1 total: 1/2 per real component.
        const double x = (*this)();
        const double y = (*this)();
        return {x * M_SQRT1_2, y * M_SQRT1_2};
    }

  private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace opcalc
