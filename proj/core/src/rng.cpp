#include "spde/rng.hpp"

#include <cmath>

namespace spde {

namespace {

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline void philox_round(std::array<std::uint32_t, 4>& c, const std::array<std::uint32_t, 2>& k) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(Philox4x32::mult_a, c[0], hi0, lo0);
    mulhilo(Philox4x32::mult_b, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

} // namespace

std::array<std::uint32_t, 4> Philox4x32::block(std::array<std::uint32_t, 4> counter,
                                               std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += weyl_a;
            key[1] += weyl_b;
        }
        philox_round(counter, key);
    }
    return counter;
}

double uniform01_from_bits(std::uint64_t bits) {
    // For the topmost 53-bit value, r + 0.5 is a round-to-even tie that lands
    // on 2^53 and would map to exactly 1.0; clamp that single case back into
    // the open interval so the inverse CDF never sees an endpoint.
    const double u = (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
    return u < 1.0 ? u : 1.0 - 0x1.0p-53;
}

double inverse_normal_cdf(double p) {
    // Acklam's piecewise rational approximation (abs error ~1e-9 on its own).
    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // One Halley refinement against the exact CDF expressed through erfc brings
    // the result to (near) machine precision.
    static const double sqrt_half = std::sqrt(0.5);
    static const double sqrt_two_pi = std::sqrt(8.0 * std::atan(1.0));
    const double e = 0.5 * std::erfc(-x * sqrt_half) - p;
    const double u = e * sqrt_two_pi * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

double normal_from_bits(std::uint64_t bits) {
    return inverse_normal_cdf(uniform01_from_bits(bits));
}

double gaussian_at(std::uint64_t seed, std::uint32_t sample, std::uint32_t step,
                   std::uint32_t mode, std::uint32_t domain) {
    const std::array<std::uint32_t, 4> ctr = {sample, step, mode, domain};
    const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed),
                                              static_cast<std::uint32_t>(seed >> 32)};
    const auto words = Philox4x32::block(ctr, key);
    const std::uint64_t bits = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
    return normal_from_bits(bits);
}

std::uint64_t CounterRng::next_u64() {
    if (has_pending_) {
        has_pending_ = false;
        return pending_;
    }
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(block_index_), static_cast<std::uint32_t>(block_index_ >> 32),
        static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
    const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                              static_cast<std::uint32_t>(seed_ >> 32)};
    const auto words = Philox4x32::block(ctr, key);
    ++block_index_;
    pending_ = (static_cast<std::uint64_t>(words[2]) << 32) | words[3];
    has_pending_ = true;
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

double CounterRng::uniform01() { return uniform01_from_bits(next_u64()); }

double CounterRng::normal() { return inverse_normal_cdf(uniform01()); }

double CounterRng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

} // namespace spde
