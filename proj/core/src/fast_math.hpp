#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>

namespace pecan::detail {

/**
 * exp(x) for x <= 0, written so the compiler can vectorize loops calling it
 * (needs -fno-trapping-math -fno-math-errno). Range reduction by ln 2 with a
 * two-part constant, then a degree-13 Taylor polynomial. Relative error is a
 * few ulp; inputs below -700 are clamped.
 */
inline double exp_nonpos(double x) noexcept {
    x = x < -700.0 ? -700.0 : x;
    const double kf = std::nearbyint(x * 1.4426950408889634);
    double f = x - kf * 6.93147180369123816490e-01;
    f = f - kf * 1.90821492927058770002e-10;
    double p = 1.0 / 6227020800.0;
    p = p * f + 1.0 / 479001600.0;
    p = p * f + 1.0 / 39916800.0;
    p = p * f + 1.0 / 3628800.0;
    p = p * f + 1.0 / 362880.0;
    p = p * f + 1.0 / 40320.0;
    p = p * f + 1.0 / 5040.0;
    p = p * f + 1.0 / 720.0;
    p = p * f + 1.0 / 120.0;
    p = p * f + 1.0 / 24.0;
    p = p * f + 1.0 / 6.0;
    p = p * f + 0.5;
    p = p * f + 1.0;
    p = p * f + 1.0;
    const std::int64_t bits = (static_cast<std::int64_t>(kf) + 1023) << 52;
    double scale;
    std::memcpy(&scale, &bits, sizeof scale);
    return p * scale;
}

inline double fast_tanh(double y) noexcept {
    const double t = exp_nonpos(-2.0 * std::fabs(y));
    return std::copysign((1.0 - t) / (1.0 + t), y);
}

/// Single-precision exp for x <= 0: degree-7 Taylor after the same reduction, about 1e-7 relative.
inline float exp_nonpos(float x) noexcept {
    x = x < -87.0f ? -87.0f : x;
    const float kf = std::nearbyint(x * 1.44269504f);
    const float f = x - kf * 0.693147181f;
    float p = 1.0f / 5040.0f;
    p = p * f + 1.0f / 720.0f;
    p = p * f + 1.0f / 120.0f;
    p = p * f + 1.0f / 24.0f;
    p = p * f + 1.0f / 6.0f;
    p = p * f + 0.5f;
    p = p * f + 1.0f;
    p = p * f + 1.0f;
    const std::int32_t bits = (static_cast<std::int32_t>(kf) + 127) << 23;
    float scale;
    std::memcpy(&scale, &bits, sizeof scale);
    return p * scale;
}

inline float fast_tanh(float y) noexcept {
    const float t = exp_nonpos(-2.0f * std::fabs(y));
    return std::copysign((1.0f - t) / (1.0f + t), y);
}

/**
 * Sum in a fixed order: 16 interleaved partial sums folded pairwise. This
 * breaks the serial dependency of a running sum while staying deterministic.
 */
template <class T>
inline T lane_sum(const T* v, std::size_t n) noexcept {
    constexpr std::size_t L = 16;
    T part[L] = {};
    std::size_t m = 0;
    for (; m + L <= n; m += L)
        for (std::size_t l = 0; l < L; ++l) part[l] += v[m + l];
    for (std::size_t l = 0; m + l < n; ++l) part[l] += v[m + l];
    for (std::size_t w = L / 2; w > 0; w /= 2)
        for (std::size_t l = 0; l < w; ++l) part[l] += part[l + w];
    return part[0];
}

} // namespace pecan::detail
