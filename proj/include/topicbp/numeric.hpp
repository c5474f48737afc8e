#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "topicbp/common.hpp"

namespace topicbp {

// Smallest value a message component may take before normalization; prevents
// topics from being absorbed to exactly zero and later causing 0/0.
inline constexpr double kMessageFloor = 1e-12;

// Digamma via the upward recurrence Psi(x) = Psi(x+1) - 1/x until x >= 6,
// then the asymptotic series. Absolute error is below 1e-11 on [0.01, 100].
inline double digamma(double x) {
    if (!(x > 0.0)) throw NumericError("digamma: nonpositive argument");
    double result = 0.0;
    while (x < 6.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // ln x - 1/(2x) - sum B_2n / (2n x^2n)
    double series = -0.5 * inv;
    series -= inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    return result + std::log(x) + series;
}

// Clamps every component to at least kMessageFloor, then normalizes to sum 1.
inline void floor_and_normalize(std::span<double> v) {
    double sum = 0.0;
    for (double& x : v) {
        if (x < kMessageFloor) x = kMessageFloor;
        sum += x;
    }
    const double inv = 1.0 / sum;
    for (double& x : v) x *= inv;
}

// Masked variant: components not listed in `allowed` are set to exactly zero;
// the floor and normalization apply to the allowed block only.
inline void floor_and_normalize_masked(std::span<double> v, std::span<const int32_t> allowed) {
    std::vector<double> kept(allowed.size());
    for (size_t i = 0; i < allowed.size(); ++i) kept[i] = v[static_cast<size_t>(allowed[i])];
    for (double& x : v) x = 0.0;
    double sum = 0.0;
    for (double& x : kept) {
        if (x < kMessageFloor) x = kMessageFloor;
        sum += x;
    }
    const double inv = 1.0 / sum;
    for (size_t i = 0; i < allowed.size(); ++i) v[static_cast<size_t>(allowed[i])] = kept[i] * inv;
}

inline double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Sample standard deviation (n-1 denominator); 0 for fewer than two points.
inline double stddev(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace topicbp
