#pragma once

// Small statistics and data helpers shared by the test suites.

#include "sqz/core.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace testing_support {

inline double mean(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

inline double variance(std::span<const double> x) {
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

inline double mean_square(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s / static_cast<double>(x.size());
}

inline double percentile(std::vector<double> x, double q) {
    std::sort(x.begin(), x.end());
    const double pos = q * static_cast<double>(x.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    if (i + 1 >= x.size()) return x.back();
    return x[i] + (pos - static_cast<double>(i)) * (x[i + 1] - x[i]);
}

/// Two-sample Kolmogorov-Smirnov statistic and its asymptotic p-value.
struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double ne = na * nb / (na + nb);
    const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
    double p = 0.0;
    for (int k = 1; k <= 100; ++k) p += 2.0 * (k % 2 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    return {d, std::clamp(p, 0.0, 1.0)};
}

/// Independent samples of a zero-mean Gaussian quadrature with phase-dependent variance
/// 1/2 [plus cos^2(theta - axis) + minus sin^2(theta - axis)], theta on a uniform grid.
inline sqz::QuadratureSamples gaussian_samples(std::size_t n, double psi_minus, double psi_plus, double axis,
                                               std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    sqz::QuadratureSamples q;
    q.x.resize(n);
    q.theta.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double th = sqz::kTwoPi * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
        const double c = std::cos(th - axis), s = std::sin(th - axis);
        q.theta[i] = th;
        q.x[i] = std::sqrt(0.5 * (psi_plus * c * c + psi_minus * s * s)) * normal(rng);
    }
    return q;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace testing_support
