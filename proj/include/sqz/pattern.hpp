#pragma once

// Harmonic-oscillator eigenfunctions and the pattern functions that sample density-matrix
// elements directly from (x, theta) homodyne data.
//
// Convention: psi_n(x) = (2^n n! sqrt(pi))^{-1/2} H_n(x) e^{-x^2/2}, so |psi_0|^2 = e^{-x^2}/sqrt(pi)
// and the vacuum quadrature variance is 1/2.
//
// For n <= m the pattern function is f_nm = d/dx [psi_n(x) phi_m(x)], where phi_m is the
// irregular solution of the oscillator equation at the same energy, with opposite parity to
// psi_m and Wronskian psi_m phi_m' - psi_m' phi_m = 2.  We never form psi or phi themselves:
//   h_n = psi_n e^{x^2/2}  (a polynomial, from the three-term recurrence) and
//   w_m = phi_m e^{-x^2/2}, which solves w'' + 2x w' + (2m + 2) w = 0 and decays like x^{-m-1},
// so psi_n phi_m = h_n w_m stays O(1) over the whole grid.

#include "sqz/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace sqz {

/// h_n(x) = psi_n(x) e^{x^2/2} for n = 0..n_max.
inline void hermite_scaled(double x, std::span<double> h) {
    if (h.empty()) return;
    h[0] = 1.0 / std::sqrt(std::sqrt(kPi));
    if (h.size() > 1) h[1] = std::sqrt(2.0) * x * h[0];
    for (std::size_t n = 2; n < h.size(); ++n) {
        const double nn = static_cast<double>(n);
        h[n] = (std::sqrt(2.0) * x * h[n - 1] - std::sqrt(nn - 1.0) * h[n - 2]) / std::sqrt(nn);
    }
}

/// psi_n sampled on `x`.  The recurrence runs on the Gaussian-free polynomial part, with a
/// running power-of-two rescale, so neither overflow nor premature underflow occurs.
[[nodiscard]] inline std::vector<double> oscillator_wavefunction(std::size_t n, std::span<const double> x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        if (!std::isfinite(xi)) throw std::invalid_argument("oscillator_wavefunction: non-finite grid point");
        double prev = 0.0;
        double cur = 1.0 / std::sqrt(std::sqrt(kPi));
        int exponent = 0;
        for (std::size_t k = 1; k <= n; ++k) {
            const double kk = static_cast<double>(k);
            const double next = (std::sqrt(2.0) * xi * cur - std::sqrt(kk - 1.0) * prev) / std::sqrt(kk);
            prev = cur;
            cur = next;
            if (std::abs(cur) > 0x1p500) {
                cur = std::ldexp(cur, -500);
                prev = std::ldexp(prev, -500);
                exponent += 500;
            }
        }
        // log2 of the Gaussian factor, folded with the rescale exponent.
        const double log2_gauss = -0.5 * xi * xi / std::log(2.0);
        out[i] = std::ldexp(cur * std::exp2(log2_gauss - std::floor(log2_gauss)),
                            exponent + static_cast<int>(std::floor(log2_gauss)));
    }
    return out;
}

[[nodiscard]] inline double oscillator_wavefunction(std::size_t n, double x) {
    return oscillator_wavefunction(n, std::span<const double>(&x, 1))[0];
}

namespace detail {

/// w_m = phi_m e^{-x^2/2} and its derivative at the sorted non-negative abscissae `r`,
/// integrated outward from 0 with classical RK4.
inline void irregular_scaled(std::size_t m, std::span<const double> r, std::span<double> w, std::span<double> dw,
                             double max_step = 1e-3) {
    // Initial conditions from parity and the Wronskian (= 2) at x = 0.
    std::vector<double> h0(m + 2);
    hermite_scaled(0.0, h0);
    double y = 0.0;
    double dy = 0.0;
    if (m % 2 == 0) {
        dy = 2.0 / h0[m];  // psi_m(0) = h_m(0)
    } else {
        const double dpsi = std::sqrt(2.0 * static_cast<double>(m)) * h0[m - 1];  // psi_m'(0)
        y = -2.0 / dpsi;
    }
    const double c = 2.0 * static_cast<double>(m) + 2.0;
    const auto accel = [c](double x, double yy, double dyy) { return -2.0 * x * dyy - c * yy; };
    double x = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double target = r[i];
        const double span = target - x;
        const auto steps = static_cast<std::size_t>(std::ceil(span / max_step));
        if (steps > 0) {
            const double h = span / static_cast<double>(steps);
            for (std::size_t s = 0; s < steps; ++s) {
                const double k1y = dy, k1v = accel(x, y, dy);
                const double k2y = dy + 0.5 * h * k1v, k2v = accel(x + 0.5 * h, y + 0.5 * h * k1y, k2y);
                const double k3y = dy + 0.5 * h * k2v, k3v = accel(x + 0.5 * h, y + 0.5 * h * k2y, k3y);
                const double k4y = dy + h * k3v, k4v = accel(x + h, y + h * k3y, k4y);
                y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
                dy += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
                x += h;
            }
            x = target;
        }
        w[i] = y;
        dw[i] = dy;
    }
}

}  // namespace detail

/// Pattern functions f_nm (n <= m <= n_max) and their derivatives tabulated on a uniform grid,
/// evaluated elsewhere by cubic Hermite interpolation.  Storage is point-major so one sample
/// touches a handful of contiguous rows.
class PatternKernel {
public:
    PatternKernel() = default;

    [[nodiscard]] std::size_t n_max() const noexcept { return n_max_; }
    [[nodiscard]] const UniformAxis& axis() const noexcept { return axis_; }
    [[nodiscard]] std::size_t pair_count() const noexcept { return pairs_; }

    [[nodiscard]] static std::size_t pair_index(std::size_t n, std::size_t m) noexcept {
        if (n > m) std::swap(n, m);
        return m * (m + 1) / 2 + n;
    }

    /// Tabulated value at grid node i.
    [[nodiscard]] double node(std::size_t n, std::size_t m, std::size_t i) const {
        return values_[i * pairs_ + pair_index(n, m)];
    }

    [[nodiscard]] bool covers(double x) const noexcept { return x >= axis_.lo && x <= axis_.hi; }

    /// Interpolation weights for one abscissa, reusable across all (n, m).
    struct Stencil {
        std::size_t i = 0;
        double a0 = 0, b0 = 0, a1 = 0, b1 = 0;
    };

    [[nodiscard]] Stencil stencil(double x) const {
        const double h = axis_.step();
        double pos = (x - axis_.lo) / h;
        auto i = static_cast<std::size_t>(std::clamp(std::floor(pos), 0.0, static_cast<double>(axis_.points - 2)));
        const double t = pos - static_cast<double>(i);
        const double t2 = t * t, t3 = t2 * t;
        return {i, 2 * t3 - 3 * t2 + 1, (t3 - 2 * t2 + t) * h, -2 * t3 + 3 * t2, (t3 - t2) * h};
    }

    [[nodiscard]] double eval(const Stencil& s, std::size_t pair) const {
        const std::size_t r0 = s.i * pairs_ + pair;
        const std::size_t r1 = r0 + pairs_;
        return s.a0 * values_[r0] + s.b0 * slopes_[r0] + s.a1 * values_[r1] + s.b1 * slopes_[r1];
    }

    /// Writes f_nm(x) for every pair (packed upper triangle) into `out`.
    void eval_all(const Stencil& s, std::span<double> out) const {
        const double* v0 = &values_[s.i * pairs_];
        const double* d0 = &slopes_[s.i * pairs_];
        const double* v1 = v0 + pairs_;
        const double* d1 = d0 + pairs_;
        for (std::size_t p = 0; p < pairs_; ++p) out[p] = s.a0 * v0[p] + s.b0 * d0[p] + s.a1 * v1[p] + s.b1 * d1[p];
    }

    [[nodiscard]] double operator()(std::size_t n, std::size_t m, double x) const {
        if (!covers(x)) throw std::out_of_range("PatternKernel: x outside tabulated span");
        return eval(stencil(x), pair_index(n, m));
    }

    /// Minimum half-width of a grid for truncation n_max.
    [[nodiscard]] static double required_half_width(std::size_t n_max, double margin = 2.0) {
        return std::sqrt(2.0 * static_cast<double>(n_max) + 1.0) + margin;
    }

    friend PatternKernel pattern_kernel(std::size_t n_max, const UniformAxis& axis, double margin);

private:
    std::size_t n_max_ = 0;
    std::size_t pairs_ = 0;
    UniformAxis axis_;
    std::vector<double> values_;
    std::vector<double> slopes_;
};

/// Builds f_nm for 0 <= n <= m <= n_max on `axis`.  The axis must extend past the classical
/// turning point of the highest level by `margin`.
[[nodiscard]] inline PatternKernel pattern_kernel(std::size_t n_max, const UniformAxis& axis, double margin = 2.0) {
    if (axis.points < 2 || !(axis.hi > axis.lo)) throw std::invalid_argument("pattern_kernel: degenerate grid");
    const double need = PatternKernel::required_half_width(n_max, margin);
    if (axis.lo > -need || axis.hi < need)
        throw std::invalid_argument("pattern_kernel: grid [" + std::to_string(axis.lo) + ", " + std::to_string(axis.hi) +
                                    "] too narrow for n_max = " + std::to_string(n_max) + "; need |x| up to " +
                                    std::to_string(need));
    PatternKernel k;
    k.n_max_ = n_max;
    k.axis_ = axis;
    k.pairs_ = (n_max + 1) * (n_max + 2) / 2;
    k.values_.assign(axis.points * k.pairs_, 0.0);
    k.slopes_.assign(axis.points * k.pairs_, 0.0);

    // Integrate w_m once along the sorted distinct |x| and map back by parity.
    std::vector<double> absx(axis.points);
    for (std::size_t i = 0; i < axis.points; ++i) absx[i] = std::abs(axis[i]);
    std::vector<double> r = absx;
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    std::vector<std::size_t> where(axis.points);
    for (std::size_t i = 0; i < axis.points; ++i)
        where[i] = static_cast<std::size_t>(std::lower_bound(r.begin(), r.end(), absx[i]) - r.begin());

    std::vector<std::vector<double>> w(n_max + 1, std::vector<double>(r.size()));
    std::vector<std::vector<double>> dw(n_max + 1, std::vector<double>(r.size()));
    for (std::size_t m = 0; m <= n_max; ++m) detail::irregular_scaled(m, r, w[m], dw[m]);

    std::vector<double> h(n_max + 1);
    for (std::size_t i = 0; i < axis.points; ++i) {
        const double x = axis[i];
        hermite_scaled(x, h);
        const bool negative = x < 0.0;
        for (std::size_t m = 0; m <= n_max; ++m) {
            // w_m has parity (-1)^{m+1}, its derivative (-1)^m.
            double wm = w[m][where[i]];
            double dwm = dw[m][where[i]];
            if (negative) {
                if (m % 2 == 0) wm = -wm;
                else dwm = -dwm;
            }
            const double ddwm = -2.0 * x * dwm - (2.0 * static_cast<double>(m) + 2.0) * wm;
            for (std::size_t n = 0; n <= m; ++n) {
                const double nn = static_cast<double>(n);
                const double dh = n >= 1 ? std::sqrt(2.0 * nn) * h[n - 1] : 0.0;
                const double ddh = n >= 2 ? 2.0 * std::sqrt(nn * (nn - 1.0)) * h[n - 2] : 0.0;
                const std::size_t idx = i * k.pairs_ + PatternKernel::pair_index(n, m);
                k.values_[idx] = dh * wm + h[n] * dwm;
                k.slopes_[idx] = ddh * wm + 2.0 * dh * dwm + h[n] * ddwm;
            }
        }
    }
    return k;
}

}  // namespace sqz
