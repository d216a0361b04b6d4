#pragma once

// Synthetic broadband homodyne traces of an OPA below threshold.
//
// Every band is white Gaussian noise confined to its Fourier interval.  Two independent
// half-variance processes U_b, V_b per band carry the antisqueezed and squeezed quadrature;
// with the LO phase swept slowly the recorded current is
//     x(t) = cos(phi(t)) sum_b sqrt(Psi_+(b)) U_b(t) + sin(phi(t)) sum_b sqrt(Psi_-(b)) V_b(t),
// phi(t) = 2 pi t / T, which has the instantaneous variance V(theta) of core.hpp for every
// band.  The LO phase tagged downstream is phi(t) + theta_0, so the antisqueezed axis sits
// at theta_0.

#include "sqz/core.hpp"
#include "sqz/fft.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

namespace sqz {

struct SimSeed {
    std::uint64_t value = 1;
};

struct NoisePowers {
    double squeezed = 1.0;      ///< Psi_-
    double antisqueezed = 1.0;  ///< Psi_+
};

/// Quantum noise power spectra of the squeezed and antisqueezed quadrature of an OPA on
/// resonance, vacuum-normalized:
///     Psi_(+/-)(Omega) = Psi_0 (1 +/- xi eta 4 d / ((Omega/Gamma)^2 + (1 -/+ d)^2)).
[[nodiscard]] inline NoisePowers band_variances(const OpaParams& params, double omega) {
    params.validate();
    if (!(omega >= 0.0)) throw std::invalid_argument("band_variances: Omega must be >= 0");
    const double r = omega / params.cavity_hwhm;
    const double gain = params.efficiency() * 4.0 * params.pump;
    const double d = params.pump;
    return {params.vacuum_density * (1.0 - gain / (r * r + (1.0 + d) * (1.0 + d))),
            params.vacuum_density * (1.0 + gain / (r * r + (1.0 - d) * (1.0 - d)))};
}

namespace detail {

inline std::mt19937_64 substream(SimSeed seed, TraceKind kind, std::size_t band, unsigned quadrature) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed.value), static_cast<std::uint32_t>(seed.value >> 32),
                      static_cast<std::uint32_t>(kind), static_cast<std::uint32_t>(band), quadrature};
    return std::mt19937_64(seq);
}

/// Band-limited white noise: each band carries variance 1/2 scaled by `gain[b]` (a power).
inline std::vector<double> shaped_noise(const AcquisitionConfig& acq, const std::vector<double>& gain,
                                        SimSeed seed, TraceKind kind, unsigned quadrature) {
    const std::size_t n = acq.n_samples;
    fft::Spectrum spec(n / 2 + 1);
    const double nn = static_cast<double>(n);
    for (std::size_t b = 0; b < acq.n_bands; ++b) {
        const std::size_t lo = band_first_bin(b, n, acq.n_bands);
        const std::size_t hi = band_end_bin(b, n, acq.n_bands);
        std::size_t full_bins = 0;
        for (std::size_t k = lo; k < hi; ++k) full_bins += fft::self_conjugate(k, n) ? 1 : 2;
        if (full_bins == 0) continue;
        // With the 1/N inverse, Var(x) = sum_full E|X_k|^2 / N^2 = 1/2 per band.
        const double power = gain[b] * nn * nn / (2.0 * static_cast<double>(full_bins));
        auto rng = substream(seed, kind, b, quadrature);
        std::normal_distribution<double> normal(0.0, 1.0);
        const double sd_complex = std::sqrt(power / 2.0);
        const double sd_real = std::sqrt(power);
        for (std::size_t k = lo; k < hi; ++k) {
            if (fft::self_conjugate(k, n)) {
                spec[k] = {sd_real * normal(rng), 0.0};
            } else {
                const double re = normal(rng);
                const double im = normal(rng);
                spec[k] = {sd_complex * re, sd_complex * im};
            }
        }
    }
    return fft::inverse(spec, n);
}

inline BroadbandTrace combine_quadratures(const AcquisitionConfig& acq, const std::vector<double>& plus,
                                          const std::vector<double>& minus, SimSeed seed, TraceKind kind) {
    BroadbandTrace trace;
    trace.config = acq;
    trace.kind = kind;
    auto u = shaped_noise(acq, plus, seed, kind, 0);
    auto v = shaped_noise(acq, minus, seed, kind, 1);
    trace.samples.resize(acq.n_samples);
    for (std::size_t i = 0; i < acq.n_samples; ++i) {
        const double phi = kTwoPi * (static_cast<double>(i) / acq.sample_rate) / acq.sweep_period;
        trace.samples[i] = std::cos(phi) * u[i] + std::sin(phi) * v[i];
    }
    return trace;
}

}  // namespace detail

/// Broadband signal trace whose band b has the phase-dependent variance given by
/// `band_variances` at the band center.
[[nodiscard]] inline BroadbandTrace simulate_trace(const OpaParams& params, const AcquisitionConfig& acq,
                                                   SimSeed seed) {
    params.validate();
    acq.validate();
    std::vector<double> plus(acq.n_bands), minus(acq.n_bands);
    for (std::size_t b = 0; b < acq.n_bands; ++b) {
        const auto psi = band_variances(params, band_center(b, acq));
        plus[b] = psi.antisqueezed;
        minus[b] = psi.squeezed;
    }
    return detail::combine_quadratures(acq, plus, minus, seed, TraceKind::signal);
}

/// Shot-noise reference: every band has Psi_+/- = 1.
[[nodiscard]] inline BroadbandTrace simulate_vacuum_trace(const AcquisitionConfig& acq, SimSeed seed) {
    acq.validate();
    const std::vector<double> ones(acq.n_bands, 1.0);
    return detail::combine_quadratures(acq, ones, ones, seed, TraceKind::vacuum);
}

/// Largest phase-binned RMS of a trace (the antisqueezed quadrature for a signal trace).
[[nodiscard]] inline double antisqueezed_rms(const BroadbandTrace& trace, std::size_t phase_bins = 64) {
    std::vector<double> sum(phase_bins, 0.0);
    std::vector<std::size_t> count(phase_bins, 0);
    const auto& acq = trace.config;
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        const double t = static_cast<double>(i) / acq.sample_rate;
        const double frac = std::fmod(t / acq.sweep_period, 1.0);
        const auto bin = std::min(phase_bins - 1, static_cast<std::size_t>(frac * static_cast<double>(phase_bins)));
        sum[bin] += trace.samples[i] * trace.samples[i];
        ++count[bin];
    }
    double best = 0.0;
    for (std::size_t j = 0; j < phase_bins; ++j)
        if (count[j] > 0) best = std::max(best, sum[j] / static_cast<double>(count[j]));
    return std::sqrt(best);
}

/// Uniform mid-rise quantizer clipped at +/- full_scale.  Default full scale is five times
/// the antisqueezed RMS.
[[nodiscard]] inline BroadbandTrace apply_adc(const BroadbandTrace& trace, int bits,
                                              std::optional<double> full_scale = std::nullopt) {
    if (bits < 4 || bits > 24) throw std::invalid_argument("apply_adc: bits must lie in [4, 24]");
    const double fs = full_scale ? *full_scale : 5.0 * antisqueezed_rms(trace);
    if (!(fs > 0.0)) throw std::invalid_argument("apply_adc: full scale must be > 0");
    const double levels = std::ldexp(1.0, bits);
    const double step = 2.0 * fs / levels;
    const double max_code = levels / 2.0 - 1.0;
    BroadbandTrace out = trace;
    out.config.adc_bits = bits;
    for (double& v : out.samples) {
        const double code = std::clamp(std::floor(v / step), -levels / 2.0, max_code);
        v = (code + 0.5) * step;
    }
    return out;
}

}  // namespace sqz
