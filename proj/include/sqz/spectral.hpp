#pragma once

// Fourier band split of a broadband trace, vacuum calibration and phase tagging.

#include "sqz/core.hpp"
#include "sqz/fft.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace sqz {

struct BandOptions {
    /// Width (in bins) of a raised-cosine crossfade at interior band edges; 0 = brick wall.
    std::size_t taper_bins = 0;
};

namespace detail {

/// Weight of band b at bin k.  The weights of all bands sum to one at every bin.
inline double band_weight(std::size_t b, std::size_t k, std::size_t n, std::size_t n_bands, std::size_t taper) {
    const std::size_t lo = band_first_bin(b, n, n_bands);
    const std::size_t hi = band_end_bin(b, n, n_bands);
    if (taper == 0) return (k >= lo && k < hi) ? 1.0 : 0.0;
    // Crossfade centered on each interior boundary e: rises over [e - w/2, e + w/2).
    const auto ramp = [&](std::size_t edge) {
        const double pos = (static_cast<double>(k) + 0.5 - static_cast<double>(edge)) / static_cast<double>(taper);
        if (pos <= -0.5) return 0.0;
        if (pos >= 0.5) return 1.0;
        return 0.5 * (1.0 + std::sin(kPi * pos));
    };
    const double up = b == 0 ? 1.0 : ramp(lo);
    const double down = b + 1 == n_bands ? 0.0 : ramp(hi);
    return up - down;
}

inline double mean_square(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

}  // namespace detail

/// Splits a real trace into n_bands real traces by masking its spectrum to equal Fourier
/// intervals (DC in band 0, Nyquist in the last band).  The outputs sum to the input.
[[nodiscard]] inline std::vector<std::vector<double>> band_decompose(std::span<const double> trace, std::size_t n_bands,
                                                                      const BandOptions& opt = {}) {
    const std::size_t n = trace.size();
    if (n_bands < 1) throw std::invalid_argument("band_decompose: n_bands must be >= 1");
    if (n < 2 * n_bands) throw std::invalid_argument("band_decompose: need n_samples >= 2 * n_bands");
    const auto spectrum = fft::forward(trace);
    std::vector<std::vector<double>> bands(n_bands);
    fft::Spectrum masked(spectrum.size());
    for (std::size_t b = 0; b < n_bands; ++b) {
        std::fill(masked.begin(), masked.end(), std::complex<double>{});
        for (std::size_t k = 0; k < spectrum.size(); ++k) {
            const double w = detail::band_weight(b, k, n, n_bands, opt.taper_bins);
            if (w != 0.0) masked[k] = w * spectrum[k];
        }
        bands[b] = fft::inverse(masked, n);
    }
    return bands;
}

[[nodiscard]] inline std::vector<std::vector<double>> band_decompose(const BroadbandTrace& trace, std::size_t n_bands,
                                                                      const BandOptions& opt = {}) {
    return band_decompose(std::span<const double>(trace.samples), n_bands, opt);
}

struct FlattenOptions {
    std::size_t window_bins = 64;
    double floor = 1e-6;  ///< relative to the median vacuum amplitude
    /// The calibration is a noise record: correct the K/(K-1) bias of dividing by a K-bin mean
    /// of exponentially distributed powers.  Not applied when a trace is flattened by itself.
    bool noise_calibration = true;
};

struct FlattenedTrace {
    BroadbandTrace trace;
    std::vector<std::size_t> excluded_bins;
};

/// Divides the signal spectrum by the smoothed vacuum amplitude spectrum.  The result is in
/// vacuum units: a vacuum trace flattened by itself has every band at variance 1/2.
[[nodiscard]] inline FlattenedTrace spectral_flatten(const BroadbandTrace& signal, const BroadbandTrace& vacuum,
                                                     const FlattenOptions& opt = {}) {
    if (signal.samples.size() != vacuum.samples.size() ||
        signal.config.sample_rate != vacuum.config.sample_rate)
        throw DataError("spectral_flatten: signal and vacuum acquisition do not match");
    if (opt.window_bins == 0) throw std::invalid_argument("spectral_flatten: window must be >= 1");
    const std::size_t n = signal.samples.size();
    auto s = fft::forward(signal.samples);
    const auto v = fft::forward(vacuum.samples);
    const std::size_t nb = v.size();

    std::vector<double> power(nb);
    for (std::size_t k = 0; k < nb; ++k) power[k] = std::norm(v[k]);
    // Centered moving average via prefix sums; near the ends the window slides inward.
    std::vector<double> prefix(nb + 1, 0.0);
    for (std::size_t k = 0; k < nb; ++k) prefix[k + 1] = prefix[k] + power[k];
    const std::size_t width = std::min(opt.window_bins, nb);
    const bool self = &signal == &vacuum || signal.samples == vacuum.samples;
    const double dof = opt.noise_calibration && !self && width > 1 ? static_cast<double>(width - 1) : static_cast<double>(width);
    std::vector<double> amp(nb);
    for (std::size_t k = 0; k < nb; ++k) {
        std::size_t lo = k >= width / 2 ? k - width / 2 : 0;
        if (lo + width > nb) lo = nb - width;
        amp[k] = std::sqrt((prefix[lo + width] - prefix[lo]) / dof);
    }
    auto sorted = amp;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(nb / 2), sorted.end());
    const double floor = opt.floor * sorted[nb / 2];

    const double reference = std::sqrt(static_cast<double>(n) * static_cast<double>(signal.config.n_bands) / 2.0);
    FlattenedTrace out;
    for (std::size_t k = 0; k < nb; ++k) {
        if (!(amp[k] > floor)) {
            s[k] = 0.0;
            out.excluded_bins.push_back(k);
        } else {
            s[k] *= reference / amp[k];
        }
    }
    out.trace.config = signal.config;
    out.trace.kind = signal.kind;
    out.trace.samples = fft::inverse(s, n);
    return out;
}

/// Pairs each sample with the LO phase theta_i = mod(2 pi t_i / T + theta_0, 2 pi).
[[nodiscard]] inline QuadratureSamples attach_phase(std::vector<double> band_trace, const AcquisitionConfig& acq,
                                                    std::size_t band_index = 0) {
    if (!(acq.sweep_period > 0.0)) throw std::invalid_argument("attach_phase: sweep period must be > 0");
    QuadratureSamples q;
    q.band_index = band_index;
    q.center_frequency = band_index < acq.n_bands ? band_center(band_index, acq) : 0.0;
    q.theta.resize(band_trace.size());
    for (std::size_t i = 0; i < band_trace.size(); ++i) {
        const double t = static_cast<double>(i) / acq.sample_rate;
        double th = std::fmod(kTwoPi * t / acq.sweep_period + acq.phase_offset, kTwoPi);
        if (th < 0.0) th += kTwoPi;
        q.theta[i] = th;
    }
    q.x = std::move(band_trace);
    return q;
}

/// Scales band samples so the matching vacuum band has variance 1/2.
[[nodiscard]] inline QuadratureSamples normalize_by_vacuum(QuadratureSamples signal, std::span<const double> vacuum_band,
                                                           double* scale_out = nullptr) {
    const double var = detail::mean_square(vacuum_band);
    if (!(var > 1e-300) || !std::isfinite(var))
        throw NumericError("vacuum calibration failed for band " + std::to_string(signal.band_index) +
                           ": vacuum variance is zero");
    const double scale = std::sqrt(0.5 / var);
    for (double& v : signal.x) v *= scale;
    if (scale_out) *scale_out = scale;
    return signal;
}

struct BandRecord {
    QuadratureSamples samples;
    bool discarded = false;
    double vacuum_variance = 0.0;  ///< raw (uncalibrated) vacuum band variance
    double scale = 1.0;
};

struct BandDecomposition {
    std::vector<BandRecord> bands;
    AcquisitionConfig config;

    [[nodiscard]] std::size_t active_count() const {
        return static_cast<std::size_t>(std::count_if(bands.begin(), bands.end(), [](const auto& b) { return !b.discarded; }));
    }
};

/// Band-split the signal and the vacuum trace, calibrate each band against vacuum and tag phases.
[[nodiscard]] inline BandDecomposition decompose(const BroadbandTrace& signal, const BroadbandTrace& vacuum,
                                                 const BandOptions& opt = {}) {
    if (signal.samples.size() != vacuum.samples.size() || signal.config.sample_rate != vacuum.config.sample_rate)
        throw DataError("decompose: signal and vacuum acquisition do not match");
    const auto& acq = signal.config;
    auto sig_bands = band_decompose(signal, acq.n_bands, opt);
    auto vac_bands = band_decompose(vacuum, acq.n_bands, opt);
    BandDecomposition dec;
    dec.config = acq;
    dec.bands.resize(acq.n_bands);
    for (std::size_t b = 0; b < acq.n_bands; ++b) {
        auto& rec = dec.bands[b];
        rec.vacuum_variance = detail::mean_square(vac_bands[b]);
        rec.samples = normalize_by_vacuum(attach_phase(std::move(sig_bands[b]), acq, b), vac_bands[b], &rec.scale);
        vac_bands[b].clear();
        vac_bands[b].shrink_to_fit();
    }
    return dec;
}

/// Flags band 0 (low-frequency excess noise) as discarded and drops its samples.
[[nodiscard]] inline BandDecomposition discard_low_band(BandDecomposition dec) {
    if (dec.bands.size() < 2) throw std::invalid_argument("discard_low_band: need at least 2 bands");
    dec.bands[0].discarded = true;
    dec.bands[0].samples.x.clear();
    dec.bands[0].samples.theta.clear();
    dec.bands[0].samples.x.shrink_to_fit();
    dec.bands[0].samples.theta.shrink_to_fit();
    return dec;
}

/// Per-phase-bin sample counts and second moments; bins are [j, j+1) * 2 pi / n_bins.
struct PhaseBinnedMoments {
    std::vector<std::size_t> counts;
    std::vector<double> sum_squares;

    [[nodiscard]] std::size_t bins() const noexcept { return counts.size(); }
    [[nodiscard]] double variance(std::size_t j) const {
        return counts[j] ? sum_squares[j] / static_cast<double>(counts[j]) : 0.0;
    }
    [[nodiscard]] double center(std::size_t j) const {
        return kTwoPi * (static_cast<double>(j) + 0.5) / static_cast<double>(bins());
    }
    [[nodiscard]] std::size_t min_count() const { return *std::min_element(counts.begin(), counts.end()); }
};

[[nodiscard]] inline PhaseBinnedMoments phase_binned_moments(std::span<const double> x, std::span<const double> theta,
                                                             std::size_t n_bins) {
    if (x.size() != theta.size()) throw std::invalid_argument("phase_binned_moments: length mismatch");
    if (n_bins == 0) throw std::invalid_argument("phase_binned_moments: need at least one bin");
    PhaseBinnedMoments m{std::vector<std::size_t>(n_bins, 0), std::vector<double>(n_bins, 0.0)};
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto j = phase_bin(theta[i], n_bins);
        ++m.counts[j];
        m.sum_squares[j] += x[i] * x[i];
    }
    return m;
}

}  // namespace sqz
