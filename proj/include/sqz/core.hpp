#pragma once

// Shared domain types and unit conventions.
//
// Quadratures follow x_theta = (a^dag e^{i theta} + a e^{-i theta}) / sqrt(2), so the
// vacuum has Var(x) = 1/2.  Spectral noise powers Psi are vacuum-normalized (Psi_0 = 1).
// The variance of a band at local-oscillator phase theta is
//     V(theta) = 1/2 [Psi_+ cos^2(theta - theta_0) + Psi_- sin^2(theta - theta_0)].

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sqz {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Malformed or inconsistent input data (trace files, configs, mismatched shapes).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical procedure failed (non-convergence, singular calibration, ...).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Physical OPA model parameters.
struct OpaParams {
    double pump = std::sqrt(0.5);                  ///< d = sqrt(P / P_th), below threshold: d < 1
    double cavity_hwhm = kTwoPi * 17.5e6;          ///< Gamma, rad/s
    double escape_efficiency = 0.88;               ///< xi
    double detection_efficiency = 0.7 / 0.88;      ///< eta
    double vacuum_density = 1.0;                   ///< Psi_0, fixed to 1

    [[nodiscard]] double efficiency() const noexcept { return escape_efficiency * detection_efficiency; }

    /// Parameters with a given overall efficiency xi*eta (xi kept at 1).
    [[nodiscard]] static OpaParams with_efficiency(double d, double xi_eta, double gamma) {
        OpaParams p;
        p.pump = d;
        p.cavity_hwhm = gamma;
        p.escape_efficiency = 1.0;
        p.detection_efficiency = xi_eta;
        return p;
    }

    void validate() const {
        if (!(pump >= 0.0)) throw std::invalid_argument("pump parameter must be >= 0");
        if (!(pump < 1.0)) throw std::domain_error("pump parameter d >= 1: OPA above threshold");
        if (!(cavity_hwhm > 0.0)) throw std::invalid_argument("cavity linewidth must be > 0");
        if (!(escape_efficiency > 0.0 && escape_efficiency <= 1.0))
            throw std::invalid_argument("escape efficiency must lie in (0, 1]");
        if (!(detection_efficiency >= 0.0 && detection_efficiency <= 1.0))
            throw std::invalid_argument("detection efficiency must lie in [0, 1]");
        if (efficiency() > 1.0) throw std::invalid_argument("xi*eta must be <= 1");
    }
};

struct AcquisitionConfig {
    double sample_rate = 60e6;       ///< samples/s
    std::size_t n_samples = 1u << 19;
    double sweep_period = 8e-3;      ///< s for one 2 pi sweep of the LO phase
    double phase_offset = 0.0;       ///< LO phase at t = 0, rad
    std::optional<int> adc_bits;     ///< nullopt: no quantization
    std::size_t n_bands = 16;

    [[nodiscard]] double band_width() const noexcept {
        return sample_rate / 2.0 / static_cast<double>(n_bands);
    }
    [[nodiscard]] double duration() const noexcept {
        return static_cast<double>(n_samples) / sample_rate;
    }

    void validate() const {
        if (!(sample_rate > 0.0)) throw std::invalid_argument("sample_rate must be > 0");
        if (!(sweep_period > 0.0)) throw std::invalid_argument("sweep period must be > 0");
        if (n_bands < 2) throw std::invalid_argument("n_bands must be >= 2");
        if (n_samples < 2 * n_bands) throw std::invalid_argument("n_samples must be >= 2 * n_bands");
        if (duration() < sweep_period)
            throw std::invalid_argument("trace does not cover a full 2 pi phase sweep");
        if (adc_bits && (*adc_bits < 4 || *adc_bits > 24))
            throw std::invalid_argument("adc_bits must lie in [4, 24]");
    }

    friend bool operator==(const AcquisitionConfig&, const AcquisitionConfig&) = default;
};

enum class TraceKind : std::uint8_t { signal = 0, vacuum = 1 };

struct BroadbandTrace {
    std::vector<double> samples;
    AcquisitionConfig config;
    TraceKind kind = TraceKind::signal;

    void validate() const {
        if (samples.size() != config.n_samples)
            throw DataError("trace length " + std::to_string(samples.size()) + " != n_samples " +
                            std::to_string(config.n_samples));
        for (double v : samples)
            if (!std::isfinite(v)) throw DataError("trace contains non-finite samples");
    }
};

/// Phase-tagged quadrature samples of one spectral band.
struct QuadratureSamples {
    std::size_t band_index = 0;
    double center_frequency = 0.0;   ///< Omega, rad/s
    std::vector<double> x;
    std::vector<double> theta;       ///< rad, in [0, 2 pi)

    [[nodiscard]] std::size_t size() const noexcept { return x.size(); }
};

/// Truncated Fock-basis density matrix, row-major (n, m) for 0 <= n, m <= n_max.
class DensityMatrix {
public:
    DensityMatrix() = default;
    explicit DensityMatrix(std::size_t n_max) : n_max_(n_max), data_((n_max + 1) * (n_max + 1)) {}

    [[nodiscard]] std::size_t n_max() const noexcept { return n_max_; }
    [[nodiscard]] std::size_t dim() const noexcept { return n_max_ + 1; }

    std::complex<double>& operator()(std::size_t n, std::size_t m) { return data_[n * dim() + m]; }
    const std::complex<double>& operator()(std::size_t n, std::size_t m) const { return data_[n * dim() + m]; }

    [[nodiscard]] double trace() const {
        double t = 0.0;
        for (std::size_t n = 0; n < dim(); ++n) t += (*this)(n, n).real();
        return t;
    }

    [[nodiscard]] double hermiticity_error() const {
        double e = 0.0;
        for (std::size_t n = 0; n < dim(); ++n)
            for (std::size_t m = 0; m < dim(); ++m)
                e = std::max(e, std::abs((*this)(n, m) - std::conj((*this)(m, n))));
        return e;
    }

    /// rho <- (rho + rho^dag) / 2; diagonal becomes exactly real.
    void symmetrize() {
        for (std::size_t n = 0; n < dim(); ++n) {
            (*this)(n, n) = {(*this)(n, n).real(), 0.0};
            for (std::size_t m = n + 1; m < dim(); ++m) {
                const auto avg = 0.5 * ((*this)(n, m) + std::conj((*this)(m, n)));
                (*this)(n, m) = avg;
                (*this)(m, n) = std::conj(avg);
            }
        }
    }

    [[nodiscard]] std::vector<double> diagonal() const {
        std::vector<double> d(dim());
        for (std::size_t n = 0; n < dim(); ++n) d[n] = (*this)(n, n).real();
        return d;
    }

    /// Fock-state projector |k><k|.
    [[nodiscard]] static DensityMatrix fock(std::size_t k, std::size_t n_max) {
        DensityMatrix rho(n_max);
        rho(k, k) = 1.0;
        return rho;
    }

private:
    std::size_t n_max_ = 0;
    std::vector<std::complex<double>> data_;
};

/// Uniform 1-D grid [lo, hi] with `points` nodes.
struct UniformAxis {
    double lo = -1.0;
    double hi = 1.0;
    std::size_t points = 2;

    [[nodiscard]] double step() const noexcept { return (hi - lo) / static_cast<double>(points - 1); }
    [[nodiscard]] double operator[](std::size_t i) const noexcept { return lo + step() * static_cast<double>(i); }

    [[nodiscard]] static UniformAxis symmetric(double half_width, std::size_t points) {
        return {-half_width, half_width, points};
    }
};

/// Wigner quasiprobability on a rectangular (q, p) grid; values row-major [ip][iq].
struct WignerGrid {
    UniformAxis q_axis;
    UniformAxis p_axis;
    std::vector<double> values;

    [[nodiscard]] double at(std::size_t iq, std::size_t ip) const { return values[ip * q_axis.points + iq]; }
    double& at(std::size_t iq, std::size_t ip) { return values[ip * q_axis.points + iq]; }

    /// Riemann sum times cell area.
    [[nodiscard]] double integral() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s * q_axis.step() * p_axis.step();
    }
    [[nodiscard]] double max_abs() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }
};

struct SpectrumPoint {
    std::size_t band_index = 0;
    double omega = 0.0;    ///< rad/s
    double v_min = 1.0;    ///< vacuum = 1
    double v_max = 1.0;
    double raw_bin_min = 1.0;   ///< plain minimum over phase bins
    double raw_bin_max = 1.0;
    bool flagged = false;  ///< a phase bin had too few samples
};

struct SqueezingSpectrum {
    std::vector<SpectrumPoint> points;
};

/// 10 log10(v).  Throws std::domain_error for v <= 0.
[[nodiscard]] inline double to_decibel(double v) {
    if (!(v > 0.0)) throw std::domain_error("to_decibel: ratio must be positive");
    return 10.0 * std::log10(v);
}

[[nodiscard]] inline double from_decibel(double db) { return std::pow(10.0, db / 10.0); }

/// Center of a spectral band as angular frequency: (b + 1/2) * band_width * 2 pi.
[[nodiscard]] inline double band_center(std::size_t band_index, const AcquisitionConfig& config) {
    if (band_index >= config.n_bands)
        throw std::out_of_range("band index " + std::to_string(band_index) + " outside [0, " +
                                std::to_string(config.n_bands) + ")");
    return kTwoPi * (static_cast<double>(band_index) + 0.5) * config.band_width();
}

/// First real-FFT bin of band b for an N-sample trace; bin N/2 (Nyquist) belongs to the last band.
/// Boundaries are floor(b * (N/2) / n_bands), the last band absorbs the remainder.
[[nodiscard]] inline std::size_t band_first_bin(std::size_t band, std::size_t n_samples, std::size_t n_bands) {
    return band * (n_samples / 2) / n_bands;
}

/// One past the last bin of band b (in the r2c spectrum of length N/2 + 1).
[[nodiscard]] inline std::size_t band_end_bin(std::size_t band, std::size_t n_samples, std::size_t n_bands) {
    return band + 1 == n_bands ? n_samples / 2 + 1 : band_first_bin(band + 1, n_samples, n_bands);
}

/// Index of the equal-width bin of [0, 2 pi) holding theta.
[[nodiscard]] inline std::size_t phase_bin(double theta, std::size_t n_bins) {
    const double frac = theta / kTwoPi;
    const auto j = static_cast<std::size_t>(frac * static_cast<double>(n_bins));
    return std::min(j, n_bins - 1);
}

}  // namespace sqz
