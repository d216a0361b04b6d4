#pragma once

// Spectrum- and field-level analyses: squeezing spectrum with model fit, total variance
// versus LO phase, total photon statistics, photon flux, and first-order time correlation.

#include "sqz/core.hpp"
#include "sqz/fft.hpp"
#include "sqz/nelder_mead.hpp"
#include "sqz/opa_sim.hpp"
#include "sqz/spectral.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace sqz {

// ---------------------------------------------------------------------------
// Phase-resolved variance

/// Second-harmonic model of a Gaussian quadrature variance,
///   V(theta) = mean + amplitude cos(2 (theta - angle)),
/// fitted to phase-binned second moments by maximum likelihood (Gamma GLM, identity link,
/// solved by iteratively reweighted least squares).  The phase-bin average of the cosine is
/// undone, so the extremes are those of V(theta) itself.
struct PhaseVarianceFit {
    double mean = 0.0;
    double amplitude = 0.0;
    double angle = 0.0;  ///< phase of the maximum, in [0, pi)
    [[nodiscard]] double min() const { return mean - amplitude; }
    [[nodiscard]] double max() const { return mean + amplitude; }
    [[nodiscard]] double at(double theta) const { return mean + amplitude * std::cos(2.0 * (theta - angle)); }
};

namespace detail {

inline bool solve3(std::array<std::array<double, 3>, 3> a, std::array<double, 3> b, std::array<double, 3>& x) {
    for (int c = 0; c < 3; ++c) {
        int piv = c;
        for (int r = c + 1; r < 3; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        if (std::abs(a[piv][c]) < 1e-300) return false;
        std::swap(a[c], a[piv]);
        std::swap(b[c], b[piv]);
        for (int r = c + 1; r < 3; ++r) {
            const double f = a[r][c] / a[c][c];
            for (int k = c; k < 3; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    for (int c = 2; c >= 0; --c) {
        double s = b[c];
        for (int k = c + 1; k < 3; ++k) s -= a[c][k] * x[k];
        x[c] = s / a[c][c];
    }
    return true;
}

}  // namespace detail

[[nodiscard]] inline PhaseVarianceFit fit_phase_variance(const PhaseBinnedMoments& m, std::size_t iterations = 50) {
    const std::size_t nb = m.bins();
    const double width = kTwoPi / static_cast<double>(nb);
    const double smear = std::sin(width) / width;  // bin average of cos(2 theta) relative to its center value
    std::array<double, 3> coef{0.0, 0.0, 0.0};
    double vmin_obs = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < nb; ++j)
        if (m.counts[j]) vmin_obs = std::min(vmin_obs, m.variance(j));
    for (std::size_t it = 0; it < iterations; ++it) {
        std::array<std::array<double, 3>, 3> a{};
        std::array<double, 3> rhs{};
        for (std::size_t j = 0; j < nb; ++j) {
            if (!m.counts[j]) continue;
            const double th = m.center(j);
            const std::array<double, 3> row{1.0, smear * std::cos(2 * th), smear * std::sin(2 * th)};
            double w = static_cast<double>(m.counts[j]);
            if (it > 0) {
                const double model = std::max(coef[0] + coef[1] * row[1] + coef[2] * row[2], 0.1 * vmin_obs);
                w /= model * model;
            }
            for (int r = 0; r < 3; ++r) {
                rhs[r] += w * row[r] * m.variance(j);
                for (int c = 0; c < 3; ++c) a[r][c] += w * row[r] * row[c];
            }
        }
        std::array<double, 3> next{};
        if (!detail::solve3(a, rhs, next)) throw NumericError("fit_phase_variance: singular normal equations");
        const double change = std::abs(next[0] - coef[0]) + std::abs(next[1] - coef[1]) + std::abs(next[2] - coef[2]);
        coef = next;
        if (it > 0 && change <= 1e-13 * std::abs(coef[0])) break;
    }
    PhaseVarianceFit fit;
    fit.mean = coef[0];
    fit.amplitude = std::hypot(coef[1], coef[2]);
    double ang = 0.5 * std::atan2(coef[2], coef[1]);
    if (ang < 0.0) ang += kPi;
    fit.angle = ang;
    return fit;
}

// ---------------------------------------------------------------------------
// Squeezing spectrum

struct SpectrumOptions {
    std::size_t phase_bins = 64;
    std::size_t min_bin_samples = 50;
};

[[nodiscard]] inline SpectrumPoint spectrum_point(const QuadratureSamples& q, const SpectrumOptions& opt = {}) {
    const auto m = phase_binned_moments(q.x, q.theta, opt.phase_bins);
    SpectrumPoint pt;
    pt.band_index = q.band_index;
    pt.omega = q.center_frequency;
    pt.flagged = m.min_count() < opt.min_bin_samples;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t j = 0; j < m.bins(); ++j) {
        if (!m.counts[j]) continue;
        lo = std::min(lo, m.variance(j));
        hi = std::max(hi, m.variance(j));
    }
    pt.raw_bin_min = 2.0 * lo;
    pt.raw_bin_max = 2.0 * hi;
    const auto fit = fit_phase_variance(m);
    pt.v_min = 2.0 * fit.min();
    pt.v_max = 2.0 * fit.max();
    return pt;
}

/// Minimum and maximum quadrature variance of every active band, in power units (vacuum = 1).
[[nodiscard]] inline SqueezingSpectrum squeezing_spectrum(const BandDecomposition& dec, const SpectrumOptions& opt = {}) {
    if (dec.active_count() < 2) throw std::invalid_argument("squeezing_spectrum: need at least 2 active bands");
    SqueezingSpectrum s;
    for (const auto& b : dec.bands)
        if (!b.discarded) s.points.push_back(spectrum_point(b.samples, opt));
    return s;
}

/// Model spectrum at the centers of bands [first_band, n_bands).
[[nodiscard]] inline SqueezingSpectrum theory_spectrum(const OpaParams& params, const AcquisitionConfig& acq,
                                                       std::size_t first_band = 1) {
    SqueezingSpectrum s;
    for (std::size_t b = first_band; b < acq.n_bands; ++b) {
        const double om = band_center(b, acq);
        const auto psi = band_variances(params, om);
        SpectrumPoint pt;
        pt.band_index = b;
        pt.omega = om;
        pt.v_min = pt.raw_bin_min = psi.squeezed;
        pt.v_max = pt.raw_bin_max = psi.antisqueezed;
        s.points.push_back(pt);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Model fit

struct SpectrumFit {
    double pump = 0.0;        ///< d
    double efficiency = 0.0;  ///< xi * eta
    double cavity_hwhm = 0.0; ///< Gamma, rad/s
    bool gamma_free = false;
    double residual_norm = 0.0;
    std::vector<double> covariance;  ///< row-major, (d, xi eta[, Gamma]); finite-difference Gauss-Newton proxy
    std::size_t bands_used = 0;
    std::size_t evaluations = 0;
};

class FitError : public NumericError {
public:
    FitError(const std::string& what, SpectrumFit best) : NumericError(what), best_(std::move(best)) {}
    [[nodiscard]] const SpectrumFit& best_so_far() const noexcept { return best_; }

private:
    SpectrumFit best_;
};

struct FitOptions {
    bool gamma_free = false;
    double max_pump = 0.999;
    opt::SimplexOptions simplex{};
};

namespace detail {

/// Log-ratio residuals, both branches with equal weight.
inline std::vector<double> spectrum_residuals(const std::vector<SpectrumPoint>& pts, double d, double eff, double gamma) {
    std::vector<double> r;
    r.reserve(2 * pts.size());
    const OpaParams p = OpaParams::with_efficiency(d, eff, gamma);
    for (const auto& pt : pts) {
        const auto psi = band_variances(p, pt.omega);
        r.push_back(psi.squeezed > 0.0 && pt.v_min > 0.0 ? std::log(psi.squeezed / pt.v_min) : 1e3);
        r.push_back(std::log(psi.antisqueezed / pt.v_max));
    }
    return r;
}

}  // namespace detail

/// Least-squares fit of the OPA noise spectra to both branches of a measured spectrum.
/// Simplex descent restarted from 8 points of a coarse (d, xi eta) grid.
[[nodiscard]] inline SpectrumFit fit_spectrum(const SqueezingSpectrum& spectrum, double gamma, const FitOptions& opt = {}) {
    std::vector<SpectrumPoint> pts;
    for (const auto& p : spectrum.points)
        if (!p.flagged && p.v_min > 0.0 && p.v_max > 0.0) pts.push_back(p);
    if (pts.size() < 3) throw std::invalid_argument("fit_spectrum: need at least 3 usable bands");
    if (!(gamma > 0.0)) throw std::invalid_argument("fit_spectrum: Gamma must be > 0");

    const std::size_t dim = opt.gamma_free ? 3 : 2;
    // Gamma is fitted on a log scale around the starting value.
    const auto unpack = [&](std::span<const double> v) {
        return std::array<double, 3>{v[0], v[1], opt.gamma_free ? gamma * std::exp(v[2]) : gamma};
    };
    const auto objective = [&](std::span<const double> v) {
        const auto p = unpack(v);
        double s = 0.0;
        for (double r : detail::spectrum_residuals(pts, p[0], p[1], p[2])) s += r * r;
        return s;
    };
    opt::Box box{{0.0, 1e-6}, {opt.max_pump, 1.0}};
    if (opt.gamma_free) {
        box.lower.push_back(std::log(0.05));
        box.upper.push_back(std::log(20.0));
    }

    opt::SimplexResult best;
    best.value = std::numeric_limits<double>::infinity();
    std::size_t evaluations = 0;
    for (double d0 : {0.2, 0.4, 0.6, 0.8})
        for (double e0 : {0.4, 0.8}) {
            std::vector<double> start{d0, e0};
            if (opt.gamma_free) start.push_back(0.0);
            auto r = opt::nelder_mead(objective, start, box, opt.simplex);
            // Polish once from the optimum with a fresh simplex.
            auto r2 = opt::nelder_mead(objective, r.x, box, opt.simplex);
            evaluations += r.evaluations + r2.evaluations;
            if (r2.value < best.value) best = r2;
        }

    SpectrumFit fit;
    const auto p = unpack(best.x);
    fit.pump = p[0];
    fit.efficiency = p[1];
    fit.cavity_hwhm = p[2];
    fit.gamma_free = opt.gamma_free;
    fit.residual_norm = std::sqrt(best.value);
    fit.bands_used = pts.size();
    fit.evaluations = evaluations;

    // Covariance proxy s^2 (J^T J)^{-1} in (d, xi eta[, Gamma]) with a central-difference Jacobian.
    const auto resid = [&](std::array<double, 3> q) { return detail::spectrum_residuals(pts, q[0], q[1], q[2]); };
    const std::size_t nr = 2 * pts.size();
    std::vector<std::vector<double>> jac(dim, std::vector<double>(nr));
    for (std::size_t k = 0; k < dim; ++k) {
        auto hi = p, lo = p;
        const double h = k == 2 ? 1e-5 * p[2] : 1e-6;
        hi[k] += h;
        lo[k] -= h;
        hi[0] = std::min(hi[0], 0.9999);
        lo[0] = std::max(lo[0], 0.0);
        hi[1] = std::min(hi[1], 1.0);
        lo[1] = std::max(lo[1], 0.0);
        const auto rh = resid(hi), rl = resid(lo);
        for (std::size_t i = 0; i < nr; ++i) jac[k][i] = (rh[i] - rl[i]) / (hi[k] - lo[k]);
    }
    std::vector<double> jtj(dim * dim, 0.0);
    for (std::size_t a = 0; a < dim; ++a)
        for (std::size_t b = 0; b < dim; ++b)
            for (std::size_t i = 0; i < nr; ++i) jtj[a * dim + b] += jac[a][i] * jac[b][i];
    const double dof = nr > dim ? static_cast<double>(nr - dim) : 1.0;
    const double s2 = best.value / dof;
    fit.covariance.assign(dim * dim, std::numeric_limits<double>::quiet_NaN());
    if (dim == 2) {
        const double det = jtj[0] * jtj[3] - jtj[1] * jtj[2];
        if (std::abs(det) > 0.0) {
            fit.covariance = {s2 * jtj[3] / det, -s2 * jtj[1] / det, -s2 * jtj[2] / det, s2 * jtj[0] / det};
        }
    } else {
        std::array<std::array<double, 3>, 3> a{};
        for (std::size_t r = 0; r < 3; ++r)
            for (std::size_t c = 0; c < 3; ++c) a[r][c] = jtj[r * 3 + c];
        for (std::size_t c = 0; c < 3; ++c) {
            std::array<double, 3> e{}, x{};
            e[c] = 1.0;
            if (detail::solve3(a, e, x))
                for (std::size_t r = 0; r < 3; ++r) fit.covariance[r * 3 + c] = s2 * x[r];
        }
    }

    if (!best.converged || !std::isfinite(best.value)) throw FitError("fit_spectrum: simplex did not converge", fit);
    return fit;
}

// ---------------------------------------------------------------------------
// Total field

/// Removes whole bands (e.g. the low-frequency band) from a trace by zeroing their bins.
[[nodiscard]] inline BroadbandTrace remove_bands(const BroadbandTrace& trace, std::span<const std::size_t> bands) {
    const std::size_t n = trace.samples.size();
    auto s = fft::forward(trace.samples);
    for (std::size_t b : bands) {
        if (b >= trace.config.n_bands) throw std::out_of_range("remove_bands: band index out of range");
        for (std::size_t k = band_first_bin(b, n, trace.config.n_bands); k < band_end_bin(b, n, trace.config.n_bands); ++k)
            s[k] = 0.0;
    }
    BroadbandTrace out;
    out.config = trace.config;
    out.kind = trace.kind;
    out.samples = fft::inverse(s, n);
    return out;
}

struct TotalVariance {
    std::vector<double> phase;     ///< bin centers, rad
    std::vector<double> variance;  ///< normalized, vacuum = 1
    std::vector<std::size_t> counts;
    double v_min = 1.0;            ///< harmonic-model extremes
    double v_max = 1.0;
    double raw_bin_min = 1.0;
    double raw_bin_max = 1.0;
    bool flagged = false;

    [[nodiscard]] double min_db() const { return to_decibel(v_min); }
    [[nodiscard]] double max_db() const { return to_decibel(v_max); }
};

/// Phase-binned variance of a vacuum-flattened trace summed over the bands that remain after
/// `removed_bands` are dropped; normalized so a flattened vacuum gives 1.
[[nodiscard]] inline TotalVariance total_variance_vs_phase(const BroadbandTrace& flattened, const AcquisitionConfig& acq,
                                                           std::span<const std::size_t> removed_bands,
                                                           const SpectrumOptions& opt = {}) {
    const std::size_t n = flattened.samples.size();
    const auto cut = remove_bands(flattened, removed_bands);
    // After flattening every full-spectrum bin carries power N * n_bands / 2, so the vacuum
    // variance of the kept bins is kept_bins * n_bands / (2 N).
    std::size_t kept = 0;
    for (std::size_t b = 0; b < acq.n_bands; ++b) {
        if (std::find(removed_bands.begin(), removed_bands.end(), b) != removed_bands.end()) continue;
        for (std::size_t k = band_first_bin(b, n, acq.n_bands); k < band_end_bin(b, n, acq.n_bands); ++k)
            kept += fft::self_conjugate(k, n) ? 1 : 2;
    }
    const double vacuum = static_cast<double>(kept) * static_cast<double>(acq.n_bands) / (2.0 * static_cast<double>(n));
    const auto q = attach_phase(cut.samples, acq);
    auto m = phase_binned_moments(q.x, q.theta, opt.phase_bins);
    for (double& s : m.sum_squares) s /= vacuum;

    TotalVariance tv;
    tv.flagged = m.min_count() < opt.min_bin_samples;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t j = 0; j < m.bins(); ++j) {
        tv.phase.push_back(m.center(j));
        tv.variance.push_back(m.variance(j));
        tv.counts.push_back(m.counts[j]);
        if (!m.counts[j]) continue;
        lo = std::min(lo, m.variance(j));
        hi = std::max(hi, m.variance(j));
    }
    tv.raw_bin_min = lo;
    tv.raw_bin_max = hi;
    const auto fit = fit_phase_variance(m);
    tv.v_min = fit.min();
    tv.v_max = fit.max();
    return tv;
}

struct TotalPhotonStatistics {
    std::vector<double> p;
    double tail_mass = 0.0;  ///< probability beyond the truncation
};

/// Photon statistics of independent modes: the discrete convolution of their distributions.
[[nodiscard]] inline TotalPhotonStatistics total_photon_statistics(std::span<const std::vector<double>> dists,
                                                                   std::size_t max_length = 512) {
    if (max_length == 0) throw std::invalid_argument("total_photon_statistics: max_length must be >= 1");
    std::vector<double> acc{1.0};
    double tail = 0.0;
    for (const auto& d : dists) {
        double sum = 0.0;
        for (double v : d) {
            if (v < 0.0) throw std::invalid_argument("total_photon_statistics: negative probability");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-6) throw std::invalid_argument("total_photon_statistics: input distribution not normalized");
        std::vector<double> next(std::min(max_length, acc.size() + d.size() - 1), 0.0);
        for (std::size_t i = 0; i < acc.size(); ++i)
            for (std::size_t k = 0; k < d.size(); ++k) {
                const double v = acc[i] * d[k];
                if (i + k < next.size()) next[i + k] += v;
                else tail += v;
            }
        acc = std::move(next);
    }
    return {acc, tail};
}

struct PhotonFlux {
    double mean_photons = 0.0;  ///< per mode, i.e. per Hz of bandwidth per second
    double flux = 0.0;          ///< photons / s
    double power = 0.0;         ///< W
};

inline constexpr double kPlanck = 6.62607015e-34;
inline constexpr double kLightSpeed = 299792458.0;

/// <n>_Omega = (Psi_+ + Psi_- - 2) / 4 averaged over the bands; flux = <n> * bandwidth.
[[nodiscard]] inline PhotonFlux mean_photon_and_flux(const SqueezingSpectrum& spectrum, double bandwidth_hz,
                                                     double wavelength = 1064e-9) {
    if (spectrum.points.empty()) throw std::invalid_argument("mean_photon_and_flux: empty spectrum");
    double s = 0.0;
    for (const auto& p : spectrum.points) s += (p.v_max + p.v_min - 2.0) / 4.0;
    PhotonFlux out;
    out.mean_photons = s / static_cast<double>(spectrum.points.size());
    out.flux = out.mean_photons * bandwidth_hz;
    out.power = out.flux * kPlanck * kLightSpeed / wavelength;
    return out;
}

/// Mean photon number of a single Gaussian mode pair from its noise powers.
[[nodiscard]] inline double mean_photons(double psi_minus, double psi_plus) { return (psi_plus + psi_minus - 2.0) / 4.0; }

// ---------------------------------------------------------------------------
// First-order correlation

/// g1(tau) = (1 - d^2)/(2d) [e^{-(1-d) Gamma tau}/(1-d) - e^{-(1+d) Gamma tau}/(1+d)].
/// Evaluated as e^{-Gamma tau} [cosh(d Gamma tau) + Gamma tau sinh(d Gamma tau)/(d Gamma tau)], which has
/// no cancellation near d = 0 and reduces to (1 + Gamma tau) e^{-Gamma tau} there.
[[nodiscard]] inline double g1_theory(double d, double gamma, double tau) {
    if (!(d >= 0.0) || !(d < 1.0)) throw std::domain_error("g1_theory: need 0 <= d < 1");
    if (!(gamma > 0.0)) throw std::invalid_argument("g1_theory: Gamma must be > 0");
    if (!(tau >= 0.0)) throw std::invalid_argument("g1_theory: tau must be >= 0");
    const double gt = gamma * tau;
    if (d == 0.0) return (1.0 + gt) * std::exp(-gt);
    const double z = d * gt;
    const double sinhc = z < 1e-8 ? 1.0 : std::sinh(z) / z;
    return std::exp(-gt) * (std::cosh(z) + gt * sinhc);
}

struct CorrelationCurve {
    std::vector<double> lags;    ///< s
    std::vector<double> values;  ///< g1 (or excess fraction when not normalized)
    std::vector<double> raw;     ///< vacuum-subtracted covariance
    std::vector<bool> valid;     ///< lag 0 excluded
    double normalization = 0.0;  ///< tau -> 0 extrapolation of `raw`
    bool normalized = false;

    /// Linear interpolation; tau in (0, lag 1) uses the extrapolated value 1 at tau = 0.
    [[nodiscard]] double at(double tau) const {
        if (lags.size() < 2) throw std::out_of_range("CorrelationCurve: too few lags");
        if (tau <= lags[1]) {
            const double v0 = normalized ? 1.0 : values[1];
            return v0 + (values[1] - v0) * tau / lags[1];
        }
        for (std::size_t i = 1; i + 1 < lags.size(); ++i)
            if (tau <= lags[i + 1]) {
                const double t = (tau - lags[i]) / (lags[i + 1] - lags[i]);
                return values[i] + t * (values[i + 1] - values[i]);
            }
        throw std::out_of_range("CorrelationCurve: tau beyond the last lag");
    }
};

struct G1Options {
    double significance = 5.0;    ///< normalization must exceed this many noise standard deviations
    std::size_t phase_bins = 64;  ///< samples are weighted so every LO phase bin counts equally
};

namespace detail {

/// Per-sample weights 1 / count(phase bin), normalized to sum to one.
inline std::vector<double> phase_balance_weights(const AcquisitionConfig& acq, std::size_t n, std::size_t bins) {
    const auto q = attach_phase(std::vector<double>(n, 0.0), acq);
    std::vector<std::size_t> counts(bins, 0);
    std::vector<std::size_t> which(n);
    for (std::size_t i = 0; i < n; ++i) ++counts[which[i] = phase_bin(q.theta[i], bins)];
    std::size_t filled = 0;
    for (std::size_t c : counts) filled += c ? 1 : 0;
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 1.0 / (static_cast<double>(counts[which[i]]) * static_cast<double>(filled));
    return w;
}

inline double weighted_autocov(const std::vector<double>& x, const std::vector<double>& w, std::size_t lag) {
    double s = 0.0, ws = 0.0;
    for (std::size_t i = 0; i + lag < x.size(); ++i) {
        s += w[i] * x[i] * x[i + lag];
        ws += w[i];
    }
    return s / ws;
}

}  // namespace detail

/// Phase-averaged autocorrelation of the flattened signal minus that of the flattened vacuum,
/// normalized by its linear extrapolation to tau = 0 through lags 1 and 2.  If that
/// extrapolation is not significantly positive (no excess field), values are reported relative
/// to the signal variance instead and `normalized` is false.
[[nodiscard]] inline CorrelationCurve g1_estimate(const BroadbandTrace& signal, const BroadbandTrace& vacuum,
                                                  const AcquisitionConfig& acq, std::size_t max_lag,
                                                  const G1Options& opt = {}) {
    const std::size_t n = signal.samples.size();
    if (vacuum.samples.size() != n) throw DataError("g1_estimate: signal and vacuum lengths differ");
    if (max_lag < 2 || max_lag >= n / 2) throw std::invalid_argument("g1_estimate: max_lag must lie in [2, N/2)");
    if (opt.phase_bins == 0) throw std::invalid_argument("g1_estimate: need at least one phase bin");
    const auto w = detail::phase_balance_weights(acq, n, opt.phase_bins);
    CorrelationCurve c;
    c.lags.resize(max_lag + 1);
    c.raw.resize(max_lag + 1);
    std::vector<double> cs(max_lag + 1);
    // Each lag is independent; the loop order does not affect the result.
    for (std::size_t lag = 0; lag <= max_lag; ++lag) {
        cs[lag] = detail::weighted_autocov(signal.samples, w, lag);
        c.lags[lag] = static_cast<double>(lag) / acq.sample_rate;
        c.raw[lag] = cs[lag] - detail::weighted_autocov(vacuum.samples, w, lag);
    }
    c.valid.assign(max_lag + 1, true);
    c.valid[0] = false;
    c.normalization = 2.0 * c.raw[1] - c.raw[2];
    // Standard error of a lag covariance for roughly white data of this power.
    const double noise = cs[0] * std::sqrt(2.0 / static_cast<double>(n));
    c.normalized = c.normalization > opt.significance * noise;
    const double scale = c.normalized ? c.normalization : cs[0];
    for (double r : c.raw) c.values.push_back(r / scale);
    return c;
}

}  // namespace sqz
