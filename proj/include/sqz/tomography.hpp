#pragma once

// Per-band quantum state reconstruction: density matrix by pattern-function sampling,
// Wigner function by filtered back-projection of the phase-binned marginals, and the
// Fock-basis synthesis used to cross-check the two.

#include "sqz/core.hpp"
#include "sqz/pattern.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace sqz {

struct EstimateOptions {
    std::size_t phase_bins = 64;        ///< equal-weight phase bins
    double max_phase_imbalance = 0.25;  ///< allowed relative spread of per-bin phase counts
    std::size_t threads = 1;            ///< > 1 splits the sum into chunks; the result then depends on the chunk count
};

struct DensityEstimate {
    DensityMatrix rho;
    std::size_t samples_used = 0;
    std::size_t out_of_span = 0;    ///< samples beyond the kernel grid (skipped)
    double phase_imbalance = 0.0;   ///< (max - min) / mean of phase-bin counts
    bool nonuniform_phase = false;
};

/// rho_nm = < f_nm(x) e^{i(n-m) theta} >, the average taken over equal-width phase bins with equal
/// weight so that a record covering a non-integer number of LO sweeps is not biased toward the
/// phases it visits twice.  Only n <= m is accumulated; the lower triangle is its conjugate.
[[nodiscard]] inline DensityEstimate estimate_density_matrix(const QuadratureSamples& samples, const PatternKernel& kernel,
                                                             const EstimateOptions& opt = {}) {
    if (samples.x.empty()) throw std::invalid_argument("estimate_density_matrix: no samples");
    if (samples.x.size() != samples.theta.size())
        throw std::invalid_argument("estimate_density_matrix: x and theta lengths differ");
    if (opt.phase_bins == 0) throw std::invalid_argument("estimate_density_matrix: need at least one phase bin");
    const std::size_t n_max = kernel.n_max();
    const std::size_t dim = n_max + 1;
    const std::size_t pairs = kernel.pair_count();
    const std::size_t nb = opt.phase_bins;
    const std::size_t n_samples = samples.x.size();
    const std::size_t chunks = std::clamp<std::size_t>(opt.threads, 1, std::max<std::size_t>(1, n_samples / 4096));

    struct Partial {
        std::vector<double> re, im;
        std::vector<std::size_t> counts;
        std::size_t out_of_span = 0;
    };
    std::vector<Partial> partial(chunks);
    const auto accumulate = [&](std::size_t c) {
        auto& part = partial[c];
        part.re.assign(nb * pairs, 0.0);
        part.im.assign(nb * pairs, 0.0);
        part.counts.assign(nb, 0);
        std::vector<double> f(pairs);
        std::vector<std::complex<double>> phase(dim);
        const std::size_t begin = n_samples * c / chunks, end = n_samples * (c + 1) / chunks;
        for (std::size_t i = begin; i < end; ++i) {
            const double x = samples.x[i];
            const double th = samples.theta[i];
            const std::size_t j = phase_bin(th, nb);
            ++part.counts[j];
            if (!kernel.covers(x)) {
                ++part.out_of_span;
                continue;
            }
            kernel.eval_all(kernel.stencil(x), f);
            // phase[d] = e^{-i d theta}, the factor for rho_{n, n+d}.
            const std::complex<double> z(std::cos(th), -std::sin(th));
            phase[0] = 1.0;
            for (std::size_t d = 1; d < dim; ++d) phase[d] = phase[d - 1] * z;
            double* re = part.re.data() + j * pairs;
            double* im = part.im.data() + j * pairs;
            for (std::size_t m = 0; m < dim; ++m) {
                const std::size_t base = m * (m + 1) / 2;
                for (std::size_t n = 0; n <= m; ++n) {
                    const double v = f[base + n];
                    re[base + n] += v * phase[m - n].real();
                    im[base + n] += v * phase[m - n].imag();
                }
            }
        }
    };
    if (chunks == 1) {
        accumulate(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t c = 0; c < chunks; ++c) pool.emplace_back(accumulate, c);
        for (auto& t : pool) t.join();
    }
    // Chunks are combined in index order.
    std::vector<double> acc_re(nb * pairs, 0.0), acc_im(nb * pairs, 0.0);
    std::vector<std::size_t> counts(nb, 0);
    DensityEstimate est;
    for (const auto& part : partial) {
        for (std::size_t k = 0; k < nb * pairs; ++k) {
            acc_re[k] += part.re[k];
            acc_im[k] += part.im[k];
        }
        for (std::size_t j = 0; j < nb; ++j) counts[j] += part.counts[j];
        est.out_of_span += part.out_of_span;
    }
    std::size_t filled = 0;
    for (std::size_t c : counts) filled += c ? 1 : 0;
    std::vector<double> sum_re(pairs, 0.0), sum_im(pairs, 0.0);
    for (std::size_t j = 0; j < nb; ++j) {
        if (!counts[j]) continue;
        const double w = 1.0 / (static_cast<double>(counts[j]) * static_cast<double>(filled));
        for (std::size_t p = 0; p < pairs; ++p) {
            sum_re[p] += w * acc_re[j * pairs + p];
            sum_im[p] += w * acc_im[j * pairs + p];
        }
    }
    est.samples_used = samples.x.size() - est.out_of_span;
    est.rho = DensityMatrix(n_max);
    for (std::size_t m = 0; m < dim; ++m)
        for (std::size_t n = 0; n <= m; ++n) {
            const std::size_t p = PatternKernel::pair_index(n, m);
            const std::complex<double> v(sum_re[p], n == m ? 0.0 : sum_im[p]);
            est.rho(n, m) = v;
            est.rho(m, n) = std::conj(v);
        }

    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    const double mean = static_cast<double>(samples.x.size()) / static_cast<double>(nb);
    est.phase_imbalance = static_cast<double>(*hi - *lo) / mean;
    est.nonuniform_phase = filled < nb || est.phase_imbalance > opt.max_phase_imbalance;
    return est;
}

/// Overlap with the vacuum, <0|rho|0>.
[[nodiscard]] inline double vacuum_fidelity(const DensityMatrix& rho) { return rho(0, 0).real(); }

struct PhotonDistribution {
    std::vector<double> p;
    double clipped_mass = 0.0;  ///< total negative diagonal weight removed
    double trace = 1.0;         ///< trace of rho before clipping
    bool trace_flagged = false;
};

/// Diagonal of rho with negative entries clipped to zero and the rest renormalized.
[[nodiscard]] inline PhotonDistribution photon_distribution(const DensityMatrix& rho, double trace_tolerance = 0.05) {
    PhotonDistribution out;
    out.p = rho.diagonal();
    out.trace = rho.trace();
    out.trace_flagged = std::abs(out.trace - 1.0) > trace_tolerance;
    double sum = 0.0;
    for (double& v : out.p) {
        if (v < 0.0) {
            out.clipped_mass += -v;
            v = 0.0;
        }
        sum += v;
    }
    if (sum > 0.0)
        for (double& v : out.p) v /= sum;
    return out;
}

/// Column-normalizable 2-D histogram of (theta, x).
struct Tomogram {
    std::size_t phase_bins = 0;
    UniformAxis x_edges;  ///< x_bins + 1 edges
    std::vector<std::size_t> counts;  ///< [phase][x]

    [[nodiscard]] std::size_t x_bins() const noexcept { return x_edges.points - 1; }
    [[nodiscard]] double phase_center(std::size_t j) const {
        return kTwoPi * (static_cast<double>(j) + 0.5) / static_cast<double>(phase_bins);
    }
    [[nodiscard]] double x_center(std::size_t k) const { return x_edges[k] + 0.5 * x_edges.step(); }
    [[nodiscard]] std::size_t count(std::size_t j, std::size_t k) const { return counts[j * x_bins() + k]; }
    [[nodiscard]] std::size_t column_total(std::size_t j) const {
        std::size_t s = 0;
        for (std::size_t k = 0; k < x_bins(); ++k) s += count(j, k);
        return s;
    }
    [[nodiscard]] std::size_t total() const {
        std::size_t s = 0;
        for (auto c : counts) s += c;
        return s;
    }
    /// p(x_k | theta_j) as a probability mass per bin; zero for an empty column.
    [[nodiscard]] double probability(std::size_t j, std::size_t k) const {
        const auto t = column_total(j);
        return t ? static_cast<double>(count(j, k)) / static_cast<double>(t) : 0.0;
    }
    [[nodiscard]] std::vector<double> column(std::size_t j) const {
        std::vector<double> c(x_bins());
        const auto t = column_total(j);
        for (std::size_t k = 0; k < x_bins(); ++k)
            c[k] = t ? static_cast<double>(count(j, k)) / static_cast<double>(t) : 0.0;
        return c;
    }
    /// Mean and variance of the x-marginal of column j (bin centers).
    [[nodiscard]] std::pair<double, double> column_moments(std::size_t j) const {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t k = 0; k < x_bins(); ++k) {
            const double p = probability(j, k);
            m1 += p * x_center(k);
            m2 += p * x_center(k) * x_center(k);
        }
        return {m1, m2 - m1 * m1};
    }
};

/// Histogram of the samples over n_phase_bins x n_x_bins; the x range is symmetric and wide
/// enough for every sample unless `half_width` is given.
[[nodiscard]] inline Tomogram marginal_histogram(const QuadratureSamples& samples, std::size_t n_phase_bins,
                                                 std::size_t n_x_bins, std::optional<double> half_width = std::nullopt) {
    if (n_phase_bins < 8 || n_x_bins < 8) throw std::invalid_argument("marginal_histogram: need at least 8 bins per axis");
    double r = 0.0;
    if (half_width) {
        r = *half_width;
    } else {
        for (double v : samples.x) r = std::max(r, std::abs(v));
        r = r > 0.0 ? r * (1.0 + 1e-9) : 1.0;
    }
    Tomogram t;
    t.phase_bins = n_phase_bins;
    t.x_edges = UniformAxis::symmetric(r, n_x_bins + 1);
    t.counts.assign(n_phase_bins * n_x_bins, 0);
    const double h = t.x_edges.step();
    for (std::size_t i = 0; i < samples.x.size(); ++i) {
        const double x = samples.x[i];
        if (x < -r || x > r) continue;
        const auto k = std::min(n_x_bins - 1, static_cast<std::size_t>((x + r) / h));
        const auto j = std::min(n_phase_bins - 1,
                                static_cast<std::size_t>(samples.theta[i] / kTwoPi * static_cast<double>(n_phase_bins)));
        ++t.counts[j * n_x_bins + k];
    }
    return t;
}

struct BackprojectionOptions {
    double cutoff = 5.0;           ///< |k| <= k_c, vacuum units
    std::size_t filter_points = 4096;
};

/// Inverse Radon transform with a ramp filter |k| truncated at k_c:
///   W(q, p) = 1/(4 pi) < int dx p(x|theta) h(x - q cos theta - p sin theta) >_theta,
///   h(y) = int_{-k_c}^{k_c} |k| e^{iky} dk.
/// Each histogram bin is treated as uniform density, so the filter is integrated exactly
/// across it with H(y) = 2 (1 - cos(k_c y)) / y, H' = h.
[[nodiscard]] inline WignerGrid wigner_backprojection(const Tomogram& tomo, const UniformAxis& q_axis,
                                                      const UniformAxis& p_axis, const BackprojectionOptions& opt = {}) {
    if (!(opt.cutoff > 0.0)) throw std::invalid_argument("wigner_backprojection: cutoff must be > 0");
    if (opt.filter_points < 2) throw std::invalid_argument("wigner_backprojection: too few filter points");
    const double kc = opt.cutoff;
    const auto big_h = [kc](double y) {
        const double ky = kc * y;
        if (std::abs(ky) < 1e-4) return kc * ky * (1.0 - ky * ky / 12.0);  // series of 2(1-cos u)/y
        return 2.0 * (1.0 - std::cos(ky)) / y;
    };
    // Projection abscissae needed: |q cos + p sin| <= max radius of the output grid.
    const double reach = std::hypot(std::max(std::abs(q_axis.lo), std::abs(q_axis.hi)),
                                    std::max(std::abs(p_axis.lo), std::abs(p_axis.hi)));
    const UniformAxis s_axis = UniformAxis::symmetric(reach * (1.0 + 1e-9), opt.filter_points);
    const std::size_t nx = tomo.x_bins();

    WignerGrid w{q_axis, p_axis, std::vector<double>(q_axis.points * p_axis.points, 0.0)};
    // H at every (abscissa, bin edge) pair; the same for all phase columns.
    std::vector<double> edge_h(s_axis.points * (nx + 1));
    for (std::size_t si = 0; si < s_axis.points; ++si)
        for (std::size_t e = 0; e <= nx; ++e) edge_h[si * (nx + 1) + e] = big_h(tomo.x_edges[e] - s_axis[si]);
    std::vector<double> filtered(s_axis.points);
    std::size_t used_columns = 0;
    for (std::size_t j = 0; j < tomo.phase_bins; ++j) {
        const auto col = tomo.column(j);
        if (tomo.column_total(j) == 0) continue;
        ++used_columns;
        const double bin_width = tomo.x_edges.step();
        for (std::size_t si = 0; si < s_axis.points; ++si) {
            const double* h = &edge_h[si * (nx + 1)];
            double acc = 0.0;
            for (std::size_t k = 0; k < nx; ++k)
                if (col[k] != 0.0) acc += col[k] * (h[k + 1] - h[k]);
            filtered[si] = acc / bin_width;
        }
        const double th = tomo.phase_center(j);
        const double c = std::cos(th), sn = std::sin(th);
        const double ds = s_axis.step();
        for (std::size_t ip = 0; ip < p_axis.points; ++ip)
            for (std::size_t iq = 0; iq < q_axis.points; ++iq) {
                const double s = q_axis[iq] * c + p_axis[ip] * sn;
                const double pos = (s - s_axis.lo) / ds;
                const auto i0 = std::min(s_axis.points - 2, static_cast<std::size_t>(std::max(0.0, std::floor(pos))));
                const double t = pos - static_cast<double>(i0);
                w.at(iq, ip) += (1.0 - t) * filtered[i0] + t * filtered[i0 + 1];
            }
    }
    if (used_columns == 0) throw DataError("wigner_backprojection: tomogram is empty");
    const double norm = 1.0 / (4.0 * kPi * static_cast<double>(used_columns));
    for (double& v : w.values) v *= norm;
    return w;
}

/// Generalized Laguerre polynomials L_k^{(alpha)}(x) for k = 0..n.
inline void laguerre_table(std::size_t n, double alpha, double x, std::span<double> out) {
    out[0] = 1.0;
    if (n >= 1) out[1] = 1.0 + alpha - x;
    for (std::size_t k = 2; k <= n; ++k) {
        const double kk = static_cast<double>(k);
        out[k] = ((2.0 * kk - 1.0 + alpha - x) * out[k - 1] - (kk - 1.0 + alpha) * out[k - 2]) / kk;
    }
}

/// W(q, p) = sum_nm rho_nm W_{|n><m|}(q, p), with, for m >= n,
///   W_{|m><n|} = (-1)^n / pi * sqrt(n!/m!) (sqrt(2) (q - ip))^{m-n} e^{-r^2} L_n^{(m-n)}(2 r^2).
[[nodiscard]] inline WignerGrid wigner_from_density(const DensityMatrix& rho, const UniformAxis& q_axis,
                                                    const UniformAxis& p_axis) {
    const std::size_t dim = rho.dim();
    WignerGrid w{q_axis, p_axis, std::vector<double>(q_axis.points * p_axis.points, 0.0)};
    // sqrt(n!/m!) for m >= n.
    std::vector<double> ratio(dim * dim, 1.0);
    for (std::size_t n = 0; n < dim; ++n)
        for (std::size_t m = n + 1; m < dim; ++m) ratio[n * dim + m] = ratio[n * dim + m - 1] / std::sqrt(static_cast<double>(m));
    std::vector<double> lag(dim);
    std::vector<std::complex<double>> zpow(dim);
    for (std::size_t ip = 0; ip < p_axis.points; ++ip)
        for (std::size_t iq = 0; iq < q_axis.points; ++iq) {
            const double q = q_axis[iq], p = p_axis[ip];
            const double r2 = q * q + p * p;
            const std::complex<double> z(std::sqrt(2.0) * q, -std::sqrt(2.0) * p);
            zpow[0] = 1.0;
            for (std::size_t d = 1; d < dim; ++d) zpow[d] = zpow[d - 1] * z;
            double acc = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                laguerre_table(dim - 1 - d, static_cast<double>(d), 2.0 * r2, lag);
                for (std::size_t n = 0; n + d < dim; ++n) {
                    const std::size_t m = n + d;
                    const double sign = n % 2 == 0 ? 1.0 : -1.0;
                    const std::complex<double> basis = sign * ratio[n * dim + m] * zpow[d] * lag[n];
                    const std::complex<double> term = rho(m, n) * basis;
                    acc += d == 0 ? term.real() : 2.0 * term.real();
                }
            }
            w.at(iq, ip) = acc * std::exp(-r2) / kPi;
        }
    return w;
}

/// Root-mean-square difference of two Wigner grids on identical axes.
[[nodiscard]] inline double wigner_rms_difference(const WignerGrid& a, const WignerGrid& b) {
    if (a.values.size() != b.values.size()) throw std::invalid_argument("wigner_rms_difference: grid mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double d = a.values[i] - b.values[i];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(a.values.size()));
}

}  // namespace sqz
