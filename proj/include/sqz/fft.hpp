#pragma once

// Thin RAII layer over FFTW's real transforms.  Plans are made with FFTW_ESTIMATE so the
// chosen algorithm, and hence every output bit, depends only on the transform size.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <cstring>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

namespace sqz::fft {

namespace detail {

inline std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const noexcept { fftw_free(p); }
};

struct PlanDestroy {
    void operator()(fftw_plan_s* p) const noexcept {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(p);
    }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <typename T>
FftwBuffer<T> allocate(std::size_t n) {
    auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * (n == 0 ? 1 : n)));
    if (p == nullptr) throw std::bad_alloc();
    return FftwBuffer<T>(p);
}

}  // namespace detail

using Spectrum = std::vector<std::complex<double>>;

/// Forward real transform, unnormalized: X_k = sum_j x_j e^{-2 pi i jk/N}, k = 0..N/2.
[[nodiscard]] inline Spectrum forward(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n == 0) throw std::invalid_argument("fft::forward: empty input");
    auto in = detail::allocate<double>(n);
    auto out = detail::allocate<fftw_complex>(n / 2 + 1);
    std::unique_ptr<fftw_plan_s, detail::PlanDestroy> plan;
    {
        std::lock_guard lock(detail::planner_mutex());
        plan.reset(fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE));
    }
    std::memcpy(in.get(), x.data(), n * sizeof(double));
    fftw_execute(plan.get());
    Spectrum result(n / 2 + 1);
    std::memcpy(static_cast<void*>(result.data()), out.get(), result.size() * sizeof(fftw_complex));
    return result;
}

/// Inverse of `forward` including the 1/N factor.  `n` is the time-domain length.
[[nodiscard]] inline std::vector<double> inverse(std::span<const std::complex<double>> spectrum, std::size_t n) {
    if (spectrum.size() != n / 2 + 1) throw std::invalid_argument("fft::inverse: spectrum length mismatch");
    auto in = detail::allocate<fftw_complex>(n / 2 + 1);
    auto out = detail::allocate<double>(n);
    std::unique_ptr<fftw_plan_s, detail::PlanDestroy> plan;
    {
        std::lock_guard lock(detail::planner_mutex());
        plan.reset(fftw_plan_dft_c2r_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE));
    }
    // c2r destroys its input, so copy in after planning.
    std::memcpy(static_cast<void*>(in.get()), spectrum.data(), spectrum.size() * sizeof(fftw_complex));
    fftw_execute(plan.get());
    std::vector<double> result(n);
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) result[i] = out[i] * scale;
    return result;
}

/// True for the bins of an N-point real spectrum that are their own conjugate mirror (DC, Nyquist).
[[nodiscard]] inline bool self_conjugate(std::size_t k, std::size_t n) noexcept { return k == 0 || 2 * k == n; }

}  // namespace sqz::fft
