#pragma once

// Derivative-free simplex minimization (Nelder-Mead) inside a box.  Trial points are
// projected onto the box, so every evaluated point is feasible.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace sqz::opt {

struct Box {
    std::vector<double> lower;
    std::vector<double> upper;

    void project(std::span<double> x) const {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
    }
};

struct SimplexOptions {
    std::size_t max_evaluations = 4000;
    double f_tolerance = 1e-14;   ///< spread of simplex values
    double x_tolerance = 1e-10;   ///< simplex diameter
    double initial_step = 0.05;   ///< relative to the box width
};

struct SimplexResult {
    std::vector<double> x;
    double value = 0.0;
    std::size_t evaluations = 0;
    bool converged = false;
};

using Objective = std::function<double(std::span<const double>)>;

[[nodiscard]] inline SimplexResult nelder_mead(const Objective& f, std::vector<double> start, const Box& box,
                                               const SimplexOptions& opt = {}) {
    const std::size_t n = start.size();
    if (n == 0 || box.lower.size() != n || box.upper.size() != n)
        throw std::invalid_argument("nelder_mead: dimension mismatch");
    box.project(start);

    std::vector<std::vector<double>> pts(n + 1, start);
    for (std::size_t i = 0; i < n; ++i) {
        const double step = opt.initial_step * (box.upper[i] - box.lower[i]);
        pts[i + 1][i] += pts[i + 1][i] + step <= box.upper[i] ? step : -step;
        box.project(pts[i + 1]);
    }
    SimplexResult res;
    const auto eval = [&](const std::vector<double>& x) {
        ++res.evaluations;
        return f(x);
    };
    std::vector<double> vals(n + 1);
    for (std::size_t i = 0; i <= n; ++i) vals[i] = eval(pts[i]);

    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), trial(n), trial2(n);
    const auto point_along = [&](double t, std::vector<double>& out, const std::vector<double>& worst) {
        for (std::size_t k = 0; k < n; ++k) out[k] = centroid[k] + t * (worst[k] - centroid[k]);
        box.project(out);
    };

    while (res.evaluations < opt.max_evaluations) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];

        double diameter = 0.0;
        for (std::size_t i = 0; i <= n; ++i)
            for (std::size_t k = 0; k < n; ++k) diameter = std::max(diameter, std::abs(pts[i][k] - pts[best][k]));
        if (std::abs(vals[worst] - vals[best]) <= opt.f_tolerance * (1.0 + std::abs(vals[best])) &&
            diameter <= opt.x_tolerance * (1.0 + std::sqrt(std::inner_product(pts[best].begin(), pts[best].end(),
                                                                               pts[best].begin(), 0.0)))) {
            res.converged = true;
            break;
        }

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i <= n; ++i)
            if (i != worst)
                for (std::size_t k = 0; k < n; ++k) centroid[k] += pts[i][k] / static_cast<double>(n);

        point_along(-1.0, trial, pts[worst]);
        const double fr = eval(trial);
        if (fr < vals[best]) {
            point_along(-2.0, trial2, pts[worst]);
            const double fe = eval(trial2);
            if (fe < fr) {
                pts[worst] = trial2;
                vals[worst] = fe;
            } else {
                pts[worst] = trial;
                vals[worst] = fr;
            }
        } else if (fr < vals[second]) {
            pts[worst] = trial;
            vals[worst] = fr;
        } else {
            const bool outside = fr < vals[worst];
            point_along(outside ? -0.5 : 0.5, trial2, pts[worst]);
            const double fc = eval(trial2);
            if (fc < (outside ? fr : vals[worst])) {
                pts[worst] = trial2;
                vals[worst] = fc;
            } else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (std::size_t k = 0; k < n; ++k) pts[i][k] = pts[best][k] + 0.5 * (pts[i][k] - pts[best][k]);
                    vals[i] = eval(pts[i]);
                }
            }
        }
    }
    const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
    res.x = pts[best];
    res.value = vals[best];
    return res;
}

}  // namespace sqz::opt
