#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

namespace lfmc::detail {

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    int evaluations = 0;
};

/// Derivative-free simplex minimization inside the box [lo, hi]^d.
/// Trial points are clamped onto the box. Stops when the spread of simplex
/// values drops below `ftol` or after `max_evals` objective calls.
template <class Objective>
NelderMeadResult nelder_mead_box(Objective&& f, std::vector<double> x0, double lo, double hi,
                                 double step, int max_evals, double ftol = 1e-7) {
    const std::size_t d = x0.size();
    auto clamp = [&](std::vector<double>& x) {
        for (double& v : x) v = std::clamp(v, lo, hi);
    };
    clamp(x0);

    std::vector<std::vector<double>> simplex(d + 1, x0);
    std::vector<double> values(d + 1);
    int evals = 0;
    auto eval = [&](const std::vector<double>& x) {
        ++evals;
        return f(x);
    };

    for (std::size_t i = 0; i < d; ++i) {
        simplex[i + 1][i] += (x0[i] + step <= hi) ? step : -step;
        clamp(simplex[i + 1]);
    }
    for (std::size_t i = 0; i <= d; ++i) values[i] = eval(simplex[i]);

    std::vector<std::size_t> order(d + 1);
    std::vector<double> centroid(d), trial(d), trial2(d);
    auto point = [&](double t, std::vector<double>& out, const std::vector<double>& worst) {
        for (std::size_t j = 0; j < d; ++j) out[j] = centroid[j] + t * (worst[j] - centroid[j]);
        clamp(out);
    };

    while (evals < max_evals) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[d > 0 ? d - 1 : 0];
        if (values[worst] - values[best] < ftol) break;

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i <= d; ++i) {
            if (i == worst) continue;
            for (std::size_t j = 0; j < d; ++j) centroid[j] += simplex[i][j] / static_cast<double>(d);
        }

        point(-1.0, trial, simplex[worst]);
        const double fr = eval(trial);
        if (fr < values[best]) {
            point(-2.0, trial2, simplex[worst]);
            const double fe = eval(trial2);
            if (fe < fr) {
                simplex[worst] = trial2;
                values[worst] = fe;
            } else {
                simplex[worst] = trial;
                values[worst] = fr;
            }
            continue;
        }
        if (fr < values[second]) {
            simplex[worst] = trial;
            values[worst] = fr;
            continue;
        }
        const bool outside = fr < values[worst];
        point(outside ? -0.5 : 0.5, trial2, simplex[worst]);
        const double fc = eval(trial2);
        if (fc < std::min(fr, values[worst])) {
            simplex[worst] = trial2;
            values[worst] = fc;
            continue;
        }
        // shrink toward the best vertex
        for (std::size_t i = 0; i <= d; ++i) {
            if (i == best) continue;
            for (std::size_t j = 0; j < d; ++j)
                simplex[i][j] = simplex[best][j] + 0.5 * (simplex[i][j] - simplex[best][j]);
            values[i] = eval(simplex[i]);
        }
    }

    const auto best = static_cast<std::size_t>(
        std::min_element(values.begin(), values.end()) - values.begin());
    return {simplex[best], values[best], evals};
}

}  // namespace lfmc::detail
