#pragma once

// Analytical HF/LF families: the four-branch function with its branches as
// LF models, and the 2-d Rastrigin function with two LF groupings.
// Inputs are uncorrelated standard normal; failure is response <= 0.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lfmc/errors.hpp"
#include "lfmc/surrogate.hpp"

namespace lfmc::bench {

enum class Benchmark { four_branch, rastrigin_type1, rastrigin_type2 };

inline std::string to_string(Benchmark b) {
    switch (b) {
        case Benchmark::four_branch: return "four_branch";
        case Benchmark::rastrigin_type1: return "rastrigin_type1";
        case Benchmark::rastrigin_type2: return "rastrigin_type2";
    }
    return "?";
}

inline Benchmark benchmark_from_string(std::string_view name) {
    if (name == "four_branch") return Benchmark::four_branch;
    if (name == "rastrigin_type1") return Benchmark::rastrigin_type1;
    if (name == "rastrigin_type2") return Benchmark::rastrigin_type2;
    throw InputError("unknown benchmark '" + std::string(name) + "'");
}

inline double four_branch_lf(int branch, std::span<const double> x) {
    const double x1 = x[0];
    const double x2 = x[1];
    const double d = x1 - x2;
    switch (branch) {
        case 1: return 3.0 + d * d / 10.0 - (x1 + x2) / std::numbers::sqrt2;
        case 2: return 3.0 + d * d / 10.0 + (x1 + x2) / std::numbers::sqrt2;
        case 3: return d + 6.0 / std::numbers::sqrt2;
        case 4: return -d + 6.0 / std::numbers::sqrt2;
        default: throw InputError("four-branch LF index must be 1..4");
    }
}

inline double four_branch_hf(std::span<const double> x) {
    return std::min({four_branch_lf(1, x), four_branch_lf(2, x), four_branch_lf(3, x), four_branch_lf(4, x)});
}

namespace detail {
inline double rastrigin_term(double v) { return v * v - 5.0 * std::cos(2.0 * std::numbers::pi * v); }
}  // namespace detail

inline double rastrigin_hf(std::span<const double> x) {
    return 10.0 - detail::rastrigin_term(x[0]) - detail::rastrigin_term(x[1]);
}

/// LF models on the full 2-d point. Type 1 L_i depends on x_i only; Type 2
/// splits the quadratic (L_1) and cosine (L_2) parts.
inline double rastrigin_lf(int type, int index, std::span<const double> x) {
    if (type == 1) {
        if (index != 1 && index != 2) throw InputError("Rastrigin LF index must be 1 or 2");
        return 10.0 - detail::rastrigin_term(x[static_cast<std::size_t>(index - 1)]);
    }
    if (type == 2) {
        const double c = 2.0 * std::numbers::pi;
        if (index == 1) return 10.0 - (x[0] * x[0] + x[1] * x[1]);
        if (index == 2) return 10.0 + 5.0 * std::cos(c * x[0]) + 5.0 * std::cos(c * x[1]);
        throw InputError("Rastrigin LF index must be 1 or 2");
    }
    throw InputError("Rastrigin LF type must be 1 or 2");
}

/// Unfitted ensemble (no corrections yet) with tau = 1 for every model.
inline ModelEnsemble make_ensemble(Benchmark b, Strategy strategy) {
    ModelEnsemble e;
    e.strategy = strategy;
    e.inputs = InputDistribution::standard_normal(2);
    const std::vector<std::size_t> both{0, 1};
    switch (b) {
        case Benchmark::four_branch:
            e.hf = {0, [](std::span<const double> x) { return four_branch_hf(x); }, both, 1.0};
            for (int i = 1; i <= 4; ++i)
                e.lfs.push_back({i, [i](std::span<const double> x) { return four_branch_lf(i, x); }, both, 1.0});
            break;
        case Benchmark::rastrigin_type1:
            e.hf = {0, [](std::span<const double> x) { return rastrigin_hf(x); }, both, 1.0};
            // each Type 1 model only sees its own coordinate
            for (int i = 1; i <= 2; ++i)
                e.lfs.push_back({i, [](std::span<const double> xi) { return 10.0 - detail::rastrigin_term(xi[0]); },
                                 {static_cast<std::size_t>(i - 1)}, 1.0});
            break;
        case Benchmark::rastrigin_type2:
            e.hf = {0, [](std::span<const double> x) { return rastrigin_hf(x); }, both, 1.0};
            for (int i = 1; i <= 2; ++i)
                e.lfs.push_back({i, [i](std::span<const double> x) { return rastrigin_lf(2, i, x); }, both, 1.0});
            break;
    }
    e.cost = CostModel::uniform(e.lfs.size());
    return e;
}

}  // namespace lfmc::bench
