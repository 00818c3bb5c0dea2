#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "lfmc/errors.hpp"

namespace lfmc {

/// Standard normal CDF. Handles +-infinity.
inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

/// Quantile of already-sorted data, linear interpolation between order
/// statistics at rank p * (n - 1).
inline double sorted_quantile(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw InputError("quantile of empty sample");
    if (sorted.size() == 1) return sorted.front();
    const double h = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double quantile(std::span<const double> values, double p) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return sorted_quantile(sorted, p);
}

/// Quantile of a growing sample, queried after every insertion.
class RunningQuantile {
public:
    explicit RunningQuantile(double p) : p_(p) {}

    void insert(double value) {
        sorted_.insert(std::upper_bound(sorted_.begin(), sorted_.end(), value), value);
    }

    [[nodiscard]] std::size_t size() const { return sorted_.size(); }

    [[nodiscard]] double value() const { return sorted_quantile(sorted_, p_); }

private:
    double p_;
    std::vector<double> sorted_;
};

}  // namespace lfmc
