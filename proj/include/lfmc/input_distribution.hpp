#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "lfmc/errors.hpp"
#include "lfmc/stats.hpp"

namespace lfmc {

/// One independent input marginal, reached from a standard normal variate.
struct Marginal {
    enum class Kind { normal, lognormal, uniform };
    Kind kind = Kind::normal;
    double a = 0.0;  // normal: mean; lognormal: mean of log; uniform: lower
    double b = 1.0;  // normal: std;  lognormal: std of log;  uniform: upper

    bool operator==(const Marginal&) const = default;

    [[nodiscard]] double from_standard_normal(double u) const {
        switch (kind) {
            case Kind::normal: return a + b * u;
            case Kind::lognormal: return std::exp(a + b * u);
            case Kind::uniform: return a + (b - a) * normal_cdf(u);
        }
        return u;
    }

    void validate() const {
        if (kind == Kind::uniform ? !(b > a) : !(b > 0.0))
            throw InputError("marginal has non-positive spread");
    }
};

/// Joint input distribution q as independent marginals. Sampling, MCMC and
/// the GP corrections all live in the standard-normal space; models are fed
/// the mapped physical point.
class InputDistribution {
public:
    InputDistribution() = default;
    explicit InputDistribution(std::vector<Marginal> marginals) : marginals_(std::move(marginals)) {
        for (const auto& m : marginals_) m.validate();
    }

    static InputDistribution standard_normal(std::size_t dim) {
        return InputDistribution(std::vector<Marginal>(dim));
    }

    [[nodiscard]] std::size_t dim() const { return marginals_.size(); }
    [[nodiscard]] const std::vector<Marginal>& marginals() const { return marginals_; }

    [[nodiscard]] bool is_identity() const {
        for (const auto& m : marginals_)
            if (m.kind != Marginal::Kind::normal || m.a != 0.0 || m.b != 1.0) return false;
        return true;
    }

    [[nodiscard]] std::vector<double> to_physical(std::span<const double> u) const {
        if (u.size() != dim()) throw InputError("point has wrong dimension for input distribution");
        std::vector<double> x(u.size());
        for (std::size_t j = 0; j < u.size(); ++j) x[j] = marginals_[j].from_standard_normal(u[j]);
        return x;
    }

private:
    std::vector<Marginal> marginals_;
};

}  // namespace lfmc
