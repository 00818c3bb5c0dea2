#pragma once

// Local model probabilities.
//
// Each correction magnitude zeta_i = |G_i(x)| is folded-Gaussian with the
// GP's (mu_i, sigma_i). The probability that model i has the smallest
// (optionally cost-scaled) correction is
//
//     p_i = int_0^inf f_i(z) prod_{j != i} [1 - F_j(z)] dz
//
// All N integrals share one adaptive partition, so each node costs N pdf and
// N survival evaluations regardless of N.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lfmc/detail/gauss_kronrod.hpp"
#include "lfmc/errors.hpp"

namespace lfmc {

inline constexpr double kSigmaFloor = 1e-12;

struct FoldedGaussianParams {
    double mu = 0.0;
    double sigma = 1.0;
};

inline double folded_pdf(double z, FoldedGaussianParams p) {
    if (z < 0.0) return 0.0;
    const double s = std::max(p.sigma, kSigmaFloor);
    const double a = (z - p.mu) / s;
    const double b = (z + p.mu) / s;
    return (std::exp(-0.5 * a * a) + std::exp(-0.5 * b * b)) / (s * std::sqrt(2.0 * std::numbers::pi));
}

inline double folded_cdf(double z, FoldedGaussianParams p) {
    if (z < 0.0) return 0.0;
    const double s = std::max(p.sigma, kSigmaFloor) * std::numbers::sqrt2;
    return 0.5 * (std::erf((z - p.mu) / s) + std::erf((z + p.mu) / s));
}

/// 1 - F(z), computed with erfc so the upper tail keeps full precision.
inline double folded_survival(double z, FoldedGaussianParams p) {
    if (z < 0.0) return 1.0;
    const double s = std::max(p.sigma, kSigmaFloor) * std::numbers::sqrt2;
    return 0.5 * (std::erfc((z - p.mu) / s) + std::erfc((z + p.mu) / s));
}

/// Per-model computational complexity and the biasing exponent.
/// gamma(tau) = tau^beta unless `gamma_override` supplies the values.
struct CostModel {
    std::vector<double> tau;
    double beta = 0.0;
    std::optional<std::vector<double>> gamma_override;

    static CostModel uniform(std::size_t n) { return CostModel{std::vector<double>(n, 1.0), 0.0, {}}; }

    void validate(std::size_t n) const {
        if (tau.size() != n)
            throw InputError("cost model has " + std::to_string(tau.size()) + " entries for " +
                             std::to_string(n) + " models");
        for (double t : tau)
            if (!(t > 0.0)) throw InputError("tau values must be positive");
        if (!(beta >= 0.0)) throw InputError("beta must be non-negative");
        if (gamma_override) {
            if (gamma_override->size() != n) throw InputError("gamma_override has wrong length");
            for (double g : *gamma_override)
                if (!(g >= 1.0)) throw InputError("gamma values must be >= 1");
        }
    }

    [[nodiscard]] std::vector<double> gamma() const {
        if (gamma_override) return *gamma_override;
        std::vector<double> g(tau.size());
        for (std::size_t i = 0; i < tau.size(); ++i) g[i] = std::pow(tau[i], beta);
        return g;
    }
};

/// Divides by the minimum so the cheapest model has tau = 1.
inline std::vector<double> normalize_costs(std::span<const double> raw) {
    if (raw.empty()) throw InputError("no costs to normalize");
    for (double t : raw)
        if (!(t > 0.0)) throw InputError("costs must be positive");
    const double lo = *std::min_element(raw.begin(), raw.end());
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] / lo;
    return out;
}

struct QuadratureOptions {
    double abs_tol = 1e-10;
    int max_intervals = 4000;
};

struct ModelProbabilities {
    std::vector<double> values;  // renormalized to sum to 1
    double raw_sum = 1.0;        // sum before renormalization
    bool degenerate = false;     // every sigma at (numerical) zero
};

inline ModelProbabilities local_model_probabilities(std::span<const FoldedGaussianParams> params,
                                                    const QuadratureOptions& opts = {}) {
    const std::size_t n = params.size();
    if (n == 0) throw InputError("need at least one model");
    if (n == 1) return {{1.0}, 1.0, false};

    std::vector<double> m(n), s(n);
    double mu_scale = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = std::abs(params[i].mu);
        s[i] = std::max(params[i].sigma, kSigmaFloor);
        mu_scale = std::max(mu_scale, m[i]);
    }

    // A correction whose spread is negligible next to the magnitudes involved
    // is a point mass at |mu|: it wins outright against every model whose
    // magnitude is larger, so continuous models only compete below the
    // smallest such point.
    std::vector<bool> point(n);
    bool degenerate = true;
    double cutoff = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        point[i] = s[i] <= 1e-9 * mu_scale;
        if (point[i])
            cutoff = std::min(cutoff, m[i]);
        else
            degenerate = false;
    }

    std::vector<double> values(n, 0.0);
    double sum = 0.0;
    std::vector<std::size_t> cont;
    for (std::size_t i = 0; i < n; ++i)
        if (!point[i]) cont.push_back(i);

    double zmax = cutoff;
    if (!std::isfinite(zmax)) {
        zmax = 0.0;
        for (std::size_t i : cont) zmax = std::max(zmax, m[i] + 8.0 * s[i]);
    }

    if (!cont.empty() && zmax > 0.0) {
        // Break the domain where any density or survival function changes
        // shape so narrow peaks are never stepped over.
        std::vector<double> edges{0.0, zmax};
        for (std::size_t j : cont) {
            for (double k : {-6.0, -3.0, -1.0, 0.0, 1.0, 3.0, 6.0}) {
                const double at = m[j] + k * s[j];
                if (at > 0.0 && at < zmax) edges.push_back(at);
            }
            for (double k : {1.0, 3.0, 6.0}) {
                const double at = -m[j] + k * s[j];
                if (at > 0.0 && at < zmax) edges.push_back(at);
            }
        }
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

        const std::size_t nc = cont.size();
        std::vector<double> pdf(nc), surv(nc), suffix(nc + 1);
        const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
        auto integrand = [&](double z, double* out) {
            for (std::size_t c = 0; c < nc; ++c) {
                const std::size_t j = cont[c];
                const double a = (z - m[j]) / s[j];
                const double b = (z + m[j]) / s[j];
                pdf[c] = (std::exp(-0.5 * a * a) + std::exp(-0.5 * b * b)) * inv_sqrt2pi / s[j];
                surv[c] = 0.5 * (std::erfc(a / std::numbers::sqrt2) + std::erfc(b / std::numbers::sqrt2));
            }
            suffix[nc] = 1.0;
            for (std::size_t c = nc; c-- > 0;) suffix[c] = suffix[c + 1] * surv[c];
            double prefix = 1.0;
            for (std::size_t c = 0; c < nc; ++c) {
                out[c] = pdf[c] * prefix * suffix[c + 1];
                prefix *= surv[c];
            }
        };

        auto q = detail::integrate_gk15(integrand, edges, nc, opts.abs_tol, opts.max_intervals);
        if (!q.converged) throw NumericalError("model probability quadrature did not converge", q.integral);
        for (std::size_t c = 0; c < nc; ++c) values[cont[c]] = std::max(q.integral[c], 0.0);
    }

    if (std::isfinite(cutoff)) {
        // Mass left at the cutoff is shared by the point models sitting there.
        double survive = 1.0;
        for (std::size_t j : cont) survive *= folded_survival(cutoff, {m[j], s[j]});
        std::size_t ties = 0;
        for (std::size_t i = 0; i < n; ++i) ties += point[i] && m[i] == cutoff ? 1 : 0;
        for (std::size_t i = 0; i < n; ++i)
            if (point[i] && m[i] == cutoff) values[i] = survive / static_cast<double>(ties);
    }

    for (double v : values) sum += v;
    if (!(sum > 0.0)) throw NumericalError("model probabilities vanished", values);

    ModelProbabilities out;
    out.raw_sum = sum;
    out.degenerate = degenerate;
    out.values = std::move(values);
    for (double& v : out.values) v /= sum;
    return out;
}

/// Same as local_model_probabilities on zeta_i scaled by gamma(tau_i).
inline ModelProbabilities cost_biased_probabilities(std::span<const FoldedGaussianParams> params,
                                                    const CostModel& cost, const QuadratureOptions& opts = {}) {
    cost.validate(params.size());
    const auto g = cost.gamma();
    std::vector<FoldedGaussianParams> scaled(params.size());
    for (std::size_t i = 0; i < params.size(); ++i)
        scaled[i] = {g[i] * params[i].mu, g[i] * std::max(params[i].sigma, kSigmaFloor)};
    return local_model_probabilities(scaled, opts);
}

}  // namespace lfmc
