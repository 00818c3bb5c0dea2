#pragma once

// Plain subset simulation with indicator estimators and the HF model only,
// written independently of the library driver. It draws from the same named
// random streams in the same order, so with every sample sent to the HF model
// the two must agree bit for bit.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "lfmc/rng.hpp"

namespace oracle {

struct ClassicalSusOptions {
    int n_pts = 2000;
    int n_chains = 100;
    double pi_target = 0.1;
    double failure_threshold = 0.0;
    int max_subsets = 10;
    double proposal_half_width = 1.0;
    std::uint64_t seed = 1;
};

struct ClassicalSusResult {
    std::vector<double> thresholds;
    std::vector<double> cond_probs;
    double p_f = 1.0;
    long hf_calls = 0;
};

inline double interpolated_quantile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double h = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

inline ClassicalSusResult classical_sus(const std::function<double(std::span<const double>)>& g, std::size_t dim,
                                        const ClassicalSusOptions& o) {
    const lfmc::RngStreams streams(o.seed);
    const auto n_spc = static_cast<std::size_t>(o.n_pts / o.n_chains);
    const auto n_chains = static_cast<std::size_t>(o.n_chains);
    const std::size_t n = n_chains * n_spc;
    ClassicalSusResult out;

    std::vector<std::vector<double>> xs(n, std::vector<double>(dim));
    std::vector<double> ys(n);
    {
        auto rng = streams.stream("subset-1-mc");
        std::normal_distribution<double> normal;
        for (std::size_t k = 0; k < n; ++k) {
            for (double& v : xs[k]) v = normal(rng);
            ys[k] = g(xs[k]);
            ++out.hf_calls;
        }
    }

    for (int s = 1;; ++s) {
        const double f_s = std::max(o.failure_threshold, interpolated_quantile(ys, o.pi_target));
        std::size_t hits = 0;
        for (double y : ys) hits += y <= f_s ? 1 : 0;
        const double p = static_cast<double>(hits) / static_cast<double>(n);
        out.thresholds.push_back(f_s);
        out.cond_probs.push_back(p);
        out.p_f *= p;
        if (f_s == o.failure_threshold || s >= o.max_subsets) break;

        std::vector<std::size_t> eligible;
        for (std::size_t k = 0; k < n; ++k)
            if (ys[k] <= f_s) eligible.push_back(k);
        auto pick = streams.stream("seed-selection", static_cast<std::uint64_t>(s));
        std::shuffle(eligible.begin(), eligible.end(), pick);

        std::vector<std::vector<double>> next_x(n);
        std::vector<double> next_y(n);
        for (std::size_t l = 0; l < n_chains; ++l) {
            auto rng = streams.stream("mcmc-chain", static_cast<std::uint64_t>(s + 1), l);
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            std::vector<double> x = xs[eligible[l]];
            double y = ys[eligible[l]];
            for (std::size_t m = 0; m < n_spc; ++m) {
                std::vector<double> cand = x;
                for (std::size_t j = 0; j < dim; ++j) {
                    const double xi = x[j] + o.proposal_half_width * (2.0 * unif(rng) - 1.0);
                    if (unif(rng) < std::exp(-0.5 * (xi * xi - x[j] * x[j]))) cand[j] = xi;
                }
                if (cand != x) {
                    const double yc = g(cand);
                    ++out.hf_calls;
                    if (yc <= f_s) {
                        x = cand;
                        y = yc;
                    }
                }
                next_x[l * n_spc + m] = x;
                next_y[l * n_spc + m] = y;
            }
        }
        xs = std::move(next_x);
        ys = std::move(next_y);
    }
    return out;
}

}  // namespace oracle
