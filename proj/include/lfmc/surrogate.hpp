#pragma once

// Corrected low-fidelity models S_i = L_i + G_i and their assembly into the
// multi-fidelity surrogate S under model averaging (LFMA), deterministic
// selection (LFDS) or stochastic selection (LFSS).

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lfmc/errors.hpp"
#include "lfmc/gp_regression.hpp"
#include "lfmc/input_distribution.hpp"
#include "lfmc/model_probability.hpp"
#include "lfmc/rng.hpp"
#include "lfmc/stats.hpp"

namespace lfmc {

enum class Strategy { lfma, lfds, lfss };

inline std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::lfma: return "LFMA";
        case Strategy::lfds: return "LFDS";
        case Strategy::lfss: return "LFSS";
    }
    return "?";
}

/// A callable model plus the slice of the global input it consumes.
struct ModelHandle {
    using Evaluator = std::function<double(std::span<const double>)>;

    int id = 0;
    Evaluator evaluator;
    std::vector<std::size_t> input_projection;
    double cost_tau = 1.0;

    void validate(std::size_t global_dim) const {
        if (!evaluator) throw InputError("model " + std::to_string(id) + " has no evaluator");
        for (std::size_t k : input_projection)
            if (k >= global_dim)
                throw InputError("model " + std::to_string(id) + " projects input index " +
                                 std::to_string(k) + " outside dimension " + std::to_string(global_dim));
    }

    /// Evaluates at the global (physical) point. Non-finite output is an error.
    double operator()(std::span<const double> x) const {
        double local[16];
        std::vector<double> buf;
        double* p = local;
        if (input_projection.size() > 16) {
            buf.resize(input_projection.size());
            p = buf.data();
        }
        for (std::size_t k = 0; k < input_projection.size(); ++k) p[k] = x[input_projection[k]];
        const double y = evaluator(std::span<const double>(p, input_projection.size()));
        if (!std::isfinite(y))
            throw ModelEvaluationError("model " + std::to_string(id) + " returned a non-finite response");
        return y;
    }
};

/// One HF model, N LF models (ids 1..N in order), their corrections and cost
/// metadata. `inputs` maps the standard-normal sampling space to model inputs;
/// corrections are trained on the sampling-space point.
struct ModelEnsemble {
    ModelHandle hf;
    std::vector<ModelHandle> lfs;
    std::vector<gp::GaussianProcess> corrections;
    CostModel cost;
    Strategy strategy = Strategy::lfds;
    InputDistribution inputs;

    [[nodiscard]] std::size_t size() const { return lfs.size(); }
    [[nodiscard]] std::size_t dim() const { return inputs.dim(); }

    void validate() const {
        if (lfs.empty()) throw InputError("ensemble needs at least one LF model");
        hf.validate(dim());
        for (std::size_t i = 0; i < lfs.size(); ++i) {
            lfs[i].validate(dim());
            if (lfs[i].id != static_cast<int>(i + 1))
                throw InputError("LF model ids must be 1..N in order");
        }
        cost.validate(lfs.size());
        if (!corrections.empty() && corrections.size() != lfs.size())
            throw InputError("ensemble has " + std::to_string(corrections.size()) + " corrections for " +
                             std::to_string(lfs.size()) + " LF models");
    }

    [[nodiscard]] std::vector<double> model_point(std::span<const double> u) const {
        return inputs.to_physical(u);
    }
};

struct SurrogateEvaluation {
    double s_value = 0.0;
    double sigma = 0.0;
    double u_value = 0.0;
    std::vector<double> probabilities;
    std::vector<gp::Prediction> corrections;  // (mu_i, sigma_i) of every G_i
    std::map<int, double> lf_values_evaluated;
    std::optional<int> selected_model;
};

/// U = |S - F| / sigma with the degenerate conventions: sigma = 0 gives
/// +inf off the threshold and 0 on it.
inline double learning_function(double s_value, double sigma, double threshold) {
    const double gap = std::abs(s_value - threshold);
    if (sigma > 0.0) return gap / sigma;
    return gap > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

/// Evaluates S(u) and U_s(u) against the threshold. Only the LF models the
/// strategy needs are called; `rng` is drawn from only under LFSS.
inline SurrogateEvaluation evaluate_surrogate(const ModelEnsemble& ensemble, std::span<const double> u,
                                              double threshold, Rng& rng) {
    const std::size_t n = ensemble.size();
    if (ensemble.corrections.size() != n) throw InputError("corrections are not trained");
    if (std::isnan(threshold)) throw InputError("threshold is NaN");

    SurrogateEvaluation ev;
    ev.corrections.resize(n);
    std::vector<FoldedGaussianParams> folded(n);
    for (std::size_t i = 0; i < n; ++i) {
        ev.corrections[i] = ensemble.corrections[i].predict(u);
        folded[i] = {ev.corrections[i].mean, std::max(ev.corrections[i].std, kSigmaFloor)};
    }
    ev.probabilities = cost_biased_probabilities(folded, ensemble.cost).values;

    const auto x = ensemble.model_point(u);
    auto corrected = [&](std::size_t i) {
        const double l = ensemble.lfs[i](x);
        ev.lf_values_evaluated[ensemble.lfs[i].id] = l;
        return l + ev.corrections[i].mean;
    };

    if (ensemble.strategy == Strategy::lfma) {
        double s = 0.0;
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double p = ev.probabilities[i];
            s += p * corrected(i);
            v += (p * ev.corrections[i].std) * (p * ev.corrections[i].std);
        }
        ev.s_value = s;
        ev.sigma = std::sqrt(v);
    } else {
        std::size_t k = 0;
        if (ensemble.strategy == Strategy::lfds) {
            for (std::size_t i = 1; i < n; ++i)
                if (ev.probabilities[i] > ev.probabilities[k]) k = i;
        } else {
            const double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            double acc = 0.0;
            k = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += ev.probabilities[i];
                if (r < acc) {
                    k = i;
                    break;
                }
            }
        }
        ev.s_value = corrected(k);
        ev.sigma = ev.corrections[k].std;
        ev.selected_model = ensemble.lfs[k].id;
    }
    ev.u_value = learning_function(ev.s_value, ev.sigma, threshold);
    return ev;
}

/// 1 when the surrogate predicts failure (S <= F), else 0.
inline int classify(const SurrogateEvaluation& ev, double threshold) { return ev.s_value <= threshold ? 1 : 0; }

/// Probability that the surrogate's classification is wrong, Phi(-U).
inline double misclassification_prob(const SurrogateEvaluation& ev) { return normal_cdf(-ev.u_value); }

}  // namespace lfmc
