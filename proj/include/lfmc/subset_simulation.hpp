#pragma once

// Subset simulation driven by the actively learned multi-fidelity surrogate.
//
// Flow: an initial design trains every correction on H - L_i; subset 1 draws
// crude Monte Carlo samples, later subsets grow n_chains Markov chains from
// seeds at or below the previous threshold. Every sample is scored by the
// surrogate; when U_s < U_T the HF model is called instead, its response is
// stored with U = inf, and the corrections that took part are retrained.
// Thresholds are running pi-quantiles of the responses generated so far.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lfmc/errors.hpp"
#include "lfmc/gp_regression.hpp"
#include "lfmc/input_distribution.hpp"
#include "lfmc/rng.hpp"
#include "lfmc/stats.hpp"
#include "lfmc/surrogate.hpp"

namespace lfmc {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class SeedSelection { lowest_response, random };

struct RunConfig {
    int n_init = 20;
    int n_pts = 20000;
    int n_chains = 100;
    double pi_target = 0.1;
    double failure_threshold = 0.0;
    double u_threshold = 2.0;
    int max_subsets = 10;
    std::vector<double> proposal_scale;  // per dimension; empty -> 1.0 everywhere
    std::uint64_t seed = 1;
    SeedSelection seed_selection = SeedSelection::random;

    // Correction GPs.
    gp::KernelFamily kernel = gp::KernelFamily::squared_exponential;
    int n_starts = 8;             // multi-start count for the initial fit
    int reoptimize_stride = 1;    // re-optimize hyperparameters every k-th insertion per GP
    int retrain_starts = 1;       // starts when re-optimizing after an insertion (start 0 = warm)
    int max_optimizer_evaluations = 200;
    double retrain_step = 0.25;      // initial simplex edge for warm-started refits
    double retrain_tolerance = 1e-4; // NLL spread stopping rule for warm-started refits

    bool operator==(const RunConfig&) const = default;

    [[nodiscard]] int n_spc() const { return n_chains > 0 ? n_pts / n_chains : 0; }

    [[nodiscard]] double scale(std::size_t j) const {
        return proposal_scale.empty() ? 1.0 : proposal_scale[j];
    }

    void validate(std::size_t dim) const {
        if (n_init < 2) throw ConfigError("n_init", "must be >= 2");
        if (n_pts < 1) throw ConfigError("n_pts", "must be positive");
        if (n_chains < 1) throw ConfigError("n_chains", "must be positive");
        if (n_pts % n_chains != 0) throw ConfigError("n_pts", "must be divisible by n_chains");
        if (!(pi_target > 0.0 && pi_target < 1.0)) throw ConfigError("pi_target", "must lie in (0, 1)");
        if (std::isnan(failure_threshold)) throw ConfigError("failure_threshold", "is NaN");
        if (!(u_threshold >= 0.0)) throw ConfigError("u_threshold", "must be non-negative");
        if (max_subsets < 1) throw ConfigError("max_subsets", "must be positive");
        if (!proposal_scale.empty() && proposal_scale.size() != dim)
            throw ConfigError("proposal_scale", "needs one entry per input dimension");
        for (double w : proposal_scale)
            if (!(w >= 0.0)) throw ConfigError("proposal_scale", "must be non-negative");
        if (n_starts < 1) throw ConfigError("gp.n_starts", "must be positive");
        if (reoptimize_stride < 1) throw ConfigError("gp.reoptimize_stride", "must be positive");
        if (retrain_starts < 1) throw ConfigError("gp.retrain_starts", "must be positive");
        if (max_optimizer_evaluations < 1) throw ConfigError("gp.max_optimizer_evaluations", "must be positive");
        if (!(retrain_step > 0.0)) throw ConfigError("gp.retrain_step", "must be positive");
        if (!(retrain_tolerance > 0.0)) throw ConfigError("gp.retrain_tolerance", "must be positive");
    }
};

/// One stored chain state: the sampling-space point and what was recorded there.
struct ChainState {
    std::vector<double> x;
    double response = 0.0;
    double u = 0.0;
    bool hf = false;
    int model = 0;  // LF id used by LFDS/LFSS, 0 when none
};

/// Per-subset arrays, laid out chain-major: slot = chain * n_spc + m.
struct SubsetRecord {
    int index = 1;
    std::size_t n_chains = 0;
    std::size_t n_spc = 0;
    std::size_t dim = 0;

    std::vector<double> samples;  // slot * dim + j, sampling space
    std::vector<double> responses;
    std::vector<double> u_values;
    std::vector<std::uint8_t> hf_flags;   // stored response came from the HF model
    std::vector<int> selected_model;      // LF id behind the stored response, 0 when none

    // What was called while generating each slot, including rejected candidates.
    std::vector<std::uint32_t> lf_call_mask;  // bit i-1 set when LF id i was called
    std::vector<std::uint8_t> hf_called;

    double threshold = 0.0;
    double cond_prob = 0.0;
    double delta = 0.0;
    bool final = false;
    std::vector<ChainState> seeds_out;
    long hf_calls = 0;
    std::vector<long> lf_calls;

    [[nodiscard]] std::size_t slots() const { return n_chains * n_spc; }
    [[nodiscard]] std::span<const double> sample(std::size_t slot) const {
        return {samples.data() + slot * dim, dim};
    }
};

struct SubsetSummary {
    int index = 0;
    double threshold = 0.0;
    double cond_prob = 0.0;
    double delta = 0.0;
    long hf_calls = 0;
    std::vector<long> lf_calls;
};

struct FailureEstimate {
    double p_f = 0.0;
    double cov = 0.0;
    int n_subsets = 0;
    long total_hf_calls = 0;  // includes the initial design
    std::vector<long> total_lf_calls;
    long total_samples = 0;   // n_pts per completed subset
    bool incomplete = false;
    std::vector<SubsetSummary> per_subset;
};

/// Thrown when max_subsets is reached before the threshold hits F. Carries
/// the partial estimate and the records produced so far.
class NonConvergenceError : public std::runtime_error {
public:
    NonConvergenceError(FailureEstimate partial_estimate, std::vector<SubsetRecord> partial_records)
        : std::runtime_error("subset simulation did not reach the failure threshold within max_subsets"),
          partial(std::move(partial_estimate)),
          records(std::move(partial_records)) {}

    FailureEstimate partial;
    std::vector<SubsetRecord> records;
};

// ---------------------------------------------------------------------------
// Estimators

/// Probability that a sample truly fails given its U value and the
/// surrogate's prediction. U = inf (HF responses) yields exactly 0 or 1.
inline double point_failure_probability(double u, bool predicted_failure) {
    return predicted_failure ? normal_cdf(u) : normal_cdf(-u);
}

inline std::vector<double> point_failure_probabilities(const SubsetRecord& rec) {
    std::vector<double> out(rec.slots());
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = point_failure_probability(rec.u_values[k], rec.responses[k] <= rec.threshold);
    return out;
}

inline double mean_probability(std::span<const double> pf) {
    return std::accumulate(pf.begin(), pf.end(), 0.0) / static_cast<double>(pf.size());
}

inline double first_subset_cov(double p1, std::size_t n_pts) {
    return std::sqrt((1.0 - p1) / (p1 * static_cast<double>(n_pts)));
}

/// R_s(lag) over chain-major point-failure probabilities.
inline double chain_autocovariance(std::span<const double> pf, std::size_t n_chains, std::size_t n_spc,
                                   std::size_t lag, double p) {
    double sum = 0.0;
    for (std::size_t l = 0; l < n_chains; ++l) {
        const double* row = pf.data() + l * n_spc;
        for (std::size_t m = 0; m + lag < n_spc; ++m) sum += row[m] * row[m + lag];
    }
    const double count = static_cast<double>(n_chains * n_spc - lag * n_chains);
    return sum / count - p * p;
}

/// gamma_s correction for chain correlation; R_s(0) uses the Bernoulli form
/// P(1 - P), and rho is taken as 0 when that variance vanishes.
inline double chain_correlation_factor(std::span<const double> pf, std::size_t n_chains, std::size_t n_spc,
                                       double p) {
    const double r0 = p * (1.0 - p);
    if (r0 == 0.0) return 0.0;
    double g = 0.0;
    for (std::size_t lag = 1; lag < n_spc; ++lag) {
        const double rho = chain_autocovariance(pf, n_chains, n_spc, lag, p) / r0;
        g += (1.0 - static_cast<double>(lag) / static_cast<double>(n_spc)) * rho;
    }
    return 2.0 * g;
}

inline double intermediate_subset_cov(std::span<const double> pf, std::size_t n_chains, std::size_t n_spc,
                                      double p) {
    const double gamma = chain_correlation_factor(pf, n_chains, n_spc, p);
    return std::sqrt((1.0 - p) / (p * static_cast<double>(n_chains * n_spc)) * (1.0 + gamma));
}

// ---------------------------------------------------------------------------
// MCMC

/// Component-wise modified Metropolis step targeting the standard normal:
/// each coordinate proposes a uniform move of half-width `scale[j]` and keeps
/// it with probability min(1, phi(xi) / phi(x_j)). Two uniforms are drawn per
/// coordinate regardless of outcome.
inline std::vector<double> mcmc_propose(std::span<const double> current, std::span<const double> scale,
                                        Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> candidate(current.begin(), current.end());
    for (std::size_t j = 0; j < current.size(); ++j) {
        const double step = scale[j] * (2.0 * unif(rng) - 1.0);
        const double accept = unif(rng);
        const double xi = current[j] + step;
        const double ratio = std::exp(-0.5 * (xi * xi - current[j] * current[j]));
        if (accept < ratio) candidate[j] = xi;
    }
    return candidate;
}

// ---------------------------------------------------------------------------
// Driver

class LfmcRunner {
public:
    LfmcRunner(ModelEnsemble ensemble, RunConfig cfg)
        : ensemble_(std::move(ensemble)), cfg_(std::move(cfg)), streams_(cfg_.seed) {
        ensemble_.validate();
        cfg_.validate(ensemble_.dim());
        lf_calls_.assign(ensemble_.size(), 0);
        insertions_.assign(ensemble_.size(), 0);
        scale_.resize(ensemble_.dim());
        for (std::size_t j = 0; j < scale_.size(); ++j) scale_[j] = cfg_.scale(j);
        lfss_rng_ = streams_.stream("lfss-selection");
    }

    [[nodiscard]] const ModelEnsemble& ensemble() const { return ensemble_; }
    [[nodiscard]] const RunConfig& config() const { return cfg_; }
    [[nodiscard]] long hf_calls() const { return hf_calls_; }
    [[nodiscard]] const std::vector<long>& lf_calls() const { return lf_calls_; }
    [[nodiscard]] const std::vector<SubsetRecord>& records() const { return records_; }
    [[nodiscard]] long duplicate_insertions() const { return duplicates_; }

    /// Called after each subset is finished, before the next one starts.
    void on_subset_complete(std::function<void(const SubsetRecord&)> callback) {
        on_subset_ = std::move(callback);
    }

    /// Draws n_init points, evaluates HF and every LF there and fits each
    /// correction to H - L_i.
    void initial_phase() {
        const std::size_t d = ensemble_.dim();
        const std::size_t n = ensemble_.size();
        Rng rng = streams_.stream("init-doe");
        std::normal_distribution<double> normal;
        std::vector<std::vector<double>> points(static_cast<std::size_t>(cfg_.n_init), std::vector<double>(d));
        std::vector<std::vector<double>> targets(n, std::vector<double>(points.size()));
        for (std::size_t k = 0; k < points.size(); ++k) {
            for (double& v : points[k]) v = normal(rng);
            const auto x = ensemble_.model_point(points[k]);
            const double h = guarded([&] { return ensemble_.hf(x); }, points[k]);
            ++hf_calls_;
            for (std::size_t i = 0; i < n; ++i) {
                targets[i][k] = h - guarded([&] { return ensemble_.lfs[i](x); }, points[k]);
                ++lf_calls_[i];
            }
        }
        ensemble_.corrections.clear();
        for (std::size_t i = 0; i < n; ++i) {
            auto opts = fit_options(cfg_.n_starts, streams_.stream_seed("gp-multistart", i, 0));
            gp::KernelConfig init;
            init.family = cfg_.kernel;
            ensemble_.corrections.push_back(
                gp::GaussianProcess::fit(gp::TrainingSet::make(points, targets[i]), init, opts));
        }
    }

    /// Subset 1: crude Monte Carlo with a running threshold.
    SubsetRecord run_first_subset() {
        if (ensemble_.corrections.size() != ensemble_.size())
            throw InputError("initial phase has not been run");
        SubsetRecord rec = new_record(1);
        Rng rng = streams_.stream("subset-1-mc");
        std::normal_distribution<double> normal;
        RunningQuantile running(cfg_.pi_target);
        std::vector<double> u(rec.dim);

        for (std::size_t l = 0; l < rec.n_chains; ++l) {
            for (std::size_t m = 0; m < rec.n_spc; ++m) {
                for (double& v : u) v = normal(rng);
                const double threshold = running_threshold(running, kInf);
                const std::size_t slot = l * rec.n_spc + m;
                const Outcome out = evaluate_point(u, threshold, rec);
                store(rec, slot, u, out);
                rec.lf_call_mask[slot] = out.lf_mask;
                rec.hf_called[slot] = out.hf;
                running.insert(out.response);
            }
        }
        finish_subset(rec);
        return rec;
    }

    /// Subset s >= 2: Markov chains grown from `prev.seeds_out`. Candidates
    /// above the previous threshold are rejected by repeating the chain state.
    SubsetRecord run_subsequent_subset(const SubsetRecord& prev, int s) {
        if (prev.seeds_out.size() != static_cast<std::size_t>(cfg_.n_chains))
            throw InputError("previous subset has no seeds");
        SubsetRecord rec = new_record(s);
        const double prev_threshold = prev.threshold;
        RunningQuantile running(cfg_.pi_target);

        for (std::size_t l = 0; l < rec.n_chains; ++l) {
            Rng rng = streams_.stream("mcmc-chain", static_cast<std::uint64_t>(s), l);
            ChainState state = prev.seeds_out[l];
            for (std::size_t m = 0; m < rec.n_spc; ++m) {
                const std::size_t slot = l * rec.n_spc + m;
                auto candidate = mcmc_propose(state.x, scale_, rng);
                if (candidate != state.x) {
                    const double threshold = running_threshold(running, prev_threshold);
                    const Outcome out = evaluate_point(candidate, threshold, rec);
                    rec.lf_call_mask[slot] = out.lf_mask;
                    rec.hf_called[slot] = out.hf;
                    if (!(out.response > prev_threshold))
                        state = ChainState{std::move(candidate), out.response, out.u, out.hf, out.model};
                }
                store(rec, slot, state);
                running.insert(state.response);
            }
        }
        finish_subset(rec);
        return rec;
    }

    /// Full run: initial design, subset 1, then subsets until F_s = F.
    FailureEstimate run() {
        initial_phase();
        records_.clear();
        records_.push_back(run_first_subset());
        if (on_subset_) on_subset_(records_.back());
        while (!records_.back().final) {
            if (static_cast<int>(records_.size()) >= cfg_.max_subsets) {
                auto partial = estimate();
                partial.incomplete = true;
                throw NonConvergenceError(std::move(partial), records_);
            }
            const SubsetRecord& prev = records_.back();
            records_.push_back(run_subsequent_subset(prev, prev.index + 1));
            if (on_subset_) on_subset_(records_.back());
        }
        return estimate();
    }

    /// P_f and COV from the records produced so far.
    [[nodiscard]] FailureEstimate estimate() const {
        FailureEstimate est;
        est.p_f = records_.empty() ? 0.0 : 1.0;
        double var = 0.0;
        for (const auto& r : records_) {
            est.p_f *= r.cond_prob;
            var += r.delta * r.delta;
            est.per_subset.push_back({r.index, r.threshold, r.cond_prob, r.delta, r.hf_calls, r.lf_calls});
            est.total_samples += static_cast<long>(r.slots());
        }
        est.cov = std::sqrt(var);
        est.n_subsets = static_cast<int>(records_.size());
        est.total_hf_calls = hf_calls_;
        est.total_lf_calls = lf_calls_;
        return est;
    }

private:
    struct Outcome {
        double response;
        double u;
        bool hf;
        int model;
        std::uint32_t lf_mask;
    };

    /// Re-throws model failures with the offending point attached.
    template <class F>
    static auto guarded(F&& f, std::span<const double> point) -> decltype(f()) {
        try {
            return f();
        } catch (const ModelEvaluationError& e) {
            std::string where = "[";
            for (std::size_t j = 0; j < point.size(); ++j)
                where += (j ? ", " : "") + std::to_string(point[j]);
            throw ModelEvaluationError(std::string(e.what()) + " at sampling-space point " + where + "]");
        }
    }

    [[nodiscard]] gp::FitOptions fit_options(int starts, std::uint64_t seed) const {
        gp::FitOptions o;
        o.n_starts = starts;
        o.seed = seed;
        o.max_evaluations = cfg_.max_optimizer_evaluations;
        return o;
    }

    [[nodiscard]] SubsetRecord new_record(int s) const {
        SubsetRecord rec;
        rec.index = s;
        rec.n_chains = static_cast<std::size_t>(cfg_.n_chains);
        rec.n_spc = static_cast<std::size_t>(cfg_.n_spc());
        rec.dim = ensemble_.dim();
        const std::size_t n = rec.slots();
        rec.samples.resize(n * rec.dim);
        rec.responses.resize(n);
        rec.u_values.resize(n);
        rec.hf_flags.resize(n);
        rec.selected_model.resize(n);
        rec.lf_call_mask.assign(n, 0);
        rec.hf_called.assign(n, 0);
        rec.lf_calls.assign(ensemble_.size(), 0);
        return rec;
    }

    /// Threshold used for U while a subset is being filled: the running
    /// quantile (floored at F) once enough responses exist, else `fallback`.
    [[nodiscard]] double running_threshold(const RunningQuantile& running, double fallback) const {
        const auto min_count = static_cast<std::size_t>(std::max(10, cfg_.n_chains));
        if (running.size() < min_count) return fallback;
        return std::max(cfg_.failure_threshold, running.value());
    }

    [[nodiscard]] bool sufficient(double u) const {
        return std::isfinite(cfg_.u_threshold) && u >= cfg_.u_threshold;
    }

    Outcome evaluate_point(std::span<const double> u, double threshold, SubsetRecord& rec) {
        const SurrogateEvaluation ev =
            guarded([&] { return evaluate_surrogate(ensemble_, u, threshold, lfss_rng_); }, u);
        std::uint32_t mask = 0;
        for (const auto& [id, value] : ev.lf_values_evaluated) {
            const auto i = static_cast<std::size_t>(id - 1);
            ++lf_calls_[i];
            ++rec.lf_calls[i];
            mask |= 1u << i;
        }
        const int model = ev.selected_model.value_or(0);
        if (sufficient(ev.u_value)) return {ev.s_value, ev.u_value, false, model, mask};

        const auto x = ensemble_.model_point(u);
        const double h = guarded([&] { return ensemble_.hf(x); }, u);
        ++hf_calls_;
        ++rec.hf_calls;
        // With U_T = inf the surrogate can never be accepted, so retraining
        // would only grow the GPs.
        if (std::isfinite(cfg_.u_threshold)) {
            for (const auto& [id, value] : ev.lf_values_evaluated) retrain(static_cast<std::size_t>(id - 1), u, h - value);
        }
        return {h, kInf, true, model, mask};
    }

    void retrain(std::size_t i, std::span<const double> u, double target) {
        const int count = ++insertions_[i];
        const bool reopt = count % cfg_.reoptimize_stride == 0;
        auto opts = fit_options(cfg_.retrain_starts,
                                streams_.stream_seed("gp-multistart", i, static_cast<std::uint64_t>(count)));
        opts.initial_step = cfg_.retrain_step;
        opts.tolerance = cfg_.retrain_tolerance;
        auto result = gp::add_point_and_retrain(ensemble_.corrections[i], u, target, reopt, opts);
        if (result.duplicate) {
            ++duplicates_;
            return;
        }
        ensemble_.corrections[i] = std::move(result.gp);
    }

    static void store(SubsetRecord& rec, std::size_t slot, std::span<const double> u, const Outcome& out) {
        std::copy(u.begin(), u.end(), rec.samples.begin() + static_cast<std::ptrdiff_t>(slot * rec.dim));
        rec.responses[slot] = out.response;
        rec.u_values[slot] = out.u;
        rec.hf_flags[slot] = out.hf;
        rec.selected_model[slot] = out.model;
    }

    static void store(SubsetRecord& rec, std::size_t slot, const ChainState& st) {
        std::copy(st.x.begin(), st.x.end(), rec.samples.begin() + static_cast<std::ptrdiff_t>(slot * rec.dim));
        rec.responses[slot] = st.response;
        rec.u_values[slot] = st.u;
        rec.hf_flags[slot] = st.hf;
        rec.selected_model[slot] = st.model;
    }

    /// Final threshold, conditional probability, COV and (if not final) seeds.
    void finish_subset(SubsetRecord& rec) {
        rec.threshold = std::max(cfg_.failure_threshold, quantile(rec.responses, cfg_.pi_target));
        rec.final = rec.threshold == cfg_.failure_threshold;
        const auto pf = point_failure_probabilities(rec);
        rec.cond_prob = mean_probability(pf);
        rec.delta = rec.index == 1 ? first_subset_cov(rec.cond_prob, rec.slots())
                                   : intermediate_subset_cov(pf, rec.n_chains, rec.n_spc, rec.cond_prob);
        if (!rec.final) select_seeds(rec);
    }

    void select_seeds(SubsetRecord& rec) const {
        std::vector<std::size_t> eligible;
        for (std::size_t k = 0; k < rec.slots(); ++k)
            if (rec.responses[k] <= rec.threshold) eligible.push_back(k);
        if (eligible.size() < rec.n_chains)
            throw ConfigError("n_chains", "only " + std::to_string(eligible.size()) +
                                              " samples at or below the subset threshold; pi_target * n_pts "
                                              "must exceed n_chains");
        if (cfg_.seed_selection == SeedSelection::lowest_response) {
            std::stable_sort(eligible.begin(), eligible.end(),
                             [&](std::size_t a, std::size_t b) { return rec.responses[a] < rec.responses[b]; });
        } else {
            Rng rng = streams_.stream("seed-selection", static_cast<std::uint64_t>(rec.index));
            std::shuffle(eligible.begin(), eligible.end(), rng);
        }
        rec.seeds_out.clear();
        for (std::size_t r = 0; r < rec.n_chains; ++r) {
            const std::size_t k = eligible[r];
            const auto x = rec.sample(k);
            rec.seeds_out.push_back({std::vector<double>(x.begin(), x.end()), rec.responses[k], rec.u_values[k],
                                     rec.hf_flags[k] != 0, rec.selected_model[k]});
        }
    }

    ModelEnsemble ensemble_;
    RunConfig cfg_;
    RngStreams streams_;
    Rng lfss_rng_;
    std::vector<double> scale_;
    long hf_calls_ = 0;
    std::vector<long> lf_calls_;
    std::vector<int> insertions_;
    long duplicates_ = 0;
    std::vector<SubsetRecord> records_;
    std::function<void(const SubsetRecord&)> on_subset_;
};

/// Convenience wrapper: builds a runner and performs a full run.
inline FailureEstimate run(ModelEnsemble ensemble, const RunConfig& cfg) {
    LfmcRunner runner(std::move(ensemble), cfg);
    return runner.run();
}

}  // namespace lfmc
