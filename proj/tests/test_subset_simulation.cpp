#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "classical_sus.hpp"
#include "oracles.hpp"
#include "lfmc/benchmarks.hpp"
#include "lfmc/subset_simulation.hpp"

using namespace lfmc;

namespace {

RunConfig small_config(std::uint64_t seed = 1) {
    RunConfig cfg;
    cfg.n_pts = 2000;
    cfg.n_chains = 100;
    cfg.seed = seed;
    return cfg;
}

// g(x) = a - x with one good and one poor LF model.
ModelEnsemble linear_ensemble(double a, Strategy strategy = Strategy::lfds) {
    ModelEnsemble e;
    e.strategy = strategy;
    e.inputs = InputDistribution::standard_normal(1);
    e.hf = {0, [a](std::span<const double> x) { return a - x[0]; }, {0}, 1.0};
    e.lfs.push_back({1, [a](std::span<const double> x) { return a - 1.1 * x[0]; }, {0}, 1.0});
    e.lfs.push_back({2, [a](std::span<const double> x) { return a - x[0] + 0.3 * std::sin(2 * x[0]); }, {0}, 1.0});
    e.cost = CostModel::uniform(2);
    return e;
}

}  // namespace

TEST(Estimators, PointFailureProbability) {
    const double inf = std::numeric_limits<double>::infinity();
    EXPECT_EQ(point_failure_probability(inf, true), 1.0);
    EXPECT_EQ(point_failure_probability(inf, false), 0.0);
    EXPECT_EQ(point_failure_probability(0.0, true), 0.5);
    EXPECT_EQ(point_failure_probability(0.0, false), 0.5);
    EXPECT_NEAR(point_failure_probability(2.0, false), 0.0227501319481792072, 1e-16);
}

TEST(Estimators, FirstSubsetCov) {
    EXPECT_NEAR(first_subset_cov(0.1, 5000), 0.042426406871192851464, 1e-15);
}

// Hand-computed on chains [1, 0, 1, 1] and [0, 0, 1, 0.5]: P = 9/16,
// R(1) = R(2) = 1/4 - 81/256, R(3) = 1/2 - 81/256, R(0) = 63/256,
// gamma = -19/63 and delta = sqrt(11/162).
TEST(Estimators, ToyChainArrayExact) {
    const std::vector<double> pf{1, 0, 1, 1, 0, 0, 1, 0.5};
    const double p = mean_probability(pf);
    EXPECT_EQ(p, 0.5625);
    EXPECT_EQ(chain_autocovariance(pf, 2, 4, 1, p), 0.25 - 0.31640625);
    EXPECT_EQ(chain_autocovariance(pf, 2, 4, 2, p), 0.25 - 0.31640625);
    EXPECT_EQ(chain_autocovariance(pf, 2, 4, 3, p), 0.5 - 0.31640625);
    EXPECT_NEAR(chain_correlation_factor(pf, 2, 4, p), -19.0 / 63.0, 1e-15);
    EXPECT_NEAR(intermediate_subset_cov(pf, 2, 4, p), std::sqrt(11.0 / 162.0), 1e-15);
}

TEST(Estimators, CertainFailureGivesZeroCov) {
    const std::vector<double> pf(12, 1.0);
    EXPECT_EQ(mean_probability(pf), 1.0);
    EXPECT_EQ(chain_correlation_factor(pf, 3, 4, 1.0), 0.0);
    EXPECT_EQ(intermediate_subset_cov(pf, 3, 4, 1.0), 0.0);
}

TEST(RunConfig, ValidationNamesTheField) {
    auto expect_field = [](RunConfig c, const std::string& field) {
        try {
            c.validate(2);
            ADD_FAILURE() << "expected ConfigError for " << field;
        } catch (const ConfigError& e) {
            EXPECT_EQ(e.field, field);
        }
    };
    RunConfig c;
    c.n_pts = 20001;
    expect_field(c, "n_pts");
    c = {};
    c.pi_target = 1.0;
    expect_field(c, "pi_target");
    c = {};
    c.n_init = 1;
    expect_field(c, "n_init");
    c = {};
    c.proposal_scale = {1.0};
    expect_field(c, "proposal_scale");
    c = {};
    c.u_threshold = -1;
    expect_field(c, "u_threshold");
    EXPECT_NO_THROW(RunConfig{}.validate(2));
    EXPECT_EQ(RunConfig{}.n_spc(), 200);
}

TEST(Mcmc, ZeroScaleLeavesPointUnchanged) {
    Rng rng(3);
    const std::vector<double> x{0.4, -1.2};
    const std::vector<double> zero{0.0, 0.0};
    EXPECT_EQ(mcmc_propose(x, zero, rng), x);
}

TEST(Mcmc, UnconstrainedChainSamplesStandardNormal) {
    Rng rng(11);
    std::vector<double> x{3.0};
    const std::vector<double> w{1.0};
    for (int k = 0; k < 1000; ++k) x = mcmc_propose(x, w, rng);  // burn-in
    std::vector<double> kept;
    for (int k = 0; k < 200000; ++k) {
        x = mcmc_propose(x, w, rng);
        if (k % 20 == 0) kept.push_back(x[0]);
    }
    const double n = static_cast<double>(kept.size());
    const double mean = std::accumulate(kept.begin(), kept.end(), 0.0) / n;
    double var = 0.0;
    for (double v : kept) var += (v - mean) * (v - mean) / n;
    EXPECT_NEAR(mean, 0.0, 3.0 / std::sqrt(n));
    EXPECT_NEAR(var, 1.0, 3.0 * std::sqrt(2.0 / n));
}

TEST(Runner, InitialPhaseTrainsEveryCorrection) {
    LfmcRunner runner(bench::make_ensemble(bench::Benchmark::four_branch, Strategy::lfds), small_config());
    runner.initial_phase();
    EXPECT_EQ(runner.hf_calls(), 20);
    for (const auto& g : runner.ensemble().corrections) EXPECT_EQ(g.size(), 20u);
    for (long c : runner.lf_calls()) EXPECT_EQ(c, 20);
}

TEST(Runner, InitialTargetsAreDiscrepancies) {
    auto e = linear_ensemble(2.0);
    RunConfig cfg = small_config();
    cfg.n_init = 2;
    LfmcRunner runner(e, cfg);
    runner.initial_phase();
    for (std::size_t i = 0; i < 2; ++i) {
        const auto& data = runner.ensemble().corrections[i].data();
        for (std::size_t k = 0; k < 2; ++k) {
            const double x = data.inputs[k][0];
            const double h = 2.0 - x;
            const double l = i == 0 ? 2.0 - 1.1 * x : 2.0 - x + 0.3 * std::sin(2 * x);
            EXPECT_DOUBLE_EQ(data.targets[k], h - l);
        }
    }
}

TEST(Runner, ExactLowFidelityModelNeedsNoCorrection) {
    ModelEnsemble e = linear_ensemble(2.0);
    e.lfs[0].evaluator = e.hf.evaluator;
    LfmcRunner runner(e, small_config());
    runner.initial_phase();
    const auto p = runner.ensemble().corrections[0].predict(std::vector<double>{0.37});
    EXPECT_EQ(p.mean, 0.0);
    EXPECT_LT(p.std, 1e-6);
}

TEST(Runner, FourBranchSmallRunInvariants) {
    const RunConfig cfg = small_config(4);
    LfmcRunner runner(bench::make_ensemble(bench::Benchmark::four_branch, Strategy::lfds), cfg);
    const auto est = runner.run();
    const auto& recs = runner.records();
    ASSERT_EQ(est.n_subsets, static_cast<int>(recs.size()));
    EXPECT_GT(est.p_f, 1e-3);
    EXPECT_LT(est.p_f, 1e-2);

    long hf = cfg.n_init;
    std::vector<long> lf(4, cfg.n_init);
    double prev = kInf;
    double prod = 1.0, var = 0.0;
    for (const auto& r : recs) {
        EXPECT_LE(r.threshold, prev);
        prev = r.threshold;
        for (double u : r.u_values) EXPECT_TRUE(u >= cfg.u_threshold || std::isinf(u));
        for (std::size_t k = 0; k < r.slots(); ++k) {
            if (r.hf_flags[k]) {
                EXPECT_TRUE(std::isinf(r.u_values[k]) || r.index > 1);
            }
            if (r.index > 1) {
                EXPECT_LE(r.responses[k], recs[static_cast<std::size_t>(r.index - 2)].threshold);
            }
            // LFDS calls exactly one LF model for every evaluated sample
            if (r.lf_call_mask[k]) {
                EXPECT_EQ(std::popcount(r.lf_call_mask[k]), 1);
            }
        }
        hf += r.hf_calls;
        for (std::size_t i = 0; i < 4; ++i) lf[i] += r.lf_calls[i];
        EXPECT_NEAR(r.delta, oracle::recomputed_delta(r), 1e-12);
        prod *= r.cond_prob;
        var += r.delta * r.delta;
    }
    EXPECT_EQ(recs.back().threshold, cfg.failure_threshold);
    EXPECT_TRUE(recs.back().final);
    EXPECT_EQ(hf, est.total_hf_calls);
    EXPECT_EQ(lf, est.total_lf_calls);
    EXPECT_EQ(est.p_f, prod);
    EXPECT_EQ(est.cov, std::sqrt(var));
    EXPECT_EQ(est.total_samples, static_cast<long>(recs.size()) * cfg.n_pts);
}

TEST(Runner, ModelAveragingCallsEveryModel) {
    LfmcRunner runner(bench::make_ensemble(bench::Benchmark::rastrigin_type1, Strategy::lfma), small_config(2));
    runner.run();
    for (const auto& r : runner.records())
        for (std::size_t k = 0; k < r.slots(); ++k)
            if (r.lf_call_mask[k]) {
                EXPECT_EQ(r.lf_call_mask[k], 0b11u);
            }
    EXPECT_EQ(runner.lf_calls()[0], runner.lf_calls()[1]);
}

TEST(Runner, IdenticalSeedsGiveIdenticalRecords) {
    auto run_once = [] {
        LfmcRunner r(bench::make_ensemble(bench::Benchmark::four_branch, Strategy::lfss), small_config(9));
        r.run();
        return r.records();
    };
    const auto a = run_once();
    const auto b = run_once();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t s = 0; s < a.size(); ++s) {
        EXPECT_EQ(a[s].samples, b[s].samples);
        EXPECT_EQ(a[s].responses, b[s].responses);
        EXPECT_EQ(a[s].u_values, b[s].u_values);
        EXPECT_EQ(a[s].selected_model, b[s].selected_model);
        EXPECT_EQ(a[s].cond_prob, b[s].cond_prob);
    }
}

TEST(Runner, ThresholdAboveMedianFinishesInOneSubset) {
    RunConfig cfg = small_config();
    cfg.failure_threshold = 10.0;
    LfmcRunner runner(bench::make_ensemble(bench::Benchmark::four_branch, Strategy::lfds), cfg);
    const auto est = runner.run();
    EXPECT_EQ(est.n_subsets, 1);
    EXPECT_EQ(est.p_f, runner.records()[0].cond_prob);
    EXPECT_EQ(est.cov, runner.records()[0].delta);
    EXPECT_GT(est.p_f, 0.5);
}

TEST(Runner, NonConvergenceCarriesPartialResults) {
    RunConfig cfg = small_config();
    cfg.max_subsets = 1;
    LfmcRunner runner(bench::make_ensemble(bench::Benchmark::four_branch, Strategy::lfds), cfg);
    try {
        runner.run();
        FAIL() << "expected NonConvergenceError";
    } catch (const NonConvergenceError& e) {
        EXPECT_TRUE(e.partial.incomplete);
        EXPECT_EQ(e.records.size(), 1u);
        EXPECT_EQ(e.partial.n_subsets, 1);
        EXPECT_NEAR(e.partial.p_f, 0.1, 0.01);
    }
}

TEST(Runner, TooFewSeedsIsAConfigurationError) {
    RunConfig cfg = small_config();
    cfg.n_pts = 1000;
    cfg.n_chains = 200;
    LfmcRunner runner(bench::make_ensemble(bench::Benchmark::four_branch, Strategy::lfds), cfg);
    try {
        runner.run();
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field, "n_chains");
    }
}

TEST(Runner, ModelFailureReportsThePoint) {
    auto e = linear_ensemble(2.0);
    int calls = 0;
    e.lfs[0].evaluator = [&calls](std::span<const double> x) {
        return ++calls > 500 ? std::numeric_limits<double>::quiet_NaN() : 2.0 - 1.1 * x[0];
    };
    LfmcRunner runner(e, small_config());
    try {
        runner.run();
        FAIL() << "expected ModelEvaluationError";
    } catch (const ModelEvaluationError& err) {
        EXPECT_NE(std::string(err.what()).find("sampling-space point"), std::string::npos);
    }
}

// With U_T = inf every sample goes to the HF model and the estimator must be
// exactly the classical indicator one.
TEST(Runner, DegeneratesToClassicalSubsetSimulation) {
    RunConfig cfg = small_config(5);
    cfg.u_threshold = kInf;
    LfmcRunner runner(bench::make_ensemble(bench::Benchmark::four_branch, Strategy::lfds), cfg);
    const auto est = runner.run();

    oracle::ClassicalSusOptions o;
    o.n_pts = cfg.n_pts;
    o.n_chains = cfg.n_chains;
    o.seed = cfg.seed;
    const auto ref = oracle::classical_sus(bench::four_branch_hf, 2, o);
    ASSERT_EQ(ref.cond_probs.size(), runner.records().size());
    for (std::size_t s = 0; s < ref.cond_probs.size(); ++s) {
        EXPECT_EQ(runner.records()[s].cond_prob, ref.cond_probs[s]);
        EXPECT_EQ(runner.records()[s].threshold, ref.thresholds[s]);
    }
    EXPECT_EQ(est.p_f, ref.p_f);
    EXPECT_EQ(est.total_hf_calls, ref.hf_calls + cfg.n_init);
}

// A single run may sit a few reported standard deviations out, so compare the
// mean of ten seeds against the scatter of the ten estimates.
TEST(Runner, LinearModelMatchesAnalyticProbability) {
    const double a = 2.0;
    const double truth = 0.5 * std::erfc(a / std::sqrt(2.0));
    std::vector<double> estimates;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        RunConfig cfg = small_config(seed);
        cfg.n_pts = 5000;
        estimates.push_back(run(linear_ensemble(a), cfg).p_f);
    }
    const double n = static_cast<double>(estimates.size());
    const double mean = std::accumulate(estimates.begin(), estimates.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : estimates) ss += (v - mean) * (v - mean);
    const double standard_error = std::sqrt(ss / (n - 1) / n);
    EXPECT_NEAR(mean, truth, 3 * standard_error);
    EXPECT_LT(standard_error / mean, 0.05);
}
