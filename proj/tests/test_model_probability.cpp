#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "lfmc/model_probability.hpp"

using namespace lfmc;

namespace {

// Composite Simpson rule, used as an independent check on the closed forms.
template <class F>
double simpson(F f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

}  // namespace

// Reference values computed at 40 significant digits.
TEST(FoldedGaussian, MatchesHighPrecisionValues) {
    const FoldedGaussianParams p{1.0, 2.0};
    EXPECT_NEAR(folded_pdf(1.5, p), 0.28465860109593555597, 1e-15);
    EXPECT_NEAR(folded_cdf(1.5, p), 0.49305655201606846655, 1e-15);
    EXPECT_NEAR(folded_survival(20.0, p) / 1.0494946975994388416e-21, 1.0, 1e-12);
    EXPECT_NEAR(folded_survival(3.0, {-0.5, 0.25}) / 7.619853024160526066e-24, 1.0, 1e-12);
}

TEST(FoldedGaussian, BoundaryBehaviour) {
    const FoldedGaussianParams p{0.7, 1.3};
    EXPECT_EQ(folded_cdf(0.0, p), 0.0);
    EXPECT_EQ(folded_pdf(-1.0, p), 0.0);
    EXPECT_EQ(folded_cdf(-1.0, p), 0.0);
    EXPECT_EQ(folded_survival(-1.0, p), 1.0);
    EXPECT_NEAR(folded_cdf(50.0, p), 1.0, 1e-15);
}

TEST(FoldedGaussian, SymmetricInMean) {
    for (double z : {0.0, 0.3, 1.0, 4.0}) {
        EXPECT_DOUBLE_EQ(folded_pdf(z, {1.2, 0.8}), folded_pdf(z, {-1.2, 0.8}));
        EXPECT_NEAR(folded_cdf(z, {1.2, 0.8}), folded_cdf(z, {-1.2, 0.8}), 1e-16);
    }
}

TEST(FoldedGaussian, CdfIsMonotone) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> mu(-3.0, 3.0), sigma(0.05, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        const FoldedGaussianParams p{mu(rng), sigma(rng)};
        double prev = 0.0;
        for (double z = 0.0; z < std::abs(p.mu) + 10 * p.sigma; z += p.sigma / 50) {
            const double f = folded_cdf(z, p);
            EXPECT_GE(f, prev);
            prev = f;
        }
    }
}

TEST(FoldedGaussian, CdfAgreesWithIntegratedPdf) {
    const FoldedGaussianParams p{0.4, 0.9};
    for (double z : {0.2, 0.8, 1.7, 3.0}) {
        const double integral = simpson([&](double t) { return folded_pdf(t, p); }, 0.0, z, 2000);
        EXPECT_NEAR(integral, folded_cdf(z, p), 1e-12);
        EXPECT_NEAR(folded_cdf(z, p) + folded_survival(z, p), 1.0, 1e-15);
    }
}

TEST(FoldedGaussian, PdfIntegratesToOne) {
    for (const FoldedGaussianParams p : {FoldedGaussianParams{0.0, 1.0}, {1.0, 2.0}, {-3.0, 0.1}, {5.0, 0.5}}) {
        const double upper = std::abs(p.mu) + 10 * p.sigma;
        const double integral = simpson([&](double t) { return folded_pdf(t, p); }, 0.0, upper, 20000);
        EXPECT_NEAR(integral, 1.0, 1e-8);
    }
}

TEST(FoldedGaussian, ReducesToHalfNormal) {
    const double s = 1.7;
    for (double z : {0.0, 0.5, 2.0, 5.0}) {
        EXPECT_NEAR(folded_pdf(z, {0.0, s}), std::sqrt(2.0 / std::numbers::pi) / s * std::exp(-z * z / (2 * s * s)),
                    1e-15);
        EXPECT_NEAR(folded_cdf(z, {0.0, s}), std::erf(z / (s * std::numbers::sqrt2)), 1e-15);
    }
}

TEST(CostModel, GammaFromTauAndBeta) {
    CostModel c{{1.0, 4.0, 9.0}, 0.5, {}};
    const auto g = c.gamma();
    EXPECT_DOUBLE_EQ(g[0], 1.0);
    EXPECT_DOUBLE_EQ(g[1], 2.0);
    EXPECT_DOUBLE_EQ(g[2], 3.0);
    c.gamma_override = std::vector<double>{1.0, 30.0, 5.0};
    EXPECT_EQ(c.gamma(), (std::vector<double>{1.0, 30.0, 5.0}));
}

TEST(CostModel, Validation) {
    EXPECT_THROW((CostModel{{1.0, -2.0}, 0.0, {}}.validate(2)), InputError);
    EXPECT_THROW((CostModel{{1.0, 2.0}, -0.1, {}}.validate(2)), InputError);
    EXPECT_THROW((CostModel{{1.0}, 0.0, {}}.validate(2)), InputError);
    EXPECT_THROW((CostModel{{1.0, 2.0}, 0.0, std::vector<double>{1.0, 0.5}}.validate(2)), InputError);
    EXPECT_NO_THROW((CostModel{{1.0, 2.0}, 0.0, std::vector<double>{1.0, 30.0}}.validate(2)));
}

TEST(CostModel, NormalizeCosts) {
    EXPECT_EQ(normalize_costs(std::vector<double>{4.0, 480.0}), (std::vector<double>{1.0, 120.0}));
    EXPECT_THROW(normalize_costs(std::vector<double>{0.0, 1.0}), InputError);
}

TEST(ModelProbabilities, SingleModelIsCertain) {
    const std::vector<FoldedGaussianParams> one{{3.0, 1.0}};
    EXPECT_EQ(local_model_probabilities(one).values, std::vector<double>{1.0});
}

TEST(ModelProbabilities, IdenticalModelsShareEvenly) {
    for (std::size_t n : {2u, 3u, 5u}) {
        const std::vector<FoldedGaussianParams> ps(n, {0.3, 0.7});
        const auto r = local_model_probabilities(ps);
        for (double v : r.values) EXPECT_NEAR(v, 1.0 / static_cast<double>(n), 1e-12);
        EXPECT_NEAR(r.raw_sum, 1.0, 1e-9);
    }
}

// Reference values: the defining integral evaluated at 40 digits.
TEST(ModelProbabilities, MatchHighPrecisionQuadrature) {
    const std::vector<FoldedGaussianParams> two{{0.5, 1.0}, {-1.0, 0.5}};
    const auto r2 = local_model_probabilities(two);
    EXPECT_NEAR(r2.values[0], 0.58864697991260488866, 1e-10);
    EXPECT_NEAR(r2.values[1], 0.41135302008739511134, 1e-10);

    const std::vector<FoldedGaussianParams> three{{0.2, 0.3}, {1.5, 2.0}, {-0.1, 0.05}};
    const auto r3 = local_model_probabilities(three);
    EXPECT_NEAR(r3.values[0], 0.20711265836892895882, 1e-10);
    EXPECT_NEAR(r3.values[1], 0.026397749181247542106, 1e-10);
    EXPECT_NEAR(r3.values[2], 0.76648959244982349907, 1e-10);
}

TEST(ModelProbabilities, PreferSmallerCorrections) {
    const std::vector<FoldedGaussianParams> ps{{0.01, 0.01}, {5.0, 0.2}};
    const auto r = local_model_probabilities(ps);
    EXPECT_GT(r.values[0], 1.0 - 1e-12);
}

TEST(ModelProbabilities, SumToOneBeforeRenormalization) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> mu(-2.0, 2.0), logs(std::log(0.01), std::log(3.0));
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<FoldedGaussianParams> ps(2 + trial % 4);
        for (auto& p : ps) p = {mu(rng), std::exp(logs(rng))};
        const auto r = local_model_probabilities(ps);
        EXPECT_NEAR(r.raw_sum, 1.0, 1e-6);
        EXPECT_NEAR(std::accumulate(r.values.begin(), r.values.end(), 0.0), 1.0, 1e-14);
        for (double v : r.values) EXPECT_GE(v, 0.0);
    }
}

TEST(ModelProbabilities, DegenerateWhenAllSigmasVanish) {
    const std::vector<FoldedGaussianParams> ps{{1.0, 0.0}, {2.0, 0.0}};
    const auto r = local_model_probabilities(ps);
    EXPECT_TRUE(r.degenerate);
    EXPECT_NEAR(r.values[0], 1.0, 1e-12);

    const std::vector<FoldedGaussianParams> tied{{1.0, 0.0}, {-1.0, 0.0}, {3.0, 0.0}};
    const auto t = local_model_probabilities(tied);
    EXPECT_NEAR(t.values[0], 0.5, 1e-15);
    EXPECT_NEAR(t.values[1], 0.5, 1e-15);
    EXPECT_EQ(t.values[2], 0.0);
}

// An exact correction wins whenever the uncertain one lands above it.
TEST(ModelProbabilities, PointMassAgainstSpreadModel) {
    const std::vector<FoldedGaussianParams> ps{{1.0, 0.0}, {0.5, 1.0}};
    const auto r = local_model_probabilities(ps);
    EXPECT_FALSE(r.degenerate);
    EXPECT_NEAR(r.values[0], folded_survival(1.0, {0.5, 1.0}), 1e-12);
    EXPECT_NEAR(r.values[1], folded_cdf(1.0, {0.5, 1.0}), 1e-12);
    EXPECT_NEAR(r.raw_sum, 1.0, 1e-9);
}

TEST(ModelProbabilities, MonteCarloMinFrequency) {
    const std::vector<FoldedGaussianParams> ps{{0.3, 0.4}, {-0.5, 0.3}, {0.1, 0.9}};
    const auto r = local_model_probabilities(ps);
    std::mt19937_64 rng(17);
    std::normal_distribution<double> normal;
    const int n = 1'000'000;
    std::vector<int> wins(ps.size(), 0);
    for (int k = 0; k < n; ++k) {
        std::size_t best = 0;
        double best_z = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < ps.size(); ++i) {
            const double z = std::abs(ps[i].mu + ps[i].sigma * normal(rng));
            if (z < best_z) {
                best_z = z;
                best = i;
            }
        }
        ++wins[best];
    }
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const double f = wins[i] / static_cast<double>(n);
        const double se = std::sqrt(r.values[i] * (1 - r.values[i]) / n);
        EXPECT_NEAR(f, r.values[i], 3 * se);
    }
}

TEST(CostBiasedProbabilities, ReduceToUnbiasedWhenBetaIsZeroOrTauIsOne) {
    const std::vector<FoldedGaussianParams> ps{{0.4, 0.3}, {-0.2, 0.6}, {1.0, 0.1}};
    const auto plain = local_model_probabilities(ps);
    const auto beta0 = cost_biased_probabilities(ps, CostModel{{1.0, 50.0, 7.0}, 0.0, {}});
    const auto tau1 = cost_biased_probabilities(ps, CostModel{{1.0, 1.0, 1.0}, 2.5, {}});
    for (std::size_t i = 0; i < ps.size(); ++i) {
        EXPECT_NEAR(beta0.values[i], plain.values[i], 1e-12);
        EXPECT_NEAR(tau1.values[i], plain.values[i], 1e-12);
    }
}

TEST(CostBiasedProbabilities, ExpensiveModelsLoseProbability) {
    const std::vector<FoldedGaussianParams> ps{{0.4, 0.3}, {0.4, 0.3}};
    const auto r = cost_biased_probabilities(ps, CostModel{{1.0, 120.0}, 0.0, std::vector<double>{1.0, 30.0}});
    EXPECT_GT(r.values[0], 0.95);
    const auto weak = cost_biased_probabilities(ps, CostModel{{1.0, 4.0}, 0.5, {}});
    EXPECT_GT(weak.values[0], 0.5);
    EXPECT_LT(weak.values[0], r.values[0]);
}
