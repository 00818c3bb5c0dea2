#pragma once

// Exact Gaussian-process regression with ARD kernels.
//
// Inputs and targets are standardized internally. Hyperparameters are the
// per-dimension lengthscales and the signal variance; the diagonal jitter is
// a fixed, dimensionless fraction of the signal variance:
//
//     K = s^2 (R(lengthscales) + jitter * I)
//
// For fixed lengthscales the signal variance that minimizes the negative log
// marginal likelihood is available in closed form, s^2 = y' A^{-1} y / n with
// A = R + jitter * I, so the local search runs over log-lengthscales only and
// s^2 is profiled out (then clamped to its box).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "lfmc/detail/nelder_mead.hpp"
#include "lfmc/errors.hpp"
#include "lfmc/rng.hpp"

namespace lfmc::gp {

enum class KernelFamily { squared_exponential, matern52 };

inline constexpr double kMinJitter = 1e-12;
inline constexpr double kMaxJitter = 1e-4;

struct KernelConfig {
    KernelFamily family = KernelFamily::squared_exponential;
    std::vector<double> lengthscales;  // standardized input units, one per dimension
    double signal_variance = 1.0;      // standardized target units
    double jitter = 1e-10;

    void validate(std::size_t dim) const {
        if (lengthscales.size() != dim)
            throw InputError("kernel has " + std::to_string(lengthscales.size()) +
                             " lengthscales for " + std::to_string(dim) + "-d inputs");
        for (double l : lengthscales)
            if (!(l > 0.0)) throw InputError("lengthscales must be positive");
        if (!(signal_variance > 0.0)) throw InputError("signal_variance must be positive");
        if (!(jitter >= kMinJitter)) throw InputError("jitter must be >= 1e-12");
    }
};

/// Raw training data plus the standardization constants derived from it.
struct TrainingSet {
    std::vector<std::vector<double>> inputs;
    std::vector<double> targets;
    std::vector<double> input_mean;
    std::vector<double> input_scale;
    double target_mean = 0.0;
    double target_scale = 1.0;

    [[nodiscard]] std::size_t size() const { return targets.size(); }
    [[nodiscard]] std::size_t dim() const { return inputs.empty() ? 0 : inputs.front().size(); }

    /// Validates shapes, rejects duplicate inputs and computes standardization.
    static TrainingSet make(std::vector<std::vector<double>> xs, std::vector<double> ys) {
        if (xs.empty()) throw InputError("training set is empty");
        if (xs.size() != ys.size()) throw InputError("inputs and targets differ in length");
        const std::size_t d = xs.front().size();
        if (d == 0) throw InputError("training inputs have zero dimension");
        for (const auto& x : xs)
            if (x.size() != d) throw InputError("training inputs have inconsistent dimension");
        for (double y : ys)
            if (!std::isfinite(y)) throw InputError("training target is not finite");

        TrainingSet t;
        t.inputs = std::move(xs);
        t.targets = std::move(ys);
        const auto n = static_cast<double>(t.size());
        t.input_mean.assign(d, 0.0);
        t.input_scale.assign(d, 1.0);
        for (std::size_t j = 0; j < d; ++j) {
            double mean = 0.0;
            for (const auto& x : t.inputs) mean += x[j];
            mean /= n;
            double var = 0.0;
            for (const auto& x : t.inputs) var += (x[j] - mean) * (x[j] - mean);
            const double sd = std::sqrt(var / n);
            t.input_mean[j] = mean;
            t.input_scale[j] = sd > 1e-12 * (1.0 + std::abs(mean)) ? sd : 1.0;
        }
        double mean = 0.0;
        for (double y : t.targets) mean += y;
        mean /= n;
        double var = 0.0;
        for (double y : t.targets) var += (y - mean) * (y - mean);
        const double sd = std::sqrt(var / n);
        t.target_mean = mean;
        t.target_scale = sd > 1e-12 * (1.0 + std::abs(mean)) ? sd : 1.0;

        for (std::size_t a = 1; a < t.size(); ++a)
            for (std::size_t b = 0; b < a; ++b)
                if (t.same_point(t.inputs[a], t.inputs[b]))
                    throw InputError("duplicate training input at index " + std::to_string(a));
        return t;
    }

    [[nodiscard]] bool same_point(std::span<const double> a, std::span<const double> b) const {
        for (std::size_t j = 0; j < a.size(); ++j)
            if (std::abs(a[j] - b[j]) / input_scale[j] > 1e-12) return false;
        return true;
    }

    [[nodiscard]] bool contains(std::span<const double> x) const {
        return std::any_of(inputs.begin(), inputs.end(),
                           [&](const auto& p) { return same_point(p, x); });
    }
};

struct Prediction {
    double mean = 0.0;
    double std = 0.0;
};

struct FitOptions {
    int n_starts = 8;
    std::uint64_t seed = 0;
    double box_lo = 1e-3;  // bounds for lengthscales and signal variance (standardized units)
    double box_hi = 1e3;
    int max_evaluations = 200;  // per start
    double base_jitter = 1e-10;
    double initial_step = 0.7;  // simplex edge in log-lengthscale
    double tolerance = 1e-7;    // stop when simplex NLL spread drops below this
};

/// Correlation between two standardized points (unit signal variance).
inline double correlation(KernelFamily family, std::span<const double> inv_lengthscales,
                          const double* a, const double* b) {
    double r2 = 0.0;
    for (std::size_t j = 0; j < inv_lengthscales.size(); ++j) {
        const double t = (a[j] - b[j]) * inv_lengthscales[j];
        r2 += t * t;
    }
    if (family == KernelFamily::squared_exponential) return std::exp(-0.5 * r2);
    const double r = std::sqrt(5.0 * r2);
    return (1.0 + r + r * r / 3.0) * std::exp(-r);
}

/// Fills `r` with the correlation matrix R for row-major standardized inputs
/// (n x d), reusing its storage when the size already matches.
inline void fill_correlation_matrix(KernelFamily family, std::span<const double> inv_ls,
                                    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& xs,
                                    Eigen::MatrixXd& r) {
    const auto n = xs.rows();
    r.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        r(i, i) = 1.0;
        for (Eigen::Index k = 0; k < i; ++k) {
            const double v = correlation(family, inv_ls, xs.row(i).data(), xs.row(k).data());
            r(i, k) = v;
            r(k, i) = v;
        }
    }
}

inline Eigen::MatrixXd correlation_matrix(KernelFamily family, std::span<const double> inv_ls,
                                          const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                              Eigen::RowMajor>& xs) {
    Eigen::MatrixXd r;
    fill_correlation_matrix(family, inv_ls, xs, r);
    return r;
}

class GaussianProcess {
public:
    using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    /// Fits hyperparameters by multi-start minimization of the negative log
    /// marginal likelihood. Start 0 is `initial` (its lengthscales, or 1 when
    /// empty); the other starts are drawn log-uniformly from [1e-2, 1e2].
    static GaussianProcess fit(TrainingSet data, const KernelConfig& initial, const FitOptions& opts) {
        const std::size_t d = data.dim();
        GaussianProcess gp(std::move(data));
        const double log_lo = std::log(opts.box_lo);
        const double log_hi = std::log(opts.box_hi);

        std::vector<double> start0(d, 0.0);
        if (initial.lengthscales.size() == d)
            for (std::size_t j = 0; j < d; ++j)
                start0[j] = std::clamp(std::log(initial.lengthscales[j]), log_lo, log_hi);
        else if (!initial.lengthscales.empty())
            throw InputError("initial kernel dimension does not match training inputs");

        auto objective = [&](const std::vector<double>& log_ls) {
            const auto trial = gp.profiled(initial.family, log_ls, opts, true);
            return trial ? trial->nll : std::numeric_limits<double>::infinity();
        };

        Rng rng(opts.seed);
        std::uniform_real_distribution<double> unif(std::log(1e-2), std::log(1e2));
        std::vector<double> best_x;
        double best_value = std::numeric_limits<double>::infinity();
        const int starts = std::max(1, opts.n_starts);
        for (int s = 0; s < starts; ++s) {
            std::vector<double> x0 = start0;
            if (s > 0)
                for (double& v : x0) v = unif(rng);
            const auto res =
                detail::nelder_mead_box(objective, x0, log_lo, log_hi, opts.initial_step,
                                                   opts.max_evaluations, opts.tolerance);
            // strict '<' keeps the lowest start index on ties
            if (res.value < best_value || best_x.empty()) {
                best_value = res.value;
                best_x = res.x;
            }
        }

        const auto best = gp.profiled(initial.family, best_x, opts);
        if (!best) throw FitError("kernel matrix singular after jitter escalation to 1e-4");
        gp.adopt(*best);
        gp.scratch_ = Eigen::MatrixXd();
        return gp;
    }

    /// Conditions on the data with fixed hyperparameters (no optimization).
    /// The jitter ladder starts at `kernel.jitter`.
    static GaussianProcess condition(TrainingSet data, const KernelConfig& kernel) {
        kernel.validate(data.dim());
        GaussianProcess gp(std::move(data));
        auto trial = gp.factorize(kernel.family, kernel.lengthscales, kernel.signal_variance, kernel.jitter);
        if (!trial) throw FitError("kernel matrix singular after jitter escalation to 1e-4");
        gp.adopt(*trial);
        gp.scratch_ = Eigen::MatrixXd();
        return gp;
    }

    [[nodiscard]] Prediction predict(std::span<const double> x) const {
        const std::size_t d = dim();
        if (x.size() != d)
            throw InputError("query has dimension " + std::to_string(x.size()) + ", expected " +
                             std::to_string(d));
        double z[16];
        std::vector<double> zbuf;
        double* zp = z;
        if (d > 16) {
            zbuf.resize(d);
            zp = zbuf.data();
        }
        for (std::size_t j = 0; j < d; ++j)
            zp[j] = (x[j] - data_.input_mean[j]) / data_.input_scale[j];

        const auto n = xs_.rows();
        const double s2 = kernel_.signal_variance;
        // The jitter belongs to the covariance at zero distance (a nugget), so a
        // query that coincides with a training input sees it too. That keeps
        // the mean exactly interpolating even when R is close to singular.
        Eigen::VectorXd kstar(n);
        double prior = s2;
        for (Eigen::Index i = 0; i < n; ++i) {
            kstar[i] = s2 * correlation(kernel_.family, inv_ls_, xs_.row(i).data(), zp);
            if (data_.same_point(data_.inputs[static_cast<std::size_t>(i)], x)) {
                kstar[i] += s2 * kernel_.jitter;
                prior = s2 * (1.0 + kernel_.jitter);
            }
        }

        const double mean_std = kstar.dot(alpha_);
        factor_.triangularView<Eigen::Lower>().solveInPlace(kstar);
        const double var_std = std::max(0.0, prior - kstar.squaredNorm());
        return {data_.target_mean + data_.target_scale * mean_std,
                data_.target_scale * std::sqrt(var_std)};
    }

    [[nodiscard]] const KernelConfig& kernel() const { return kernel_; }
    [[nodiscard]] const TrainingSet& data() const { return data_; }
    [[nodiscard]] std::size_t size() const { return data_.size(); }
    [[nodiscard]] std::size_t dim() const { return data_.dim(); }
    [[nodiscard]] double negative_log_likelihood() const { return nll_; }

    /// Lower factor L with L L' = s^2 (R + jitter I), standardized units.
    [[nodiscard]] const Eigen::MatrixXd& factor() const { return factor_; }
    [[nodiscard]] const Eigen::VectorXd& alpha() const { return alpha_; }
    [[nodiscard]] const RowMatrix& standardized_inputs() const { return xs_; }
    [[nodiscard]] const Eigen::VectorXd& standardized_targets() const { return ys_; }

    /// Covariance matrix s^2 (R + jitter I) for the current hyperparameters.
    [[nodiscard]] Eigen::MatrixXd covariance() const {
        Eigen::MatrixXd k = correlation_matrix(kernel_.family, inv_ls_, xs_);
        k.diagonal().array() += kernel_.jitter;
        return kernel_.signal_variance * k;
    }

private:
    struct Trial {
        KernelConfig kernel;
        Eigen::MatrixXd factor;
        Eigen::VectorXd alpha;
        double nll;
    };

    explicit GaussianProcess(TrainingSet data) : data_(std::move(data)) {
        const std::size_t n = data_.size();
        const std::size_t d = data_.dim();
        xs_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
        ys_.resize(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j)
                xs_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    (data_.inputs[i][j] - data_.input_mean[j]) / data_.input_scale[j];
            ys_[static_cast<Eigen::Index>(i)] = (data_.targets[i] - data_.target_mean) / data_.target_scale;
        }
    }

    /// Factorizes s^2 (R + jitter I), escalating the jitter by decades up to
    /// kMaxJitter. If `signal_variance` is empty it is profiled. With
    /// `nll_only` the factor and weights are left empty (optimizer trials).
    [[nodiscard]] std::optional<Trial> factorize(KernelFamily family, const std::vector<double>& ls,
                                                 std::optional<double> signal_variance, double jitter,
                                                 double sv_lo = 1e-3, double sv_hi = 1e3,
                                                 bool nll_only = false) const {
        std::vector<double> inv(ls.size());
        for (std::size_t j = 0; j < ls.size(); ++j) inv[j] = 1.0 / ls[j];
        const auto n = static_cast<double>(ys_.size());
        Eigen::MatrixXd& a = scratch_;

        for (double jit = std::max(jitter, kMinJitter); jit <= kMaxJitter * (1.0 + 1e-9); jit *= 10.0) {
            fill_correlation_matrix(family, inv, xs_, a);
            a.diagonal().array() += jit;
            Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(a);
            if (llt.info() != Eigen::Success) continue;
            const auto l = a.triangularView<Eigen::Lower>();
            if ((a.diagonal().array() <= 0.0).any()) continue;
            Eigen::VectorXd w = l.solve(ys_);
            const double quad = w.squaredNorm();  // y' A^{-1} y
            const double s2 = signal_variance ? *signal_variance : std::clamp(quad / n, sv_lo, sv_hi);
            const double logdet_a = 2.0 * a.diagonal().array().log().sum();
            const double nll = 0.5 * (n * std::log(s2) + logdet_a) + 0.5 * quad / s2 +
                               0.5 * n * std::log(2.0 * std::numbers::pi);
            Trial t;
            t.kernel.family = family;
            t.kernel.lengthscales = ls;
            t.kernel.signal_variance = s2;
            t.kernel.jitter = jit;
            t.nll = nll;
            if (!nll_only) {
                a.transpose().triangularView<Eigen::Upper>().solveInPlace(w);  // A^{-1} y
                t.factor = a.triangularView<Eigen::Lower>();
                t.factor *= std::sqrt(s2);
                t.alpha = w / s2;
            }
            return t;
        }
        return std::nullopt;
    }

    [[nodiscard]] std::optional<Trial> profiled(KernelFamily family, const std::vector<double>& log_ls,
                                                const FitOptions& opts, bool nll_only = false) const {
        std::vector<double> ls(log_ls.size());
        for (std::size_t j = 0; j < ls.size(); ++j) ls[j] = std::exp(log_ls[j]);
        return factorize(family, ls, std::nullopt, opts.base_jitter, opts.box_lo, opts.box_hi, nll_only);
    }

    void adopt(const Trial& t) {
        kernel_ = t.kernel;
        factor_ = t.factor;
        alpha_ = t.alpha;
        nll_ = t.nll;
        inv_ls_.resize(kernel_.lengthscales.size());
        for (std::size_t j = 0; j < inv_ls_.size(); ++j) inv_ls_[j] = 1.0 / kernel_.lengthscales[j];
    }

    TrainingSet data_;
    RowMatrix xs_;
    Eigen::VectorXd ys_;
    KernelConfig kernel_;
    std::vector<double> inv_ls_;
    Eigen::MatrixXd factor_;
    Eigen::VectorXd alpha_;
    double nll_ = 0.0;
    mutable Eigen::MatrixXd scratch_;  // reused kernel buffer across optimizer trials
};

struct RetrainResult {
    GaussianProcess gp;
    bool duplicate = false;  // point already present; gp returned unchanged
};

/// Extends the training set by one point and refits. With `reoptimize` the
/// current hyperparameters seed start 0 of the search; otherwise they are
/// kept and only the factorization is recomputed.
inline RetrainResult add_point_and_retrain(const GaussianProcess& gp, std::span<const double> x,
                                           double target, bool reoptimize, const FitOptions& opts) {
    if (x.size() != gp.dim()) throw InputError("new training point has wrong dimension");
    if (gp.data().contains(x)) return {gp, true};
    auto inputs = gp.data().inputs;
    auto targets = gp.data().targets;
    inputs.emplace_back(x.begin(), x.end());
    targets.push_back(target);
    auto data = TrainingSet::make(std::move(inputs), std::move(targets));
    if (reoptimize) return {GaussianProcess::fit(std::move(data), gp.kernel(), opts), false};
    return {GaussianProcess::condition(std::move(data), gp.kernel()), false};
}

}  // namespace lfmc::gp
