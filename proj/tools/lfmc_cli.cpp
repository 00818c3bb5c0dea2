// Command-line front end.
//
//   lfmc run --config run.json [--seed N] [--out DIR] [--strategy lfma|lfds|lfss] [--beta X]
//   lfmc validate --config run.json
//
// Exit codes: 0 success, 2 invalid configuration, 3 runtime or model error,
// 4 no convergence within max_subsets.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "lfmc/lfmc.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitNonConvergence = 4;

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> strategy;
    std::optional<double> beta;
};

lfmc::AppConfig load_with_overrides(const std::string& path, const Overrides& o) {
    lfmc::AppConfig cfg = lfmc::load_config(path);
    if (o.seed) cfg.run.seed = *o.seed;
    if (o.out) cfg.output_dir = *o.out;
    if (o.strategy) cfg.strategy = lfmc::detail::parse_strategy(*o.strategy, "--strategy");
    if (o.beta) cfg.beta = *o.beta;
    cfg.validate();
    return cfg;
}

void print_estimate(const lfmc::FailureEstimate& est) {
    std::printf("p_f        %.6e\n", est.p_f);
    std::printf("cov        %.4f\n", est.cov);
    std::printf("subsets    %d\n", est.n_subsets);
    std::printf("hf_calls   %ld (%.3f%% of %ld samples)\n", est.total_hf_calls,
                est.total_samples > 0 ? 100.0 * static_cast<double>(est.total_hf_calls) /
                                            static_cast<double>(est.total_samples)
                                      : 0.0,
                est.total_samples);
    for (std::size_t i = 0; i < est.total_lf_calls.size(); ++i)
        std::printf("lf%zu_calls  %ld\n", i + 1, est.total_lf_calls[i]);
}

int command_validate(const std::string& path) {
    try {
        const auto cfg = lfmc::load_config(path);
        std::printf("configuration OK: %zu LF models, %zu inputs, strategy %s\n", cfg.n_models(), cfg.dim(),
                    lfmc::to_string(cfg.strategy).c_str());
        return kExitOk;
    } catch (const lfmc::ConfigError& e) {
        std::fprintf(stderr, "invalid configuration: %s\n", e.what());
        return kExitConfig;
    }
}

int command_run(const std::string& path, const Overrides& overrides) {
    lfmc::AppConfig cfg;
    try {
        cfg = load_with_overrides(path, overrides);
    } catch (const lfmc::ConfigError& e) {
        std::fprintf(stderr, "invalid configuration: %s\n", e.what());
        return kExitConfig;
    }

    lfmc::RunManifest manifest;
    manifest.config = cfg;
    manifest.run_id = lfmc::make_run_id(cfg);
    manifest.started_at = lfmc::utc_timestamp();
    manifest.outputs = lfmc::OutputPaths::in(cfg.output_dir);

    std::optional<lfmc::BuiltEnsemble> built;
    std::optional<lfmc::LfmcRunner> runner;
    int code = kExitOk;
    try {
        lfmc::ensure_directory(cfg.output_dir);
        built.emplace(lfmc::build_ensemble(cfg));
        runner.emplace(built->ensemble, cfg.run);
        runner->on_subset_complete([](const lfmc::SubsetRecord& r) {
            std::fprintf(stderr, "subset %d: threshold %.6g, conditional probability %.6g, delta %.4f, %ld HF calls\n",
                         r.index, r.threshold, r.cond_prob, r.delta, r.hf_calls);
        });
        const auto est = runner->run();
        lfmc::emit_reports(est, runner->records(), runner->ensemble(), cfg.run.n_init, manifest.outputs);
        manifest.status = "completed";
        print_estimate(est);
    } catch (const lfmc::NonConvergenceError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        manifest.status = "incomplete";
        manifest.error = e.what();
        code = kExitNonConvergence;
        try {
            lfmc::emit_reports(e.partial, e.records, runner->ensemble(), cfg.run.n_init, manifest.outputs);
        } catch (const lfmc::IoError& io) {
            std::fprintf(stderr, "error: %s\n", io.what());
            code = kExitRuntime;
        }
    } catch (const std::exception& e) {
        const bool config_problem = dynamic_cast<const lfmc::ConfigError*>(&e) != nullptr;
        std::fprintf(stderr, "%s: %s\n", config_problem ? "invalid configuration" : "error", e.what());
        manifest.status = "failed";
        manifest.error = e.what();
        code = config_problem ? kExitConfig : kExitRuntime;
        if (runner) {
            auto partial = runner->estimate();
            partial.incomplete = true;
            try {
                lfmc::emit_reports(partial, runner->records(), runner->ensemble(), cfg.run.n_init,
                                   manifest.outputs);
            } catch (const lfmc::IoError&) {
                // the original error is the one worth reporting
            }
        }
    }

    manifest.finished_at = lfmc::utc_timestamp();
    try {
        lfmc::write_manifest(manifest);
    } catch (const lfmc::IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        if (code == kExitOk) code = kExitRuntime;
    }
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Failure probability estimation with subset simulation and multi-fidelity surrogates"};
    app.require_subcommand(1);

    std::string run_config;
    Overrides overrides;
    auto* run = app.add_subcommand("run", "Run an analysis and write reports");
    run->add_option("--config", run_config, "JSON configuration file")->required();
    run->add_option("--seed", overrides.seed, "Master seed (overrides config)");
    run->add_option("--out", overrides.out, "Output directory (overrides config)");
    run->add_option("--strategy", overrides.strategy, "Surrogate assembly: lfma, lfds or lfss");
    run->add_option("--beta", overrides.beta, "Cost-biasing exponent (overrides config)");

    std::string validate_config;
    auto* validate = app.add_subcommand("validate", "Parse and check a configuration without running");
    validate->add_option("--config", validate_config, "JSON configuration file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    if (*validate) return command_validate(validate_config);
    return command_run(run_config, overrides);
}
