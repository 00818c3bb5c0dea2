#pragma once

// Run outputs. summary.json, samples.csv and lf_calls.csv depend only on the
// configuration and seed, so repeated runs produce identical bytes; anything
// time- or host-dependent goes into manifest.json.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lfmc/config.hpp"
#include "lfmc/errors.hpp"
#include "lfmc/rng.hpp"
#include "lfmc/subset_simulation.hpp"

namespace lfmc {

struct OutputPaths {
    std::filesystem::path summary;
    std::filesystem::path samples;
    std::filesystem::path lf_calls;
    std::filesystem::path manifest;

    static OutputPaths in(const std::filesystem::path& dir) {
        return {dir / "summary.json", dir / "samples.csv", dir / "lf_calls.csv", dir / "manifest.json"};
    }
};

struct RunManifest {
    AppConfig config;
    std::string run_id;
    std::string started_at;
    std::string finished_at;
    std::string status;  // "completed", "incomplete" or "failed"
    std::string error;   // empty unless the run failed
    OutputPaths outputs;
};

/// Content-derived run id: the same configuration always gets the same id.
inline std::string make_run_id(const AppConfig& c) {
    return fmt::format("{:016x}", detail::fnv1a(serialize_config(c)));
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point t = std::chrono::system_clock::now()) {
    const std::time_t secs = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    return out;
}

inline void close_output(std::ofstream& out, const std::filesystem::path& path) {
    out.close();
    if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

}  // namespace detail

inline nlohmann::ordered_json summary_json(const FailureEstimate& est, Strategy strategy) {
    nlohmann::ordered_json j;
    j["strategy"] = to_string(strategy);
    j["p_f"] = est.p_f;
    j["cov"] = est.cov;
    j["n_subsets"] = est.n_subsets;
    j["hf_calls"] = est.total_hf_calls;
    j["total_samples"] = est.total_samples;
    j["hf_fraction"] =
        est.total_samples > 0 ? static_cast<double>(est.total_hf_calls) / static_cast<double>(est.total_samples) : 0.0;
    auto lf = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < est.total_lf_calls.size(); ++i)
        lf.push_back({{"model", i + 1}, {"calls", est.total_lf_calls[i]}});
    j["lf_calls"] = lf;
    auto subsets = nlohmann::ordered_json::array();
    for (const auto& s : est.per_subset) {
        subsets.push_back({{"index", s.index},
                           {"threshold", s.threshold},
                           {"cond_prob", s.cond_prob},
                           {"delta", s.delta},
                           {"hf_calls", s.hf_calls},
                           {"lf_calls", s.lf_calls}});
    }
    j["subsets"] = subsets;
    j["incomplete"] = est.incomplete;
    return j;
}

inline void write_summary(const std::filesystem::path& path, const FailureEstimate& est, Strategy strategy) {
    auto out = detail::open_output(path);
    out << summary_json(est, strategy).dump(2) << '\n';
    detail::close_output(out, path);
}

/// One row per stored chain state. Inputs are the model (physical) values.
inline void write_samples(const std::filesystem::path& path, const std::vector<SubsetRecord>& records,
                          const InputDistribution& inputs) {
    auto out = detail::open_output(path);
    std::string line = "subset,chain,index";
    for (std::size_t j = 0; j < inputs.dim(); ++j) line += fmt::format(",x{}", j + 1);
    line += ",response,u_value,hf_flag,selected_model\n";
    out << line;
    for (const auto& rec : records) {
        for (std::size_t l = 0; l < rec.n_chains; ++l) {
            for (std::size_t m = 0; m < rec.n_spc; ++m) {
                const std::size_t slot = l * rec.n_spc + m;
                line = fmt::format("{},{},{}", rec.index, l + 1, m + 1);
                for (double v : inputs.to_physical(rec.sample(slot))) line += fmt::format(",{}", v);
                line += fmt::format(",{},{},{},{}\n", rec.responses[slot], rec.u_values[slot],
                                    static_cast<int>(rec.hf_flags[slot]), rec.selected_model[slot]);
                out << line;
            }
        }
    }
    detail::close_output(out, path);
}

/// Cumulative model calls after the initial design (subset 0) and after
/// every sample, in generation order.
inline void write_lf_calls(const std::filesystem::path& path, const std::vector<SubsetRecord>& records,
                           int n_init, std::size_t n_models) {
    auto out = detail::open_output(path);
    std::string line = "subset,sample,hf_calls";
    for (std::size_t i = 0; i < n_models; ++i) line += fmt::format(",lf{}_calls", i + 1);
    out << line << '\n';

    long hf = n_init;
    std::vector<long> lf(n_models, n_init);
    auto emit = [&](int subset, std::size_t sample) {
        line = fmt::format("{},{},{}", subset, sample, hf);
        for (long c : lf) line += fmt::format(",{}", c);
        out << line << '\n';
    };
    emit(0, 0);
    for (const auto& rec : records) {
        for (std::size_t k = 0; k < rec.slots(); ++k) {
            hf += rec.hf_called[k];
            for (std::size_t i = 0; i < n_models; ++i)
                if (rec.lf_call_mask[k] & (1u << i)) ++lf[i];
            emit(rec.index, k + 1);
        }
    }
    detail::close_output(out, path);
}

inline void write_manifest(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["run_id"] = m.run_id;
    j["seed"] = m.config.run.seed;
    j["status"] = m.status;
    if (!m.error.empty()) j["error"] = m.error;
    j["started_at"] = m.started_at;
    j["finished_at"] = m.finished_at;
    j["outputs"] = {{"summary", m.outputs.summary.string()},
                    {"samples", m.outputs.samples.string()},
                    {"lf_calls", m.outputs.lf_calls.string()}};
    j["config"] = config_to_json(m.config);
    auto out = detail::open_output(m.outputs.manifest);
    out << j.dump(2) << '\n';
    detail::close_output(out, m.outputs.manifest);
}

/// Writes every report except the manifest for a finished or
/// aborted run. The manifest is written separately so it can record the
/// final status.
inline void emit_reports(const FailureEstimate& est, const std::vector<SubsetRecord>& records,
                         const ModelEnsemble& ensemble, int n_init, const OutputPaths& paths) {
    write_summary(paths.summary, est, ensemble.strategy);
    write_samples(paths.samples, records, ensemble.inputs);
    write_lf_calls(paths.lf_calls, records, n_init, ensemble.size());
}

inline void ensure_directory(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

}  // namespace lfmc
