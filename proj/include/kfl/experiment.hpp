#pragma once

#include "kfl/io.hpp"
#include "kfl/kalman.hpp"
#include "kfl/lowerbound.hpp"
#include "kfl/online_output.hpp"
#include "kfl/online_state.hpp"
#include "kfl/regret.hpp"
#include "kfl/system.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace kfl {

enum class ExperimentKind { output_learn, state_learn, lower_bound, simulate };

std::string_view to_string(ExperimentKind kind);

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::output_learn;
    std::string instance = "random";  ///< random | boeing747 | scalar-lb | file:<path>
    std::size_t T = 0;
    std::size_t seeds = 1;
    std::uint64_t base_seed = 0;
    bool tau_sqrt = true;              ///< tau = floor(sqrt(T)) per horizon
    std::size_t tau_fixed = 0;         ///< used when tau_sqrt is false
    double delta = 0.1;
    double inflation = 1.0;
    bool doubling = false;
    std::filesystem::path out_dir = "out";
    ScheduleRule schedule = ScheduleRule::experiment;
    /// 0: one run of length T, curve aggregated at every t. k > 0: fresh
    /// runs for k evenly spaced horizons up to T.
    std::size_t grid = 0;
    bool force = false;
    double sigma_w = 1.0;
    std::size_t trials = 2000;
    std::optional<LowerBoundEstimator> estimator;  ///< empty: every estimator
    unsigned threads = 0;                          ///< 0: hardware concurrency

    /// Block length for horizon T.
    std::size_t tau_for(std::size_t T) const;
};

/// Checks every field, fills defaults and rejects unknown keys. Errors are
/// ConfigError naming the offending field.
ExperimentConfig validate_config(const json& raw);

json config_to_json(const ExperimentConfig& config);

/// Instance for one seed. The random family regenerates A and C per seed;
/// the others ignore the seed. Feedback loops are closed.
LtiSystem build_instance(const std::string& instance, std::uint64_t seed, std::size_t T);

/// Everything a learner run on one seed needs, plus evaluation-only data.
struct SeedData {
    LtiSystem system;
    SteadyKalman steady;
    KnownConstants consts;
    Trajectory traj;
    std::vector<Vec> xtilde;
    std::vector<double> kf_output_loss;  ///< ||y_t - y^KF_t||^2
    std::vector<double> kf_state_loss;   ///< ||x_t - x^KF_t||^2
    std::uint64_t seed = 0;
};

SeedData prepare_seed(const ExperimentConfig& config, std::uint64_t seed, std::size_t T_max);

/// Output regret curve of a run tuned for horizon T on the first T steps.
RegretCurve output_run(const SeedData& data, std::size_t T, const ExperimentConfig& config,
                       LearnerTranscript* transcript = nullptr);

struct StateRunResult {
    RegretCurve curve;
    StateTranscript transcript;
    std::size_t queries = 0;
    std::size_t tau = 0;
};

StateRunResult state_run(const SeedData& data, std::size_t T, const ExperimentConfig& config);

/// k horizons evenly spaced on [T / k, T], rounded, deduplicated, all >= 2.
std::vector<std::size_t> horizon_grid(std::size_t T, std::size_t k);

struct SweepResult {
    std::vector<std::uint64_t> seeds;
    std::vector<std::size_t> T_grid;
    std::vector<std::vector<double>> regret;       ///< [seed][grid point]
    std::vector<std::vector<std::size_t>> queries;  ///< state sweeps only
    std::vector<std::vector<std::size_t>> taus;
    AggregateCurve aggregate;
};

/// Fresh run per (seed, horizon) with common random numbers across the
/// horizons of a seed. Seeds run on a worker pool; results are ordered by seed.
SweepResult run_sweep(const ExperimentConfig& config, const std::vector<std::size_t>& T_grid);

/// Runs the configured experiment and writes runs/<seed>.csv, aggregate.csv
/// and meta.json (lower-bound: report.json and meta.json) under out_dir.
void run_experiment(const ExperimentConfig& config);

}  // namespace kfl
