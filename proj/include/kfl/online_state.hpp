#pragma once

#include "kfl/history.hpp"
#include "kfl/kalman.hpp"
#include "kfl/online_output.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <vector>

namespace kfl {

/// One query per block of tau steps, at offset b_i inside block i.
struct QuerySchedule {
    std::size_t tau = 1;
    std::vector<std::size_t> offsets;
    std::set<std::size_t> queried_steps;  ///< restricted to [0, T)

    bool is_queried(std::size_t t) const;
};

/// Draws num_blocks offsets uniformly from {0..tau-1} on the query-offset
/// stream of `seed` (sub-stream `sub`). `T` clips the materialized query set
/// to [0, T).
QuerySchedule sample_offsets(std::size_t tau, std::size_t num_blocks, std::uint64_t seed,
                             std::optional<std::size_t> T = std::nullopt,
                             std::uint64_t sub = 0);

/// Schedule used by ogd_state_run for horizon T: ceil(T / tau) blocks,
/// clipped to [0, T).
QuerySchedule run_schedule(std::size_t T, std::size_t tau, std::uint64_t seed,
                           std::uint64_t sub = 0);

/// Gradient of ||x~_t - M ybar||^2: 2 Y^T (Y vec(M) - x~_t).
Vec grad_state_noisy(const FilterParams& M, const Vec& xtilde_t, const Mat& Y);

/// eta_0 = 0, eta_j = 2 / (alpha0 j), indexed by the query count j.
StepSchedule step_schedule_state(double alpha0);

StepSchedule state_schedule(ScheduleRule rule, double alpha0);

/// Source of informative measurements x~_t. The learner calls it only at
/// its own queried steps.
using QueryOracle = std::function<Vec(std::size_t t)>;

/// Oracle over a precomputed x~ sequence that throws ContractViolation when
/// called at a step outside `allowed` and counts calls.
class GuardedOracle {
public:
    GuardedOracle(std::vector<Vec> xtilde, QuerySchedule allowed);

    Vec operator()(std::size_t t);
    std::size_t calls() const { return calls_; }

private:
    std::vector<Vec> xtilde_;
    QuerySchedule allowed_;
    std::size_t calls_ = 0;
};

struct StateLearnerConfig {
    std::size_t T = 0;
    std::size_t tau = 1;
    int h = 1;
    StepSchedule eta;
    double radius = 0.0;
    double alpha0 = 0.0;
    Eigen::Index n = 0;
    Eigen::Index p = 0;
    /// Allows tau < h, outside the regime covered by the regret guarantee.
    bool force = false;
    /// When false the learner never queries (output-only variant).
    bool queries_enabled = true;

    void validate() const;
};

struct QueryRecord {
    std::size_t t = 0;
    Vec xtilde;
    double noisy_loss = 0.0;
};

struct StateTranscript {
    std::vector<FilterParams> params;  ///< M_t; empty unless recorded
    std::vector<Vec> estimates;        ///< x^_t(M_t)
    std::vector<double> param_norms;   ///< ||M_t||_F
    std::vector<QueryRecord> query_log;
    std::size_t update_count = 0;
    std::vector<std::size_t> restarts;
    std::vector<QuerySchedule> schedules;  ///< one per segment, local step indices
    /// True if some segment ended inside a partial block.
    bool partial_final_block = false;

    std::size_t length() const { return estimates.size(); }
};

/// Runs the query-based state learner over the first config.T outputs. The learner sees the outputs
/// and the oracle only; it never reads states.
StateTranscript ogd_state_run(const std::vector<Vec>& stream, const QueryOracle& query,
                              const StateLearnerConfig& config, std::uint64_t seed,
                              bool record_params = true);

/// Maps an interval length to its block length (default floor(sqrt(L))).
using TauRule = std::function<std::size_t(std::size_t)>;

std::size_t sqrt_tau(std::size_t length);

/// Horizon-free wrapper: restarts the state learner from M = 0 with a fresh query
/// schedule on each doubling interval. Interval i draws its offsets from
/// sub-stream i; its block length is max(tau_rule(L_i), h_i).
StateTranscript doubling_run_state(const std::vector<Vec>& stream, const QueryOracle& query,
                                   const TauRule& tau_rule, double alpha0, double radius,
                                   double gamma_F, Eigen::Index n, std::uint64_t seed,
                                   ScheduleRule rule = ScheduleRule::theorem,
                                   bool record_params = false);

}  // namespace kfl
