#pragma once

#include "kfl/kalman.hpp"
#include "kfl/online_output.hpp"
#include "kfl/online_state.hpp"
#include "kfl/system.hpp"

#include <optional>
#include <ostream>
#include <vector>

namespace kfl {

struct RegretCurve {
    std::vector<double> alg_loss;
    std::vector<double> kf_loss;
    std::vector<double> cumulative;  ///< cumulative[t] = sum_{s<=t} (alg_loss[s] - kf_loss[s])
    FilterKind kind = FilterKind::output;

    std::size_t length() const { return cumulative.size(); }
};

/// Builds a curve from per-step losses with a running sum.
RegretCurve make_curve(std::vector<double> alg_loss, std::vector<double> kf_loss, FilterKind kind);

/// Output regret of a learner transcript against the time-varying Kalman
/// filter built from the true system.
RegretCurve regret_output(const Trajectory& traj, const LearnerTranscript& transcript,
                          const LtiSystem& system);

/// State regret; uses the true states of `traj` for evaluation only.
RegretCurve regret_state(const Trajectory& traj, const StateTranscript& transcript,
                         const LtiSystem& system);

/// Same as regret_state for an arbitrary estimate sequence x^_t.
RegretCurve regret_state_estimates(const Trajectory& traj, const std::vector<Vec>& estimates,
                                   const LtiSystem& system);

enum class Normalizer { log4, sqrt, none };

std::string_view to_string(Normalizer normalizer);
Normalizer normalizer_from_string(std::string_view name);

struct AggregateCurve {
    std::vector<std::size_t> T_grid;  ///< horizons T; value at T uses cumulative[T - 1]
    std::vector<double> mean;
    std::vector<double> std;  ///< population (divide-by-N) convention
    std::vector<std::optional<double>> normalized;  ///< empty for T < 2
    Normalizer normalizer = Normalizer::none;
    FilterKind kind = FilterKind::output;
    std::size_t num_seeds = 0;
};

/// R / (ln T)^4, R / sqrt(T) or R; std::nullopt for T < 2.
std::optional<double> normalize(double value, std::size_t T, Normalizer normalizer);

/// Pointwise mean and population std of the curves at each grid horizon
/// (defaults to T = 1..length).
AggregateCurve aggregate(const std::vector<RegretCurve>& curves, Normalizer normalizer,
                         std::vector<std::size_t> T_grid = {});

/// Aggregates one final value per seed and horizon: values[s][g] is the
/// regret of seed s for horizon T_grid[g] (fresh run per horizon).
AggregateCurve aggregate_final(const std::vector<std::vector<double>>& values,
                               const std::vector<std::size_t>& T_grid, Normalizer normalizer,
                               FilterKind kind);

/// Columns t, alg_loss, kf_loss, cum_regret.
void write_curve_csv(std::ostream& os, const RegretCurve& curve);

/// Columns T, mean, std, normalized (blank when undefined).
void write_aggregate_csv(std::ostream& os, const AggregateCurve& agg);

}  // namespace kfl
