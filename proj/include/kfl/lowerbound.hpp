#pragma once

#include "kfl/linalg.hpp"
#include "kfl/system.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace kfl {

/// Output-only state estimators evaluated on the hard instance family.
enum class LowerBoundEstimator { zero, least_squares_regressor, algorithm2_without_queries };

std::string_view to_string(LowerBoundEstimator estimator);
LowerBoundEstimator lower_bound_estimator_from_string(std::string_view name);
const std::vector<LowerBoundEstimator>& all_lower_bound_estimators();

/// The values of r; the three systems share outputs, states scale by r.
inline constexpr std::array<double, 3> kLowerBoundR{1.0, 4.0, -2.0};

struct LowerBoundConfig {
    double sigma_w = 1.0;
    std::size_t T = 500;
    std::size_t num_trials = 2000;
    LowerBoundEstimator estimator = LowerBoundEstimator::zero;
    /// Measurement variance; 0 selects the hard-instance choice 1 / T. Any
    /// other value voids the printed floor.
    double sigma_v = 0.0;

    double effective_sigma_v() const;
    void validate() const;
};

struct LowerBoundReport {
    double sigma_w = 0.0;
    double sigma_v = 0.0;
    std::size_t T = 0;
    std::size_t trials = 0;
    LowerBoundEstimator estimator = LowerBoundEstimator::zero;
    std::uint64_t seed = 0;
    double empirical_mean_regret = 0.0;
    double standard_error = 0.0;  ///< of the trial mean
    double theoretical_floor = 0.0;
    bool floor_applies = true;    ///< false when sigma_v was overridden
    std::array<double, 3> per_r{};  ///< mean regret for r = 1, 4, -2
};

/// 6 T sigma_w - (56 + 50 sigma_w) / (1875 sigma_w).
double theoretical_floor(double sigma_w, std::size_t T);

/// Estimates x^_0..x^_{T-1} from the output stream alone; x^_t depends on
/// y_0..y_{t-1} only.
std::vector<Vec> estimate_states(LowerBoundEstimator estimator, const std::vector<Vec>& y);

/// Matched-seed Monte Carlo: each trial draws one (w~, v) realization and
/// runs all three r-systems with w = r w~, so the r-average is exact.
LowerBoundReport run_lower_bound(const LowerBoundConfig& config, std::uint64_t seed);

/// Expected state regret of the zero estimator on the r-system:
/// sum_t [r^2 sigma_w (1 - a^(2t)) / (1 - a^2) - Sigma_t].
double zero_estimator_expected_regret(double r, double sigma_w, double sigma_v, std::size_t T);

/// Scalar Riccati sequence Sigma_0..Sigma_{T-1} of the r-system. Throws
/// ConsistencyError if it departs from the matrix recursion by more than
/// 1e-12 or exceeds r^2 sigma_v / 25 + r^2 sigma_w for some t >= 1.
std::vector<double> scalar_kf_check(double r, double sigma_w, double sigma_v, std::size_t T);

}  // namespace kfl
