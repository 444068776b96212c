#include "kfl/lowerbound.hpp"

#include "kfl/errors.hpp"
#include "kfl/kalman.hpp"
#include "kfl/online_state.hpp"
#include "kfl/rng.hpp"

#include <cmath>
#include <random>

namespace kfl {

namespace {

constexpr double kA = 0.2;

/// Hands out no states: any call is a contract violation.
Vec deny_state_access(std::size_t t)
{
    throw ContractViolation("output-only estimator requested the state at t = " +
                            std::to_string(t));
}

std::vector<Vec> zero_estimates(const std::vector<Vec>& y)
{
    return std::vector<Vec>(y.size(), Vec::Zero(1));
}

/// x^_t = phi_t y_{t-1}, phi_t the ridge-regularized (unit prior weight)
/// least-squares AR(1) coefficient fitted on y_0..y_{t-1}.
std::vector<Vec> least_squares_estimates(const std::vector<Vec>& y)
{
    std::vector<Vec> out;
    out.reserve(y.size());
    double sxy = 0.0;
    double sxx = 1.0;
    for (std::size_t t = 0; t < y.size(); ++t) {
        double est = 0.0;
        if (t >= 1) {
            if (t >= 2) {
                sxy += y[t - 1](0) * y[t - 2](0);
                sxx += y[t - 2](0) * y[t - 2](0);
            }
            const double phi = sxy / sxx;
            est = phi * y[t - 1](0);
        }
        out.push_back(Vec::Constant(1, est));
    }
    return out;
}

std::vector<Vec> algorithm2_estimates(const std::vector<Vec>& y)
{
    const std::size_t T = y.size();
    StateLearnerConfig cfg;
    cfg.T = T;
    cfg.h = tuned_horizon(ScheduleRule::experiment, std::max<std::size_t>(T, 2), 0.5);
    cfg.tau = std::max(sqrt_tau(T), static_cast<std::size_t>(cfg.h));
    cfg.eta = state_schedule(ScheduleRule::experiment, 1.0);
    cfg.radius = 1.0;
    cfg.alpha0 = 1.0;
    cfg.n = 1;
    cfg.p = 1;
    cfg.queries_enabled = false;
    return ogd_state_run(y, deny_state_access, cfg, 0, false).estimates;
}

}  // namespace

std::string_view to_string(LowerBoundEstimator estimator)
{
    switch (estimator) {
    case LowerBoundEstimator::zero: return "zero";
    case LowerBoundEstimator::least_squares_regressor: return "least-squares-regressor";
    case LowerBoundEstimator::algorithm2_without_queries: return "algorithm-2-without-queries";
    }
    return "zero";
}

LowerBoundEstimator lower_bound_estimator_from_string(std::string_view name)
{
    for (LowerBoundEstimator e : all_lower_bound_estimators())
        if (to_string(e) == name) return e;
    throw DomainError("unknown estimator '" + std::string(name) + "'");
}

const std::vector<LowerBoundEstimator>& all_lower_bound_estimators()
{
    static const std::vector<LowerBoundEstimator> all{
        LowerBoundEstimator::zero, LowerBoundEstimator::least_squares_regressor,
        LowerBoundEstimator::algorithm2_without_queries};
    return all;
}

double LowerBoundConfig::effective_sigma_v() const
{
    return sigma_v > 0.0 ? sigma_v : 1.0 / static_cast<double>(T);
}

void LowerBoundConfig::validate() const
{
    if (!(sigma_w > 0.0)) throw ConfigError("sigma_w", "must be positive");
    if (T < 2) throw ConfigError("T", "must be >= 2");
    if (num_trials < 1) throw ConfigError("trials", "must be >= 1");
    if (sigma_v < 0.0) throw ConfigError("sigma_v", "must be nonnegative");
}

double theoretical_floor(double sigma_w, std::size_t T)
{
    if (!(sigma_w > 0.0)) throw DomainError("sigma_w must be positive");
    return 6.0 * static_cast<double>(T) * sigma_w - (56.0 + 50.0 * sigma_w) / (1875.0 * sigma_w);
}

std::vector<Vec> estimate_states(LowerBoundEstimator estimator, const std::vector<Vec>& y)
{
    for (const Vec& yt : y)
        if (yt.size() != 1) throw DimensionError("lower-bound estimators are scalar");
    switch (estimator) {
    case LowerBoundEstimator::zero: return zero_estimates(y);
    case LowerBoundEstimator::least_squares_regressor: return least_squares_estimates(y);
    case LowerBoundEstimator::algorithm2_without_queries: return algorithm2_estimates(y);
    }
    throw DomainError("unknown estimator");
}

LowerBoundReport run_lower_bound(const LowerBoundConfig& config, std::uint64_t seed)
{
    config.validate();
    const std::size_t T = config.T;
    const double sigma_v = config.effective_sigma_v();

    std::array<LtiSystem, 3> systems;
    std::array<RiccatiSequence, 3> gains;
    for (std::size_t i = 0; i < 3; ++i) {
        systems[i] = make_lower_bound_instance(kLowerBoundR[i], config.sigma_w, sigma_v);
        gains[i] = riccati_sequence(systems[i], T);
    }

    LowerBoundReport report;
    report.sigma_w = config.sigma_w;
    report.sigma_v = sigma_v;
    report.T = T;
    report.trials = config.num_trials;
    report.estimator = config.estimator;
    report.seed = seed;
    report.theoretical_floor = theoretical_floor(config.sigma_w, T);
    report.floor_applies = config.sigma_v == 0.0;

    const double sw = std::sqrt(config.sigma_w);
    const double sv = std::sqrt(sigma_v);
    double sum = 0.0;
    double sum_sq = 0.0;
    std::vector<Vec> w(T, Vec::Zero(1));
    std::vector<Vec> v(T, Vec::Zero(1));
    for (std::size_t trial = 0; trial < config.num_trials; ++trial) {
        auto engine = make_stream(seed, Stream::trial, trial);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<double> wtilde(T);
        for (std::size_t t = 0; t < T; ++t) {
            wtilde[t] = sw * normal(engine);
            v[t](0) = sv * normal(engine);
        }

        double trial_regret = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            const double r = kLowerBoundR[i];
            for (std::size_t t = 0; t < T; ++t) w[t](0) = r * wtilde[t];
            const Trajectory traj = simulate_with_noise(systems[i], w, v);
            const std::vector<Vec> est = estimate_states(config.estimator, traj.y);
            const Estimates kf = kf_estimate(systems[i], gains[i], traj.y);
            double regret = 0.0;
            for (std::size_t t = 0; t < T; ++t) {
                const double e_alg = traj.x[t](0) - est[t](0);
                const double e_kf = traj.x[t](0) - kf.state[t](0);
                regret += e_alg * e_alg - e_kf * e_kf;
            }
            report.per_r[i] += regret;
            trial_regret += regret / 3.0;
        }
        sum += trial_regret;
        sum_sq += trial_regret * trial_regret;
    }

    const double n = static_cast<double>(config.num_trials);
    for (double& value : report.per_r) value /= n;
    report.empirical_mean_regret = sum / n;
    const double var = std::max(0.0, sum_sq / n - report.empirical_mean_regret *
                                                      report.empirical_mean_regret);
    report.standard_error = n > 1 ? std::sqrt(var * n / (n - 1) / n) : 0.0;
    return report;
}

double zero_estimator_expected_regret(double r, double sigma_w, double sigma_v, std::size_t T)
{
    const LtiSystem sys = make_lower_bound_instance(r, sigma_w, sigma_v);
    const RiccatiSequence seq = riccati_sequence(sys, T);
    const double a2 = kA * kA;
    double total = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        const double state_var =
            r * r * sigma_w * (1.0 - std::pow(a2, static_cast<double>(t))) / (1.0 - a2);
        total += state_var - seq.Sigma[t](0, 0);
    }
    return total;
}

std::vector<double> scalar_kf_check(double r, double sigma_w, double sigma_v, std::size_t T)
{
    if (T == 0) throw DomainError("scalar_kf_check needs T >= 1");
    const LtiSystem sys = make_lower_bound_instance(r, sigma_w, sigma_v);
    const RiccatiSequence matrix_path = riccati_sequence(sys, T);

    const double c2 = 1.0 / (r * r);
    const double q = r * r * sigma_w;
    const double bound = r * r * sigma_v / 25.0 + q;
    std::vector<double> sigma(T);
    sigma[0] = 0.0;
    for (std::size_t t = 1; t < T; ++t) {
        const double s = sigma[t - 1];
        const double innovation = c2 * s + sigma_v;
        const double correction = innovation > 0.0 ? (s * s * c2 / 25.0) / innovation : 0.0;
        sigma[t] = s / 25.0 - correction + q;
    }
    for (std::size_t t = 0; t < T; ++t) {
        if (std::abs(sigma[t] - matrix_path.Sigma[t](0, 0)) > 1e-12)
            throw ConsistencyError("scalar Riccati recursion departs from the matrix path at t = " +
                                   std::to_string(t));
        if (t >= 1 && sigma[t] > bound + 1e-12)
            throw ConsistencyError("scalar Riccati value exceeds the suboptimal-filter bound at t = " +
                                   std::to_string(t));
    }
    return sigma;
}

}  // namespace kfl
