#include "kfl/online_state.hpp"

#include "kfl/errors.hpp"
#include "kfl/rng.hpp"

#include <cmath>
#include <random>
#include <string>

namespace kfl {

bool QuerySchedule::is_queried(std::size_t t) const { return queried_steps.count(t) != 0; }

QuerySchedule sample_offsets(std::size_t tau, std::size_t num_blocks, std::uint64_t seed,
                             std::optional<std::size_t> T, std::uint64_t sub)
{
    if (tau < 1) throw DomainError("block length tau must be >= 1");
    QuerySchedule out;
    out.tau = tau;
    out.offsets.reserve(num_blocks);
    auto engine = make_stream(seed, Stream::query_offsets, sub);
    std::uniform_int_distribution<std::size_t> offset(0, tau - 1);
    for (std::size_t i = 0; i < num_blocks; ++i) {
        const std::size_t b = offset(engine);
        out.offsets.push_back(b);
        const std::size_t step = i * tau + b;
        if (!T || step < *T) out.queried_steps.insert(step);
    }
    return out;
}

QuerySchedule run_schedule(std::size_t T, std::size_t tau, std::uint64_t seed, std::uint64_t sub)
{
    if (tau < 1) throw DomainError("block length tau must be >= 1");
    return sample_offsets(tau, (T + tau - 1) / tau, seed, T, sub);
}

Vec grad_state_noisy(const FilterParams& M, const Vec& xtilde_t, const Mat& Y)
{
    if (M.kind() != FilterKind::state) throw DomainError("grad_state_noisy needs a state filter");
    if (Y.cols() != M.stacked().size() || Y.rows() != xtilde_t.size())
        throw DimensionError("Y does not match the filter and state dimensions");
    return 2.0 * Y.transpose() * (Y * M.vec() - xtilde_t);
}

StepSchedule step_schedule_state(double alpha0)
{
    if (!(alpha0 > 0.0)) throw DomainError("alpha0 must be positive");
    return StepSchedule{2.0 / alpha0};
}

StepSchedule state_schedule(ScheduleRule rule, double alpha0)
{
    if (rule == ScheduleRule::theorem) return step_schedule_state(alpha0);
    return StepSchedule{1.0};
}

GuardedOracle::GuardedOracle(std::vector<Vec> xtilde, QuerySchedule allowed)
    : xtilde_(std::move(xtilde)), allowed_(std::move(allowed))
{
}

Vec GuardedOracle::operator()(std::size_t t)
{
    if (!allowed_.is_queried(t))
        throw ContractViolation("informative measurement requested off-schedule at t = " +
                                std::to_string(t));
    if (t >= xtilde_.size()) throw DomainError("query beyond the measurement sequence");
    ++calls_;
    return xtilde_[t];
}

void StateLearnerConfig::validate() const
{
    if (T < 1) throw ConfigError("T", "learner horizon must be >= 1");
    if (tau < 1) throw ConfigError("tau", "block length must be >= 1");
    if (h < 1) throw ConfigError("h", "filter length must be >= 1");
    if (!force && tau < static_cast<std::size_t>(h))
        throw ConfigError("tau", "block length must be >= h (set force to override)");
    if (!(eta.numerator > 0.0)) throw ConfigError("eta", "step sizes must be positive");
    if (!(radius > 0.0)) throw ConfigError("radius", "must be positive");
    if (n < 1) throw ConfigError("n", "state dimension must be >= 1");
    if (p < 1) throw ConfigError("p", "output dimension must be >= 1");
}

namespace {

/// Runs one state-learner segment over stream[start, start + length) with
/// local query schedule `schedule`. `warm` outputs before `start` seed the
/// regressor window.
void run_state_segment(const std::vector<Vec>& stream, const QueryOracle& query,
                       const StateLearnerConfig& cfg, const QuerySchedule& schedule,
                       std::size_t start, std::size_t length, std::size_t warm,
                       bool record_params, StateTranscript& out)
{
    Mat M = Mat::Zero(cfg.n, cfg.p * cfg.h);
    HistoryWindow history(cfg.p, cfg.h);
    for (std::size_t k = start - warm; k < start; ++k) history.push(stream[k]);
    long j = 0;

    for (std::size_t k = 0; k < length; ++k) {
        const std::size_t t = start + k;
        const Vec& ybar = history.stacked();
        const Vec xhat = M * ybar;
        if (record_params) out.params.emplace_back(FilterKind::state, M, cfg.p, cfg.radius);
        out.param_norms.push_back(M.norm());
        out.estimates.push_back(xhat);

        if (cfg.queries_enabled && schedule.is_queried(k)) {
            const Vec xtilde = query(t);
            if (xtilde.size() != cfg.n) throw DimensionError("informative measurement has wrong size");
            const Vec residual = xhat - xtilde;
            out.query_log.push_back({t, xtilde, residual.squaredNorm()});
            // 2 (M ybar - x~_t) ybar^T, the matrix form of 2 Y^T (Y vec(M) - x~_t).
            M -= cfg.eta(j) * (2.0 * residual * ybar.transpose());
            project_ball_inplace(M, cfg.radius);
            ++j;
            ++out.update_count;
        }
        history.push(stream[t]);
    }
}

}  // namespace

StateTranscript ogd_state_run(const std::vector<Vec>& stream, const QueryOracle& query,
                              const StateLearnerConfig& config, std::uint64_t seed,
                              bool record_params)
{
    config.validate();
    if (stream.size() < config.T)
        throw DomainError("output stream shorter than the configured horizon");

    const QuerySchedule schedule = run_schedule(config.T, config.tau, seed);
    StateTranscript out;
    out.restarts.push_back(0);
    out.schedules.push_back(schedule);
    out.partial_final_block = config.T % config.tau != 0;
    run_state_segment(stream, query, config, schedule, 0, config.T, 0, record_params, out);
    return out;
}

std::size_t sqrt_tau(std::size_t length)
{
    auto r = static_cast<std::size_t>(std::sqrt(static_cast<double>(length)));
    while (r * r > length) --r;
    while ((r + 1) * (r + 1) <= length) ++r;
    return std::max<std::size_t>(1, r);
}

StateTranscript doubling_run_state(const std::vector<Vec>& stream, const QueryOracle& query,
                                   const TauRule& tau_rule, double alpha0, double radius,
                                   double gamma_F, Eigen::Index n, std::uint64_t seed,
                                   ScheduleRule rule, bool record_params)
{
    if (stream.empty()) throw DomainError("empty output stream");
    StateTranscript out;
    std::uint64_t sub = 0;
    for (const DoublingInterval& iv : doubling_intervals(stream.size())) {
        StateLearnerConfig cfg;
        cfg.T = iv.planned;
        cfg.h = tuned_horizon(rule, iv.planned, gamma_F);
        cfg.tau = std::max(tau_rule(iv.planned), static_cast<std::size_t>(cfg.h));
        cfg.eta = state_schedule(rule, alpha0);
        cfg.radius = radius;
        cfg.alpha0 = alpha0;
        cfg.n = n;
        cfg.p = stream.front().size();
        cfg.validate();

        const QuerySchedule schedule = run_schedule(iv.length, cfg.tau, seed, sub++);
        const std::size_t warm = std::min<std::size_t>(iv.start, static_cast<std::size_t>(cfg.h));
        out.restarts.push_back(iv.start);
        out.schedules.push_back(schedule);
        if (iv.length % cfg.tau != 0) out.partial_final_block = true;
        run_state_segment(stream, query, cfg, schedule, iv.start, iv.length, warm, record_params,
                          out);
    }
    return out;
}

}  // namespace kfl
