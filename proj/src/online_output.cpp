#include "kfl/online_output.hpp"

#include "kfl/errors.hpp"

#include <cmath>
#include <limits>

namespace kfl {

namespace {

double log_squared(std::size_t T)
{
    const double l = std::log(static_cast<double>(T));
    return l * l;
}

}  // namespace

StepSchedule step_schedule_output(std::size_t T, double alpha0)
{
    if (T < 2) throw DomainError("output step schedule needs T >= 2");
    if (!(alpha0 > 0.0)) throw DomainError("alpha0 must be positive");
    return StepSchedule{2.0 / (alpha0 * log_squared(T))};
}

StepSchedule output_schedule(ScheduleRule rule, std::size_t T, double alpha0)
{
    if (rule == ScheduleRule::theorem) return step_schedule_output(T, alpha0);
    if (T < 2) throw DomainError("output step schedule needs T >= 2");
    return StepSchedule{1.0 / log_squared(T)};
}

int tuned_horizon(ScheduleRule rule, std::size_t T, double gamma_F)
{
    if (rule == ScheduleRule::theorem) return horizon_h(T, gamma_F);
    if (T < 2) throw DomainError("filter length needs T >= 2");
    return std::max(1, static_cast<int>(std::floor(std::log(static_cast<double>(T)))));
}

Mat build_Y(const Vec& history, Eigen::Index d)
{
    const Eigen::Index w = history.size();
    Mat Y = Mat::Zero(d, d * w);
    for (Eigen::Index i = 0; i < d; ++i) Y.block(i, i * w, 1, w) = history.transpose();
    return Y;
}

double loss_output(const FilterParams& N, const Vec& y_t, const Vec& history)
{
    if (N.kind() != FilterKind::output) throw DomainError("loss_output needs an output filter");
    if (history.size() != N.p() * N.h()) throw DimensionError("history window does not match h");
    return (y_t - N.stacked() * history).squaredNorm();
}

Vec grad_output(const FilterParams& N, const Vec& y_t, const Mat& Y)
{
    if (Y.cols() != N.stacked().size() || Y.rows() != y_t.size())
        throw DimensionError("Y does not match the filter and output dimensions");
    return 2.0 * Y.transpose() * (Y * N.vec() - y_t);
}

Vec project_ball(const Vec& v, double radius)
{
    Mat m = v;
    project_ball_inplace(m, radius);
    return m;
}

void project_ball_inplace(Mat& m, double radius)
{
    if (!(radius > 0.0)) throw DomainError("projection radius must be positive");
    const double norm = m.norm();
    if (norm <= radius) return;
    m *= radius / norm;
    // Rounding can leave the norm one ulp above the radius; nudge inward so
    // the result is a fixed point of the projection.
    while (m.norm() > radius) m *= 1.0 - std::numeric_limits<double>::epsilon();
}

void OutputLearnerConfig::validate() const
{
    if (T < 2) throw ConfigError("T", "learner horizon must be >= 2");
    if (h < 1) throw ConfigError("h", "filter length must be >= 1");
    if (!(radius > 0.0)) throw ConfigError("radius", "must be positive");
    if (!(eta.numerator > 0.0)) throw ConfigError("eta", "step sizes must be positive");
    if (p < 1) throw ConfigError("p", "output dimension must be >= 1");
}

OutputLearner::OutputLearner(const OutputLearnerConfig& config)
    : config_(config), params_(Mat::Zero(config.p, config.p * config.h)),
      history_(config.p, config.h)
{
    config_.validate();
}

Vec OutputLearner::predict() const { return params_ * history_.stacked(); }

double OutputLearner::observe(const Vec& y_t)
{
    if (y_t.size() != config_.p) throw DimensionError("output has the wrong dimension");
    const Vec& hist = history_.stacked();
    const Vec residual = params_ * hist - y_t;
    const double loss = residual.squaredNorm();
    // grad f_t = 2 Y^T (Y vec(N) - y_t), i.e. 2 (N ybar - y_t) ybar^T in matrix form.
    const Mat grad = 2.0 * residual * hist.transpose();
    last_grad_norm_ = grad.norm();
    params_ -= config_.eta(t_) * grad;
    project_ball_inplace(params_, config_.radius);
    history_.push(y_t);
    ++t_;
    return loss;
}

FilterParams OutputLearner::filter() const
{
    return FilterParams(FilterKind::output, params_, config_.p, config_.radius);
}

namespace {

void run_segment(OutputLearner& learner, const std::vector<Vec>& stream, std::size_t start,
                 std::size_t length, bool record_params, LearnerTranscript& out)
{
    for (std::size_t k = 0; k < length; ++k) {
        if (record_params) out.params.push_back(learner.filter());
        out.param_norms.push_back(learner.parameters().norm());
        out.predictions.push_back(learner.predict());
        out.losses.push_back(learner.observe(stream[start + k]));
        out.grad_norms.push_back(learner.last_grad_norm());
    }
}

}  // namespace

LearnerTranscript ogd_output_run(const std::vector<Vec>& stream, const OutputLearnerConfig& config,
                                 bool record_params)
{
    config.validate();
    if (stream.size() < config.T)
        throw DomainError("output stream shorter than the configured horizon");

    OutputLearner learner(config);
    LearnerTranscript out;
    out.restarts.push_back(0);
    run_segment(learner, stream, 0, config.T, record_params, out);
    return out;
}

std::vector<DoublingInterval> doubling_intervals(std::size_t total)
{
    std::vector<DoublingInterval> out;
    std::size_t prev_end = 0;  // T_{i-1}
    for (unsigned i = 0; prev_end < total; ++i) {
        if (i >= 6) throw DomainError("horizon too long for the doubling schedule");
        const std::size_t end = std::size_t{1} << (std::size_t{1} << i);  // 2^(2^i)
        DoublingInterval iv;
        iv.start = prev_end;
        iv.planned = end - prev_end;
        iv.length = std::min(iv.planned, total - prev_end);
        out.push_back(iv);
        prev_end = end;
    }
    return out;
}

LearnerTranscript doubling_run_output(const std::vector<Vec>& stream, double alpha0,
                                      double radius, double gamma_F, ScheduleRule rule,
                                      bool record_params)
{
    if (stream.empty()) throw DomainError("empty output stream");
    LearnerTranscript out;
    for (const DoublingInterval& iv : doubling_intervals(stream.size())) {
        OutputLearnerConfig cfg;
        cfg.T = iv.planned;
        cfg.h = tuned_horizon(rule, iv.planned, gamma_F);
        cfg.eta = output_schedule(rule, iv.planned, alpha0);
        cfg.radius = radius;
        cfg.alpha0 = alpha0;
        cfg.p = stream.front().size();

        // Parameters restart from zero; the output window still sees the
        // outputs observed before the restart.
        OutputLearner learner(cfg);
        const std::size_t warm = std::min<std::size_t>(iv.start, static_cast<std::size_t>(cfg.h));
        for (std::size_t k = iv.start - warm; k < iv.start; ++k) learner.prime(stream[k]);
        out.restarts.push_back(iv.start);
        run_segment(learner, stream, iv.start, iv.length, record_params, out);
    }
    return out;
}

}  // namespace kfl
