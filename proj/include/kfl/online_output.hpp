#pragma once

#include "kfl/history.hpp"
#include "kfl/kalman.hpp"
#include "kfl/linalg.hpp"

#include <cstddef>
#include <vector>

namespace kfl {

/// eta_0 = 0, eta_t = numerator / t for t >= 1.
struct StepSchedule {
    double numerator = 0.0;

    double operator()(long t) const { return t <= 0 ? 0.0 : numerator / static_cast<double>(t); }
};

/// Which tuning of step sizes and filter length to use.
///  - theorem:    regret-bound schedules (depend on alpha0 and gamma_F).
///  - experiment: the constants used for the published regret curves
///                (unit numerators, h = floor(ln T)).
enum class ScheduleRule { theorem, experiment };

/// eta_t = 2 / (alpha0 (ln T)^2 t).
StepSchedule step_schedule_output(std::size_t T, double alpha0);

StepSchedule output_schedule(ScheduleRule rule, std::size_t T, double alpha0);

/// Filter length for a horizon: horizon_h(T, gamma_F) under the theorem
/// rule, max(1, floor(ln T)) under the experiment rule.
int tuned_horizon(ScheduleRule rule, std::size_t T, double gamma_F);

/// I_d (x) ybar^T, so that build_Y(ybar, d) * P.vec() == P.stacked() * ybar.
Mat build_Y(const Vec& history, Eigen::Index d);

/// ||y_t - sum_s N_s y_{t-s}||^2 where `history` is the stacked window.
double loss_output(const FilterParams& N, const Vec& y_t, const Vec& history);

/// 2 Y^T (Y vec(N) - y_t).
Vec grad_output(const FilterParams& N, const Vec& y_t, const Mat& Y);

/// Euclidean projection onto the ball of the given radius.
Vec project_ball(const Vec& v, double radius);

/// In-place projection of a parameter matrix (Frobenius ball).
void project_ball_inplace(Mat& m, double radius);

struct OutputLearnerConfig {
    std::size_t T = 0;
    int h = 1;
    StepSchedule eta;
    double radius = 0.0;
    double alpha0 = 0.0;
    Eigen::Index p = 0;

    void validate() const;
};

struct LearnerTranscript {
    std::vector<FilterParams> params;  ///< N_t before the update at t; empty unless recorded
    std::vector<Vec> predictions;
    std::vector<double> losses;
    std::vector<double> grad_norms;
    std::vector<double> param_norms;  ///< ||N_t||_F
    std::vector<std::size_t> restarts;  ///< start index of each run segment

    std::size_t length() const { return losses.size(); }
};

/// Projected online gradient descent on the output filter, one step at a
/// time: call predict() for y^_t, then
/// observe(y_t) to pay the loss and take the projected gradient step.
class OutputLearner {
public:
    explicit OutputLearner(const OutputLearnerConfig& config);

    /// y^_t(N_t), a function of y_0..y_{t-1} only.
    Vec predict() const;

    /// Reveals y_t; returns the loss f_t(N_t).
    double observe(const Vec& y_t);

    /// Appends a past output to the regressor window without learning from it.
    void prime(const Vec& y_past) { history_.push(y_past); }

    const Mat& parameters() const { return params_; }
    FilterParams filter() const;
    long step() const { return t_; }
    double last_grad_norm() const { return last_grad_norm_; }

private:
    OutputLearnerConfig config_;
    Mat params_;
    HistoryWindow history_;
    long t_ = 0;
    double last_grad_norm_ = 0.0;
};

/// Runs the output learner on the first config.T outputs of `stream`.
LearnerTranscript ogd_output_run(const std::vector<Vec>& stream, const OutputLearnerConfig& config,
                                 bool record_params = true);

struct DoublingInterval {
    std::size_t start = 0;
    std::size_t planned = 0;  ///< L_i = T_i - T_{i-1}, T_i = 2^(2^i)
    std::size_t length = 0;   ///< planned length clipped to the stream
};

/// Restart intervals covering `total` steps.
std::vector<DoublingInterval> doubling_intervals(std::size_t total);

/// Horizon-free wrapper: restarts the output learner from N = 0 on every doubling
/// interval, tuned with the interval's planned length.
LearnerTranscript doubling_run_output(const std::vector<Vec>& stream, double alpha0,
                                      double radius, double gamma_F,
                                      ScheduleRule rule = ScheduleRule::theorem,
                                      bool record_params = false);

}  // namespace kfl
