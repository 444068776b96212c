#include "kfl/errors.hpp"
#include "kfl/online_output.hpp"
#include "kfl/system.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace kfl;
using kfl::test::random_matrix;
using kfl::test::random_vector;
using kfl::test::scalar;

namespace {

/// Direct block sum of P_s y_{t-s}, independent of the vec layout.
Vec block_sum(const Mat& stacked, const Vec& history, Eigen::Index p)
{
    Vec out = Vec::Zero(stacked.rows());
    for (Eigen::Index s = 0; s < history.size() / p; ++s)
        out += stacked.middleCols(s * p, p) * history.segment(s * p, p);
    return out;
}

double quad_loss(const Vec& theta, const Mat& Y, const Vec& target)
{
    return (Y * theta - target).squaredNorm();
}

OutputLearnerConfig scalar_config(std::size_t T, double numerator)
{
    OutputLearnerConfig cfg;
    cfg.T = T;
    cfg.h = 1;
    cfg.eta = StepSchedule{numerator};
    cfg.radius = 100.0;
    cfg.alpha0 = 1.0;
    cfg.p = 1;
    return cfg;
}

}  // namespace

TEST_CASE("build_Y")
{
    CHECK(build_Y(Vec::Zero(6), 4).isZero(0.0));
    CHECK(build_Y(Vec::Zero(6), 4).rows() == 4);
    CHECK(build_Y(Vec::Zero(6), 4).cols() == 24);

    const Mat Y1 = build_Y(scalar(3.0), 1);
    CHECK(Y1(0, 0) == 3.0);

    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const Vec history = random_vector(rng, 6);
        const Mat M = random_matrix(rng, 4, 6);
        const FilterParams P(FilterKind::state, M, 2, 1e6);
        CHECK((build_Y(history, 4) * P.vec() - block_sum(M, history, 2)).norm() <= 1e-13);
    }
}

TEST_CASE("loss_output")
{
    CHECK(loss_output(FilterParams(FilterKind::output, 1, 1, 1, 1.0), scalar(0.0), scalar(0.0)) ==
          0.0);
    const FilterParams half(FilterKind::output, scalar(0.5), 1, 10.0);
    CHECK(loss_output(half, scalar(0.0), scalar(2.0)) == 1.0);

    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const Vec history = random_vector(rng, 6);
        const Vec y = random_vector(rng, 2);
        const FilterParams N(FilterKind::output, random_matrix(rng, 2, 6), 2, 1e6);
        const Mat Y = build_Y(history, 2);
        const Vec r = Y * N.vec() - y;
        CHECK(std::abs(loss_output(N, y, history) - r.dot(r)) <= 1e-13 * (1.0 + r.dot(r)));
    }
    const FilterParams state(FilterKind::state, 2, 2, 3, 1.0);
    CHECK_THROWS_AS(loss_output(state, Vec::Zero(2), Vec::Zero(6)), DomainError);
}

TEST_CASE("grad_output")
{
    const FilterParams zero(FilterKind::output, 2, 2, 3, 1.0);
    CHECK(grad_output(zero, Vec::Zero(2), Mat::Zero(2, 12)).isZero(0.0));

    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const Vec history = random_vector(rng, 6);
        const Vec y = random_vector(rng, 2);
        const FilterParams N(FilterKind::output, random_matrix(rng, 2, 6), 2, 1e6);
        const Mat Y = build_Y(history, 2);
        const Vec g = grad_output(N, y, Y);
        const Vec theta = N.vec();
        Vec fd(theta.size());
        const double step = 1e-6;
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
            Vec up = theta, down = theta;
            up(i) += step;
            down(i) -= step;
            fd(i) = (quad_loss(up, Y, y) - quad_loss(down, Y, y)) / (2 * step);
        }
        CHECK((fd - g).norm() <= 1e-5 * std::max(1.0, g.norm()));
    }

    // Noiseless data generated by N*: the gradient vanishes at N*.
    const Mat Nstar = random_matrix(rng, 2, 6);
    const Vec history = random_vector(rng, 6);
    const Vec y = block_sum(Nstar, history, 2);
    const FilterParams at_star(FilterKind::output, Nstar, 2, 1e6);
    CHECK(grad_output(at_star, y, build_Y(history, 2)).norm() <= 1e-13);
}

TEST_CASE("project_ball")
{
    Vec v(2);
    v << 6.0, 8.0;
    const Vec pv = project_ball(v, 5.0);
    CHECK(pv.norm() == doctest::Approx(5.0).epsilon(1e-15));
    CHECK((pv.normalized() - v.normalized()).norm() <= 1e-15);
    Vec inside(2);
    inside << 0.0, 3.0;
    CHECK(project_ball(inside, 5.0) == inside);
    CHECK(project_ball(pv, 5.0) == pv);

    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 1000; ++trial) {
        const Vec a = random_vector(rng, 5, 3.0);
        const Vec b = random_vector(rng, 5, 3.0);
        const Vec pa = project_ball(a, 2.0);
        CHECK(pa.norm() <= 2.0 * (1 + 1e-15));
        CHECK(project_ball(pa, 2.0) == pa);
        CHECK((pa - project_ball(b, 2.0)).norm() <= (a - b).norm() * (1 + 1e-12));
    }

    Mat m = Mat::Constant(2, 2, 5.0);
    project_ball_inplace(m, 1.0);
    CHECK(m.norm() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("output step schedule")
{
    const std::size_t T = 7;  // ln 7 used directly below
    const StepSchedule eta = step_schedule_output(T, 1.0);
    const double l = std::log(7.0);
    CHECK(eta(0) == 0.0);
    CHECK(eta(1) == doctest::Approx(2.0 / (l * l)).epsilon(1e-15));
    CHECK(eta(6) == doctest::Approx(eta(3) / 2.0).epsilon(1e-15));

    // ln T = 2 only for T = e^2; the numerator formula is checked instead.
    const StepSchedule e2{2.0 / (1.0 * 2.0 * 2.0)};
    CHECK(e2(1) == 0.5);

    CHECK_THROWS_AS(step_schedule_output(1, 1.0), DomainError);
    CHECK(output_schedule(ScheduleRule::experiment, T, 0.25).numerator ==
          doctest::Approx(1.0 / (l * l)));
    CHECK(tuned_horizon(ScheduleRule::experiment, 3000, 0.9) == 8);
    CHECK(tuned_horizon(ScheduleRule::theorem, 8, 0.5) == 3);
}

TEST_CASE("ogd_output_run")
{
    SUBCASE("zero stream")
    {
        const LearnerTranscript tr =
            ogd_output_run(std::vector<Vec>(30, Vec::Zero(1)), scalar_config(30, 1.0));
        for (const FilterParams& N : tr.params) CHECK(N.stacked().isZero(0.0));
        double total = 0.0;
        for (double l : tr.losses) total += l;
        CHECK(total == 0.0);
    }

    SUBCASE("hand trace")
    {
        // t=0: prediction 0, loss 1, eta_0 = 0. t=1: prediction 0, gradient
        // 2 (0 - 1) 1 = -2, so N_2 = 0.1 * 2. t=2: prediction 0.2.
        const std::vector<Vec> y{scalar(1.0), scalar(1.0), scalar(1.0)};
        const LearnerTranscript tr = ogd_output_run(y, scalar_config(3, 0.1));
        CHECK(tr.losses[0] == 1.0);
        CHECK(tr.losses[1] == 1.0);
        CHECK(tr.params[1].stacked()(0, 0) == 0.0);
        CHECK(std::abs(tr.params[2].stacked()(0, 0) - 0.2) <= 1e-12);
        CHECK(std::abs(tr.predictions[2](0) - 0.2) <= 1e-12);
        CHECK(std::abs(tr.losses[2] - 0.64) <= 1e-12);
    }

    SUBCASE("transcript invariants and feasibility")
    {
        const LtiSystem sys = make_random_instance(4, 2, 0.9, 0.25, 0.25, 3);
        const Trajectory traj = simulate(sys, 400, 3);
        OutputLearnerConfig cfg;
        cfg.T = 400;
        cfg.h = 4;
        cfg.eta = StepSchedule{5.0};
        cfg.radius = 0.5;
        cfg.alpha0 = 0.25;
        cfg.p = 2;
        const LearnerTranscript tr = ogd_output_run(traj.y, cfg);
        REQUIRE(tr.length() == 400);
        for (std::size_t t = 0; t < 400; ++t) {
            CHECK(tr.losses[t] == (traj.y[t] - tr.predictions[t]).squaredNorm());
            CHECK(tr.params[t].frobenius() <= 0.5 * (1 + 1e-12));
        }
        CHECK(tr.params[0].stacked().isZero(0.0));
    }

    SUBCASE("causality")
    {
        const LtiSystem sys = make_random_instance(4, 2, 0.9, 0.25, 0.25, 5);
        const Trajectory traj = simulate(sys, 60, 5);
        OutputLearnerConfig cfg;
        cfg.T = 60;
        cfg.h = 3;
        cfg.eta = StepSchedule{1.0};
        cfg.radius = 10.0;
        cfg.alpha0 = 0.25;
        cfg.p = 2;
        const LearnerTranscript base = ogd_output_run(traj.y, cfg);
        for (std::size_t t : {0UL, 17UL, 59UL}) {
            std::vector<Vec> perturbed = traj.y;
            perturbed[t] += Vec::Constant(2, 7.0);
            const LearnerTranscript alt = ogd_output_run(perturbed, cfg);
            for (std::size_t k = 0; k <= t; ++k) CHECK(alt.predictions[k] == base.predictions[k]);
            // N_1 = 0 since eta_0 = 0, so a change in y_0 first shows at t = 2.
            if (t > 0 && t + 1 < 60) CHECK(alt.predictions[t + 1] != base.predictions[t + 1]);
        }
    }

    SUBCASE("stream shorter than the horizon")
    {
        CHECK_THROWS_AS(ogd_output_run(std::vector<Vec>(5, Vec::Zero(1)), scalar_config(6, 1.0)),
                        DomainError);
    }
}

TEST_CASE("doubling intervals")
{
    const auto iv = doubling_intervals(6);
    REQUIRE(iv.size() == 3);
    CHECK(iv[0].start == 0);
    CHECK(iv[1].start == 2);
    CHECK(iv[2].start == 4);
    CHECK(iv[0].length == 2);
    CHECK(iv[1].length == 2);
    CHECK(iv[2].length == 2);
    CHECK(iv[2].planned == 12);

    // Oracle: cumulative boundaries are 2^(2^i).
    const auto big = doubling_intervals(70000);
    std::size_t boundary = 0;
    for (std::size_t i = 0; i < big.size(); ++i) {
        CHECK(big[i].start == boundary);
        const std::size_t Ti = std::size_t{1} << (std::size_t{1} << i);
        CHECK(big[i].planned == Ti - (i == 0 ? 0 : (std::size_t{1} << (std::size_t{1} << (i - 1)))));
        boundary += big[i].length;
    }
    CHECK(boundary == 70000);
}

TEST_CASE("doubling_run_output")
{
    const LtiSystem sys = make_random_instance(4, 2, 0.9, 0.25, 0.25, 9);
    const Trajectory traj = simulate(sys, 300, 9);
    const LearnerTranscript tr =
        doubling_run_output(traj.y, 0.25, 5.0, 0.9, ScheduleRule::experiment, true);
    REQUIRE(tr.length() == 300);
    CHECK(tr.restarts == std::vector<std::size_t>{0, 2, 4, 16, 256});
    for (std::size_t r : tr.restarts) CHECK(tr.params[r].stacked().isZero(0.0));
    double total = 0.0;
    for (double l : tr.losses) total += l;
    double by_segment = 0.0;
    for (std::size_t i = 0; i < tr.restarts.size(); ++i) {
        const std::size_t end = i + 1 < tr.restarts.size() ? tr.restarts[i + 1] : 300;
        for (std::size_t t = tr.restarts[i]; t < end; ++t) by_segment += tr.losses[t];
    }
    CHECK(std::abs(total - by_segment) <= 1e-9 * total);
}

TEST_CASE("stationary regressor covariance is well conditioned")
{
    const LtiSystem sys = make_random_instance(4, 2, 0.9, 0.25, 0.25, 2024);
    const std::size_t burn = 500;
    const std::size_t draws = 100000;
    const Trajectory traj = simulate(sys, burn + draws, 77);
    const int h = 3;
    Mat acc = Mat::Zero(2 * 2 * h, 2 * 2 * h);
    for (std::size_t t = burn; t < burn + draws; ++t) {
        const Mat Y = build_Y(stack_history(traj.y, static_cast<long>(t), h, 2), 2);
        acc += 2.0 * Y.transpose() * Y;
    }
    acc /= static_cast<double>(draws);
    CHECK(lambda_min(acc) >= lambda_min(sys.V) - 0.05);
}
