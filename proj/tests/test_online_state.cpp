#include "kfl/errors.hpp"
#include "kfl/online_state.hpp"
#include "kfl/system.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <array>
#include <cmath>

using namespace kfl;
using kfl::test::random_matrix;
using kfl::test::random_vector;

namespace {

struct Fixture {
    LtiSystem sys = make_random_instance(4, 2, 0.9, 0.25, 0.25, 11);
    Trajectory traj;
    std::vector<Vec> xtilde;

    explicit Fixture(std::size_t T, std::uint64_t seed = 11)
    {
        traj = simulate(sys, T, seed);
        xtilde = informative_measurements(traj, sys.W, seed);
    }
};

StateLearnerConfig make_config(std::size_t T, std::size_t tau, int h)
{
    StateLearnerConfig cfg;
    cfg.T = T;
    cfg.tau = tau;
    cfg.h = h;
    cfg.eta = StepSchedule{1.0};
    cfg.radius = 50.0;
    cfg.alpha0 = 0.25;
    cfg.n = 4;
    cfg.p = 2;
    return cfg;
}

QueryOracle table_oracle(const std::vector<Vec>& xtilde)
{
    return [&xtilde](std::size_t t) { return xtilde[t]; };
}

}  // namespace

TEST_CASE("sample_offsets")
{
    const QuerySchedule every = sample_offsets(1, 12, 3, 12);
    CHECK(every.queried_steps.size() == 12);
    for (std::size_t t = 0; t < 12; ++t) CHECK(every.is_queried(t));

    const QuerySchedule s = sample_offsets(5, 4, 8, 20);
    CHECK(s.queried_steps.size() == 4);
    for (std::size_t t = 0; t < 20; ++t)
        CHECK(s.is_queried(t) == (t % 5 == s.offsets[t / 5]));

    const QuerySchedule many = sample_offsets(4, 100000, 21);
    std::array<double, 4> freq{};
    for (std::size_t b : many.offsets) freq[b] += 1.0;
    for (double f : freq) {
        CHECK(f / 100000.0 >= 0.24);
        CHECK(f / 100000.0 <= 0.26);
    }

    CHECK(sample_offsets(7, 10, 5).offsets == sample_offsets(7, 10, 5).offsets);
    CHECK(sample_offsets(7, 10, 5).offsets != sample_offsets(7, 10, 5, std::nullopt, 1).offsets);
    CHECK_THROWS_AS(sample_offsets(0, 3, 1), DomainError);
}

TEST_CASE("grad_state_noisy")
{
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const FilterParams M(FilterKind::state, random_matrix(rng, 4, 6), 2, 1e6);
        const Mat Y = build_Y(random_vector(rng, 6), 4);
        const Vec x = random_vector(rng, 4);
        const Vec vt = random_vector(rng, 4);
        const Vec g_true = 2.0 * Y.transpose() * (Y * M.vec() - x);
        CHECK((grad_state_noisy(M, x, Y) - g_true).norm() <= 1e-12 * (1 + g_true.norm()));
        const Vec diff = grad_state_noisy(M, x + vt, Y) - grad_state_noisy(M, x, Y);
        CHECK((diff + 2.0 * Y.transpose() * vt).norm() <= 1e-12 * (1 + diff.norm()));

        const Vec theta = M.vec();
        const Vec g = grad_state_noisy(M, x + vt, Y);
        const double step = 1e-6;
        Vec fd(theta.size());
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
            Vec up = theta, down = theta;
            up(i) += step;
            down(i) -= step;
            fd(i) = ((Y * up - x - vt).squaredNorm() - (Y * down - x - vt).squaredNorm()) /
                    (2 * step);
        }
        CHECK((fd - g).norm() <= 1e-5 * std::max(1.0, g.norm()));
    }
    const FilterParams out(FilterKind::output, 2, 2, 3, 1.0);
    CHECK_THROWS_AS(grad_state_noisy(out, Vec::Zero(2), Mat::Zero(2, 12)), DomainError);
}

TEST_CASE("unbiased noisy gradient")
{
    std::mt19937_64 rng(12);
    const Mat Y = build_Y(random_vector(rng, 6), 4);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int N = 100000;
    Vec sum = Vec::Zero(Y.cols());
    Vec sum_sq = Vec::Zero(Y.cols());
    for (int k = 0; k < N; ++k) {
        const Vec vt = Vec::NullaryExpr(4, [&] { return normal(rng); });
        const Vec d = -2.0 * Y.transpose() * vt;
        sum += d;
        sum_sq += d.cwiseProduct(d);
    }
    const Vec mean = sum / N;
    const Vec var = (sum_sq / N - mean.cwiseProduct(mean)) / (N - 1);
    CHECK(mean.norm() <= 3.0 * std::sqrt(var.sum()));
}

TEST_CASE("state step schedule")
{
    const StepSchedule eta = step_schedule_state(2.0);
    CHECK(eta(0) == 0.0);
    CHECK(eta(1) == 1.0);
    for (long j = 1; j < 50; ++j) CHECK(eta(j + 1) < eta(j));
    CHECK(state_schedule(ScheduleRule::experiment, 0.25).numerator == 1.0);
    CHECK_THROWS_AS(step_schedule_state(0.0), DomainError);
}

TEST_CASE("guarded oracle")
{
    const QuerySchedule s = sample_offsets(5, 2, 3, 10);
    GuardedOracle oracle(std::vector<Vec>(10, Vec::Ones(2)), s);
    const std::size_t allowed = *s.queried_steps.begin();
    CHECK(oracle(allowed) == Vec::Ones(2));
    CHECK(oracle.calls() == 1);
    const std::size_t denied = allowed == 0 ? 1 : 0;
    CHECK_THROWS_AS(oracle(denied), ContractViolation);
}

TEST_CASE("config validation")
{
    CHECK_NOTHROW(make_config(100, 5, 5).validate());
    StateLearnerConfig small_tau = make_config(100, 3, 5);
    CHECK_THROWS_AS(small_tau.validate(), ConfigError);
    small_tau.force = true;
    CHECK_NOTHROW(small_tau.validate());
    StateLearnerConfig bad = make_config(100, 5, 5);
    bad.radius = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("ogd_state_run")
{
    SUBCASE("zero streams keep M at zero")
    {
        const std::vector<Vec> y(40, Vec::Zero(2));
        const std::vector<Vec> xt(40, Vec::Zero(4));
        const StateTranscript tr = ogd_state_run(y, table_oracle(xt), make_config(40, 4, 3), 1);
        for (const FilterParams& M : tr.params) CHECK(M.stacked().isZero(0.0));
        CHECK(tr.update_count == 10);
    }

    SUBCASE("single block")
    {
        Fixture f(30);
        const StateTranscript tr =
            ogd_state_run(f.traj.y, table_oracle(f.xtilde), make_config(30, 30, 3), 4);
        CHECK(tr.query_log.size() <= 1);
    }

    SUBCASE("query budget for tau dividing T")
    {
        Fixture f(400);
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            GuardedOracle oracle(f.xtilde, run_schedule(400, 20, seed));
            const StateTranscript tr = ogd_state_run(
                f.traj.y, [&](std::size_t t) { return oracle(t); }, make_config(400, 20, 4), seed,
                false);
            CHECK(oracle.calls() == 20);
            CHECK(tr.update_count == 20);
            CHECK_FALSE(tr.partial_final_block);
        }
    }

    SUBCASE("off-schedule oracle use is caught")
    {
        Fixture f(100);
        // A guard built for a different seed almost surely disagrees somewhere.
        GuardedOracle wrong(f.xtilde, run_schedule(100, 10, 999));
        CHECK_THROWS_AS(ogd_state_run(f.traj.y, [&](std::size_t t) { return wrong(t); },
                                      make_config(100, 10, 4), 1),
                        ContractViolation);
    }

    SUBCASE("lazy updates, feasibility and the first query")
    {
        Fixture f(300);
        StateLearnerConfig cfg = make_config(300, 10, 4);
        cfg.radius = 0.8;
        const StateTranscript tr = ogd_state_run(f.traj.y, table_oracle(f.xtilde), cfg, 7);
        const QuerySchedule& s = tr.schedules.front();
        const std::size_t first = *s.queried_steps.begin();
        for (std::size_t t = 0; t + 1 < 300; ++t) {
            if (!s.is_queried(t)) CHECK(tr.params[t + 1].stacked() == tr.params[t].stacked());
            CHECK(tr.params[t].frobenius() <= 0.8 * (1 + 1e-12));
            CHECK((tr.estimates[t] - tr.params[t].stacked() *
                                         stack_history(f.traj.y, static_cast<long>(t), 4, 2))
                      .norm() <= 1e-12);
        }
        CHECK(tr.params[first + 1].stacked().isZero(0.0));
        CHECK(tr.update_count == tr.query_log.size());
        for (const QueryRecord& q : tr.query_log) {
            CHECK(q.xtilde == f.xtilde[q.t]);
            CHECK(q.noisy_loss == (f.xtilde[q.t] - tr.estimates[q.t]).squaredNorm());
        }
    }

    SUBCASE("state blindness")
    {
        Fixture f(200);
        const StateTranscript base =
            ogd_state_run(f.traj.y, table_oracle(f.xtilde), make_config(200, 10, 4), 3);
        Trajectory perturbed = f.traj;
        for (Vec& x : perturbed.x) x += Vec::Constant(4, 100.0);
        const StateTranscript replay =
            ogd_state_run(perturbed.y, table_oracle(f.xtilde), make_config(200, 10, 4), 3);
        for (std::size_t t = 0; t < 200; ++t) {
            CHECK(replay.estimates[t] == base.estimates[t]);
            CHECK(replay.params[t].stacked() == base.params[t].stacked());
        }
    }

    SUBCASE("partial final block")
    {
        Fixture f(23);
        for (std::uint64_t seed = 0; seed < 30; ++seed) {
            const StateTranscript tr =
                ogd_state_run(f.traj.y, table_oracle(f.xtilde), make_config(23, 5, 3), seed);
            CHECK(tr.partial_final_block);
            CHECK(tr.update_count >= 4);
            CHECK(tr.update_count <= 5);
        }
    }

    SUBCASE("forced small blocks")
    {
        Fixture f(50);
        StateLearnerConfig cfg = make_config(50, 2, 5);
        CHECK_THROWS_AS(ogd_state_run(f.traj.y, table_oracle(f.xtilde), cfg, 1), ConfigError);
        cfg.force = true;
        CHECK(ogd_state_run(f.traj.y, table_oracle(f.xtilde), cfg, 1).update_count == 25);
    }
}

TEST_CASE("doubling_run_state")
{
    Fixture f(300);
    const StateTranscript tr = doubling_run_state(f.traj.y, table_oracle(f.xtilde), sqrt_tau,
                                                  0.25, 5.0, 0.9, 4, 13,
                                                  ScheduleRule::experiment, true);
    REQUIRE(tr.length() == 300);
    CHECK(tr.restarts == std::vector<std::size_t>{0, 2, 4, 16, 256});
    REQUIRE(tr.schedules.size() == tr.restarts.size());
    std::size_t total = 0;
    for (std::size_t i = 0; i < tr.restarts.size(); ++i) {
        const std::size_t start = tr.restarts[i];
        const std::size_t end = i + 1 < tr.restarts.size() ? tr.restarts[i + 1] : 300;
        const std::size_t len = end - start;
        const std::size_t tau = tr.schedules[i].tau;
        CHECK(tr.params[start].stacked().isZero(0.0));
        std::size_t in_interval = 0;
        for (const QueryRecord& q : tr.query_log) in_interval += q.t >= start && q.t < end;
        CHECK(in_interval <= (len + tau - 1) / tau);
        if (len % tau == 0) CHECK(in_interval == len / tau);
        total += in_interval;
    }
    CHECK(total == tr.update_count);
    CHECK(sqrt_tau(240) == 15);
    CHECK(sqrt_tau(256) == 16);
    CHECK(sqrt_tau(1) == 1);
}
