#include "kfl/errors.hpp"
#include "kfl/regret.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

using namespace kfl;

namespace {

const LtiSystem& suite_instance()
{
    static const LtiSystem sys = make_random_instance(4, 2, 0.9, 0.25, 0.25, 2024);
    return sys;
}

LearnerTranscript transcript_from_predictions(const Trajectory& traj, const std::vector<Vec>& pred)
{
    LearnerTranscript tr;
    for (std::size_t t = 0; t < pred.size(); ++t) {
        tr.predictions.push_back(pred[t]);
        tr.losses.push_back((traj.y[t] - pred[t]).squaredNorm());
        tr.grad_norms.push_back(0.0);
        tr.param_norms.push_back(0.0);
    }
    tr.restarts.push_back(0);
    return tr;
}

}  // namespace

TEST_CASE("playing the Kalman filter gives zero regret")
{
    const LtiSystem& sys = suite_instance();
    const Trajectory traj = simulate(sys, 200, 4);
    const Estimates kf = kf_estimate(sys, riccati_sequence(sys, 200), traj.y);

    const RegretCurve out = regret_output(traj, transcript_from_predictions(traj, kf.output), sys);
    CHECK(out.kind == FilterKind::output);
    for (double r : out.cumulative) CHECK(r == 0.0);

    const RegretCurve st = regret_state_estimates(traj, kf.state, sys);
    CHECK(st.kind == FilterKind::state);
    for (double r : st.cumulative) CHECK(r == 0.0);
}

TEST_CASE("zero state filter regret")
{
    const LtiSystem& sys = suite_instance();
    const Trajectory traj = simulate(sys, 100, 5);
    const Estimates kf = kf_estimate(sys, riccati_sequence(sys, 100), traj.y);
    const RegretCurve c = regret_state_estimates(traj, std::vector<Vec>(100, Vec::Zero(4)), sys);
    double expected = 0.0;
    for (std::size_t t = 0; t < 100; ++t) {
        expected += traj.x[t].squaredNorm() - (traj.x[t] - kf.state[t]).squaredNorm();
        CHECK(c.alg_loss[t] == traj.x[t].squaredNorm());
    }
    CHECK(c.cumulative.back() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("regret arithmetic and telescoping")
{
    const RegretCurve one = make_curve({2.0}, {0.5}, FilterKind::output);
    CHECK(one.cumulative == std::vector<double>{1.5});

    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::vector<double> a(5000), k(5000);
    for (std::size_t t = 0; t < a.size(); ++t) {
        a[t] = u(rng);
        k[t] = u(rng);
    }
    const RegretCurve c = make_curve(a, k, FilterKind::state);
    double fresh = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) fresh += a[t] - k[t];
    CHECK(std::abs(c.cumulative.back() - fresh) <= 1e-9);

    CHECK_THROWS_AS(make_curve({1.0, 2.0}, {1.0}, FilterKind::output), DimensionError);
}

TEST_CASE("length mismatch")
{
    const LtiSystem& sys = suite_instance();
    const Trajectory traj = simulate(sys, 10, 1);
    CHECK_THROWS_AS(regret_state_estimates(traj, std::vector<Vec>(11, Vec::Zero(4)), sys),
                    DimensionError);
}

TEST_CASE("aggregate")
{
    const RegretCurve c = make_curve({1.0, 2.0, 3.0}, {0.0, 0.0, 0.0}, FilterKind::output);
    const AggregateCurve single = aggregate({c}, Normalizer::none);
    CHECK(single.T_grid == std::vector<std::size_t>{1, 2, 3});
    CHECK(single.mean == c.cumulative);
    for (double s : single.std) CHECK(s == 0.0);
    CHECK_FALSE(single.normalized[0].has_value());
    CHECK(*single.normalized[1] == 3.0);

    const RegretCurve ones = make_curve({1.0, 0.0}, {0.0, 0.0}, FilterKind::output);
    const RegretCurve threes = make_curve({3.0, 0.0}, {0.0, 0.0}, FilterKind::output);
    const AggregateCurve two = aggregate({ones, threes}, Normalizer::sqrt);
    CHECK(two.mean == std::vector<double>{2.0, 2.0});
    CHECK(two.std == std::vector<double>{1.0, 1.0});
    CHECK(two.num_seeds == 2);
    CHECK(*two.normalized[1] == doctest::Approx(2.0 / std::sqrt(2.0)));

    CHECK_THROWS_AS(aggregate({}, Normalizer::none), DomainError);
    const RegretCurve state = make_curve({1.0, 0.0}, {0.0, 0.0}, FilterKind::state);
    CHECK_THROWS_AS(aggregate({ones, state}, Normalizer::none), DomainError);

    CHECK(*normalize(16.0, 100, Normalizer::log4) ==
          doctest::Approx(16.0 / std::pow(std::log(100.0), 4)));
    CHECK_FALSE(normalize(1.0, 1, Normalizer::log4).has_value());
    CHECK(normalizer_from_string("sqrt") == Normalizer::sqrt);
    CHECK_THROWS_AS(normalizer_from_string("cube"), DomainError);

    const AggregateCurve fin =
        aggregate_final({{1.0, 4.0}, {3.0, 8.0}}, {10, 20}, Normalizer::none, FilterKind::state);
    CHECK(fin.mean == std::vector<double>{2.0, 6.0});
    CHECK(fin.std == std::vector<double>{1.0, 2.0});
}

TEST_CASE("Kalman comparator is optimal in expectation")
{
    const LtiSystem& sys = suite_instance();
    const SteadyKalman steady = solve_dare(sys);
    const KnownConstants c = known_constants_from_system(sys, steady);
    const FilterParams M = truncated_params(sys, steady, 8, FilterKind::state, c);
    const std::size_t T = 150;

    const int seeds = 1000;
    std::vector<double> diff;
    for (int seed = 0; seed < seeds; ++seed) {
        const Trajectory traj = simulate(sys, T, static_cast<std::uint64_t>(seed) + 5000);
        const Estimates tk = truncated_estimate(sys, M, traj.y);
        const RegretCurve curve = regret_state_estimates(traj, tk.state, sys);
        double d = 0.0;
        for (std::size_t t = 100; t < T; ++t) d += curve.kf_loss[t] - curve.alg_loss[t];
        diff.push_back(d);
    }
    const double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / seeds;
    double ss = 0.0;
    for (double d : diff) ss += (d - mean) * (d - mean);
    const double se = std::sqrt(ss / (seeds - 1) / seeds);
    CHECK(mean <= 2.0 * se);
}

TEST_CASE("csv writers")
{
    const RegretCurve c = make_curve({2.0, 1.0}, {0.5, 1.0}, FilterKind::output);
    std::ostringstream os;
    write_curve_csv(os, c);
    const std::string csv = os.str();
    CHECK(csv.rfind("t,alg_loss,kf_loss,cum_regret\n", 0) == 0);
    CHECK(csv.find("\n1,1,1,1.5\n") != std::string::npos);

    std::ostringstream agg;
    write_aggregate_csv(agg, aggregate({c}, Normalizer::log4));
    const std::string a = agg.str();
    CHECK(a.rfind("T,mean,std,normalized\n", 0) == 0);
    CHECK(a.find("\n1,1.5,0,\n") != std::string::npos);
}
