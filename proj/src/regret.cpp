#include "kfl/regret.hpp"

#include "kfl/errors.hpp"

#include <cmath>
#include <iomanip>
#include <string>

namespace kfl {

RegretCurve make_curve(std::vector<double> alg_loss, std::vector<double> kf_loss, FilterKind kind)
{
    if (alg_loss.size() != kf_loss.size())
        throw DimensionError("algorithm and Kalman loss sequences differ in length");
    RegretCurve curve;
    curve.kind = kind;
    curve.cumulative.reserve(alg_loss.size());
    double sum = 0.0;
    for (std::size_t t = 0; t < alg_loss.size(); ++t) {
        sum += alg_loss[t] - kf_loss[t];
        curve.cumulative.push_back(sum);
    }
    curve.alg_loss = std::move(alg_loss);
    curve.kf_loss = std::move(kf_loss);
    return curve;
}

RegretCurve regret_output(const Trajectory& traj, const LearnerTranscript& transcript,
                          const LtiSystem& system)
{
    const std::size_t T = transcript.predictions.size();
    if (T == 0 || T > traj.y.size())
        throw DimensionError("transcript length does not fit the trajectory");
    const std::vector<Vec> y(traj.y.begin(), traj.y.begin() + static_cast<long>(T));
    const Estimates kf = kf_estimate(system, riccati_sequence(system, T), y);

    std::vector<double> alg(T);
    std::vector<double> ref(T);
    for (std::size_t t = 0; t < T; ++t) {
        alg[t] = (y[t] - transcript.predictions[t]).squaredNorm();
        ref[t] = (y[t] - kf.output[t]).squaredNorm();
    }
    return make_curve(std::move(alg), std::move(ref), FilterKind::output);
}

RegretCurve regret_state_estimates(const Trajectory& traj, const std::vector<Vec>& estimates,
                                   const LtiSystem& system)
{
    const std::size_t T = estimates.size();
    if (T == 0 || T > traj.y.size() || traj.x.size() < T)
        throw DimensionError("estimate sequence does not fit the trajectory");
    const std::vector<Vec> y(traj.y.begin(), traj.y.begin() + static_cast<long>(T));
    const Estimates kf = kf_estimate(system, riccati_sequence(system, T), y);

    std::vector<double> alg(T);
    std::vector<double> ref(T);
    for (std::size_t t = 0; t < T; ++t) {
        alg[t] = (traj.x[t] - estimates[t]).squaredNorm();
        ref[t] = (traj.x[t] - kf.state[t]).squaredNorm();
    }
    return make_curve(std::move(alg), std::move(ref), FilterKind::state);
}

RegretCurve regret_state(const Trajectory& traj, const StateTranscript& transcript,
                         const LtiSystem& system)
{
    return regret_state_estimates(traj, transcript.estimates, system);
}

std::string_view to_string(Normalizer normalizer)
{
    switch (normalizer) {
    case Normalizer::log4: return "log4";
    case Normalizer::sqrt: return "sqrt";
    case Normalizer::none: return "none";
    }
    return "none";
}

Normalizer normalizer_from_string(std::string_view name)
{
    if (name == "log4") return Normalizer::log4;
    if (name == "sqrt") return Normalizer::sqrt;
    if (name == "none") return Normalizer::none;
    throw DomainError("unknown normalizer '" + std::string(name) + "'");
}

std::optional<double> normalize(double value, std::size_t T, Normalizer normalizer)
{
    if (T < 2) return std::nullopt;
    const double t = static_cast<double>(T);
    switch (normalizer) {
    case Normalizer::log4: return value / std::pow(std::log(t), 4);
    case Normalizer::sqrt: return value / std::sqrt(t);
    case Normalizer::none: return value;
    }
    return value;
}

namespace {

void fill_stats(AggregateCurve& agg, const std::vector<std::vector<double>>& columns)
{
    for (std::size_t g = 0; g < agg.T_grid.size(); ++g) {
        const auto& col = columns[g];
        double mean = 0.0;
        for (double v : col) mean += v;
        mean /= static_cast<double>(col.size());
        double var = 0.0;
        for (double v : col) var += (v - mean) * (v - mean);
        var /= static_cast<double>(col.size());
        agg.mean.push_back(mean);
        agg.std.push_back(std::sqrt(var));
        agg.normalized.push_back(normalize(mean, agg.T_grid[g], agg.normalizer));
    }
}

}  // namespace

AggregateCurve aggregate(const std::vector<RegretCurve>& curves, Normalizer normalizer,
                         std::vector<std::size_t> T_grid)
{
    if (curves.empty()) throw DomainError("aggregate needs at least one curve");
    const std::size_t len = curves.front().length();
    for (const RegretCurve& c : curves) {
        if (c.length() != len) throw DimensionError("curves differ in length");
        if (c.kind != curves.front().kind) throw DomainError("curves differ in kind");
    }
    if (T_grid.empty()) {
        for (std::size_t T = 1; T <= len; ++T) T_grid.push_back(T);
    }

    AggregateCurve agg;
    agg.normalizer = normalizer;
    agg.kind = curves.front().kind;
    agg.num_seeds = curves.size();
    agg.T_grid = std::move(T_grid);
    std::vector<std::vector<double>> columns;
    columns.reserve(agg.T_grid.size());
    for (std::size_t T : agg.T_grid) {
        if (T < 1 || T > len) throw DomainError("grid horizon outside the curve length");
        std::vector<double> col;
        col.reserve(curves.size());
        for (const RegretCurve& c : curves) col.push_back(c.cumulative[T - 1]);
        columns.push_back(std::move(col));
    }
    fill_stats(agg, columns);
    return agg;
}

AggregateCurve aggregate_final(const std::vector<std::vector<double>>& values,
                               const std::vector<std::size_t>& T_grid, Normalizer normalizer,
                               FilterKind kind)
{
    if (values.empty()) throw DomainError("aggregate needs at least one seed");
    AggregateCurve agg;
    agg.normalizer = normalizer;
    agg.kind = kind;
    agg.num_seeds = values.size();
    agg.T_grid = T_grid;
    std::vector<std::vector<double>> columns(T_grid.size());
    for (const auto& row : values) {
        if (row.size() != T_grid.size()) throw DimensionError("seed row does not match the grid");
        for (std::size_t g = 0; g < row.size(); ++g) columns[g].push_back(row[g]);
    }
    fill_stats(agg, columns);
    return agg;
}

void write_curve_csv(std::ostream& os, const RegretCurve& curve)
{
    os << "t,alg_loss,kf_loss,cum_regret\n" << std::setprecision(17);
    for (std::size_t t = 0; t < curve.length(); ++t)
        os << t << ',' << curve.alg_loss[t] << ',' << curve.kf_loss[t] << ','
           << curve.cumulative[t] << '\n';
}

void write_aggregate_csv(std::ostream& os, const AggregateCurve& agg)
{
    os << "T,mean,std,normalized\n" << std::setprecision(17);
    for (std::size_t g = 0; g < agg.T_grid.size(); ++g) {
        os << agg.T_grid[g] << ',' << agg.mean[g] << ',' << agg.std[g] << ',';
        if (agg.normalized[g]) os << *agg.normalized[g];
        os << '\n';
    }
}

}  // namespace kfl
