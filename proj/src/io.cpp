#include "kfl/io.hpp"

#include "kfl/errors.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace kfl {

json matrix_to_json(const Mat& m)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        rows.push_back(std::move(row));
    }
    return rows;
}

Mat matrix_from_json(const json& j, const std::string& field)
{
    if (!j.is_array() || j.empty()) throw ConfigError(field, "expected a non-empty array of rows");
    const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
    if (cols == 0) throw ConfigError(field, "expected a non-empty array of rows");
    Mat m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != cols) throw ConfigError(field, "ragged matrix");
        for (std::size_t k = 0; k < cols; ++k) {
            if (!j[i][k].is_number()) throw ConfigError(field, "matrix entries must be numbers");
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
        }
    }
    return m;
}

json system_to_json(const LtiSystem& system)
{
    json j;
    j["A"] = matrix_to_json(system.A);
    j["C"] = matrix_to_json(system.C);
    j["W"] = matrix_to_json(system.W);
    j["V"] = matrix_to_json(system.V);
    if (system.B) j["B"] = matrix_to_json(*system.B);
    if (system.K) j["K"] = matrix_to_json(*system.K);
    if (system.Vtilde) j["Vtilde"] = matrix_to_json(*system.Vtilde);
    return j;
}

LtiSystem system_from_json(const json& j)
{
    if (!j.is_object()) throw ConfigError("system", "expected a JSON object");
    static const char* known[] = {"A", "C", "W", "V", "B", "K", "Vtilde"};
    for (const auto& item : j.items()) {
        if (std::find(std::begin(known), std::end(known), item.key()) == std::end(known))
            throw ConfigError(item.key(), "unknown system key");
    }
    LtiSystem sys;
    for (const char* key : {"A", "C", "W", "V"})
        if (!j.contains(key)) throw ConfigError(key, "missing");
    sys.A = matrix_from_json(j["A"], "A");
    sys.C = matrix_from_json(j["C"], "C");
    sys.W = matrix_from_json(j["W"], "W");
    sys.V = matrix_from_json(j["V"], "V");
    if (j.contains("B")) sys.B = matrix_from_json(j["B"], "B");
    if (j.contains("K")) sys.K = matrix_from_json(j["K"], "K");
    if (j.contains("Vtilde")) sys.Vtilde = matrix_from_json(j["Vtilde"], "Vtilde");
    sys.validate();
    return sys;
}

LtiSystem load_system(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("instance", "cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("instance", std::string("malformed JSON: ") + e.what());
    }
    return system_from_json(j);
}

json steady_to_json(const SteadyKalman& steady)
{
    return json{{"Sigma", matrix_to_json(steady.Sigma)},
                {"L", matrix_to_json(steady.L)},
                {"residual", steady.residual},
                {"iterations", steady.iterations}};
}

json filter_to_json(const FilterParams& params)
{
    return json{{"kind", std::string(to_string(params.kind()))},
                {"h", params.h()},
                {"p", params.p()},
                {"radius", params.radius()},
                {"blocks", matrix_to_json(params.stacked())}};
}

FilterParams filter_from_json(const json& j)
{
    for (const char* key : {"kind", "h", "p", "radius", "blocks"})
        if (!j.contains(key)) throw ConfigError(key, "missing");
    const FilterKind kind = filter_kind_from_string(j["kind"].get<std::string>());
    FilterParams params(kind, matrix_from_json(j["blocks"], "blocks"),
                        j["p"].get<Eigen::Index>(), j["radius"].get<double>());
    if (params.h() != j["h"].get<int>()) throw ConfigError("h", "does not match the block width");
    return params;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj)
{
    const Eigen::Index n = traj.x.empty() ? 0 : traj.x.front().size();
    const Eigen::Index p = traj.y.empty() ? 0 : traj.y.front().size();
    os << 't';
    for (Eigen::Index i = 0; i < n; ++i) os << ",x_" << i;
    for (Eigen::Index i = 0; i < p; ++i) os << ",y_" << i;
    os << '\n' << std::setprecision(17);
    for (std::size_t t = 0; t < traj.length(); ++t) {
        os << t;
        for (Eigen::Index i = 0; i < n; ++i) os << ',' << traj.x[t](i);
        for (Eigen::Index i = 0; i < p; ++i) os << ',' << traj.y[t](i);
        os << '\n';
    }
}

void write_output_transcript_csv(std::ostream& os, const LearnerTranscript& transcript)
{
    os << "t,loss,grad_norm,param_frobenius_norm\n" << std::setprecision(17);
    for (std::size_t t = 0; t < transcript.length(); ++t)
        os << t << ',' << transcript.losses[t] << ',' << transcript.grad_norms[t] << ','
           << transcript.param_norms[t] << '\n';
}

void write_state_transcript_csv(std::ostream& os, const StateTranscript& transcript)
{
    std::map<std::size_t, double> noisy;
    for (const QueryRecord& q : transcript.query_log) noisy[q.t] = q.noisy_loss;
    os << "t,queried,noisy_loss,param_frobenius_norm\n" << std::setprecision(17);
    for (std::size_t t = 0; t < transcript.length(); ++t) {
        const auto it = noisy.find(t);
        os << t << ',' << (it != noisy.end() ? 1 : 0) << ',';
        if (it != noisy.end()) os << it->second;
        os << ',' << transcript.param_norms[t] << '\n';
    }
}

json state_transcript_sidecar(const StateTranscript& transcript, std::uint64_t offsets_seed)
{
    json taus = json::array();
    for (const QuerySchedule& s : transcript.schedules) taus.push_back(s.tau);
    return json{{"tau", transcript.schedules.size() == 1 ? json(transcript.schedules[0].tau) : taus},
                {"offsets_seed", offsets_seed},
                {"update_count", transcript.update_count},
                {"restarts", transcript.restarts},
                {"partial_final_block", transcript.partial_final_block}};
}

json lower_bound_report_to_json(const LowerBoundReport& report)
{
    json per_r;
    for (std::size_t i = 0; i < kLowerBoundR.size(); ++i) {
        std::ostringstream key;
        key << kLowerBoundR[i];
        per_r[key.str()] = report.per_r[i];
    }
    return json{{"sigma_w", report.sigma_w},
                {"sigma_v", report.sigma_v},
                {"T", report.T},
                {"trials", report.trials},
                {"estimator", std::string(to_string(report.estimator))},
                {"empirical_mean_regret", report.empirical_mean_regret},
                {"standard_error", report.standard_error},
                {"theoretical_floor", report.theoretical_floor},
                {"floor_applies", report.floor_applies},
                {"floor_scope", "certified only for the listed estimator"},
                {"per_r", per_r},
                {"seed", report.seed}};
}

void write_text_file(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("out_dir", "cannot write " + path.string());
    out << text;
}

}  // namespace kfl
