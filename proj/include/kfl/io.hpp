#pragma once

#include "kfl/kalman.hpp"
#include "kfl/lowerbound.hpp"
#include "kfl/online_output.hpp"
#include "kfl/online_state.hpp"
#include "kfl/system.hpp"

#include <json.hpp>

#include <filesystem>
#include <ostream>

namespace kfl {

using json = nlohmann::json;

/// Matrices are row-major nested arrays.
json matrix_to_json(const Mat& m);
Mat matrix_from_json(const json& j, const std::string& field);

/// Keys "A", "C", "W", "V" and optional "B", "K", "Vtilde".
json system_to_json(const LtiSystem& system);
LtiSystem system_from_json(const json& j);
LtiSystem load_system(const std::filesystem::path& path);

json steady_to_json(const SteadyKalman& steady);

/// Keys "kind", "h", "radius", "blocks" (stacked matrix).
json filter_to_json(const FilterParams& params);
FilterParams filter_from_json(const json& j);

/// Columns t, x_0.., y_0...
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

/// Columns t, loss, grad_norm, param_frobenius_norm.
void write_output_transcript_csv(std::ostream& os, const LearnerTranscript& transcript);

/// Columns t, queried, noisy_loss (blank when not queried), param_frobenius_norm.
void write_state_transcript_csv(std::ostream& os, const StateTranscript& transcript);

json state_transcript_sidecar(const StateTranscript& transcript, std::uint64_t offsets_seed);

json lower_bound_report_to_json(const LowerBoundReport& report);

/// Writes `text` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace kfl
