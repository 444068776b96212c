#include "kfl/errors.hpp"
#include "kfl/experiment.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using kfl::json;

struct Overrides {
    std::string config_path;
    std::optional<std::string> instance;
    std::optional<long long> T;
    std::optional<long long> seeds;
    std::optional<long long> base_seed;
    std::optional<std::string> tau;
    std::optional<double> delta;
    std::optional<double> inflation;
    bool doubling = false;
    std::optional<std::string> out_dir;
    std::optional<std::string> schedule;
    std::optional<long long> grid;
    bool force = false;
    std::optional<double> sigma_w;
    std::optional<long long> trials;
    std::optional<std::string> estimator;
    std::optional<long long> threads;
};

int emit_error(const std::string& kind, const std::string& message,
               const std::optional<std::string>& field, int status)
{
    json err{{"error", kind}, {"message", message}};
    if (field) err["field"] = *field;
    std::cerr << err.dump() << std::endl;
    return status;
}

json load_config(const std::string& path)
{
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw kfl::ConfigError("config", "cannot open " + path);
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw kfl::ConfigError("config", std::string("malformed JSON: ") + e.what());
    }
}

json merged_config(const std::string& experiment, const Overrides& o)
{
    json raw = load_config(o.config_path);
    if (!raw.is_object()) throw kfl::ConfigError("config", "expected a JSON object");
    if (raw.contains("experiment") && raw["experiment"] != experiment)
        throw kfl::ConfigError("experiment", "config file names a different experiment");
    raw["experiment"] = experiment;
    if (o.instance) raw["instance"] = *o.instance;
    if (o.T) raw["T"] = *o.T;
    if (o.seeds) raw["seeds"] = *o.seeds;
    if (o.base_seed) raw["base_seed"] = *o.base_seed;
    if (o.tau) {
        if (*o.tau == "sqrt") {
            raw["tau"] = "sqrt";
        } else {
            try {
                std::size_t used = 0;
                const long long value = std::stoll(*o.tau, &used);
                if (used != o.tau->size()) throw std::invalid_argument("trailing characters");
                raw["tau"] = value;
            } catch (const std::exception&) {
                throw kfl::ConfigError("tau", "must be an integer or \"sqrt\"");
            }
        }
    }
    if (o.delta) raw["delta"] = *o.delta;
    if (o.inflation) raw["inflation"] = *o.inflation;
    if (o.doubling) raw["doubling"] = true;
    if (o.out_dir) raw["out_dir"] = *o.out_dir;
    if (o.schedule) raw["schedule"] = *o.schedule;
    if (o.grid) raw["grid"] = *o.grid;
    if (o.force) raw["force"] = true;
    if (o.sigma_w) raw["sigma_w"] = *o.sigma_w;
    if (o.trials) raw["trials"] = *o.trials;
    if (o.estimator) raw["estimator"] = *o.estimator;
    if (o.threads) raw["threads"] = *o.threads;
    return raw;
}

void add_common(CLI::App* cmd, Overrides& o)
{
    cmd->add_option("-c,--config", o.config_path, "JSON config file; flags override its values");
    cmd->add_option("--instance", o.instance, "random | boeing747 | scalar-lb | file:<path>");
    cmd->add_option("-T,--horizon", o.T, "Horizon T (>= 2)");
    cmd->add_option("--seeds", o.seeds, "Number of seeds");
    cmd->add_option("--base-seed", o.base_seed, "First seed");
    cmd->add_option("--delta", o.delta, "Confidence level for the noise diagnostics, in (0, 1)");
    cmd->add_option("-o,--out-dir", o.out_dir, "Output directory");
    cmd->add_option("--threads", o.threads, "Worker threads (0: all cores)");
}

void add_learning(CLI::App* cmd, Overrides& o)
{
    cmd->add_option("--inflation", o.inflation, "Multiplier (>= 1) on the known upper constants");
    cmd->add_flag("--doubling", o.doubling, "Use the horizon-free doubling wrapper");
    cmd->add_option("--schedule", o.schedule, "experiment | theorem");
    cmd->add_option("--grid", o.grid, "Fresh runs on this many horizons up to T (0: single run)");
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Online Kalman-filter learning experiments"};
    app.require_subcommand(1);

    Overrides o;
    auto* simulate = app.add_subcommand("simulate", "Simulate trajectories");
    add_common(simulate, o);

    auto* output = app.add_subcommand("output-learn", "Online output prediction (OGD)");
    add_common(output, o);
    add_learning(output, o);

    auto* state = app.add_subcommand("state-learn", "Online state estimation with random queries");
    add_common(state, o);
    add_learning(state, o);
    state->add_option("--tau", o.tau, "Block length: integer or sqrt");
    state->add_flag("--force", o.force, "Allow tau < h");

    auto* lower = app.add_subcommand("lower-bound", "Hard-instance regret for output-only estimators");
    add_common(lower, o);
    lower->add_option("--sigma-w", o.sigma_w, "Process noise scale");
    lower->add_option("--trials", o.trials, "Matched-seed trials");
    lower->add_option("--estimator", o.estimator,
                      "zero | least-squares-regressor | algorithm-2-without-queries | all");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return emit_error("usage", e.what(), std::nullopt, 2);
    }

    const CLI::App* chosen = app.get_subcommands().front();
    try {
        const kfl::ExperimentConfig config =
            kfl::validate_config(merged_config(chosen->get_name(), o));
        kfl::run_experiment(config);
    } catch (const kfl::ConfigError& e) {
        return emit_error(e.kind(), e.what(), e.field(), 2);
    } catch (const kfl::Error& e) {
        return emit_error(e.kind(), e.what(), std::nullopt, 1);
    } catch (const std::exception& e) {
        return emit_error("internal", e.what(), std::nullopt, 1);
    }
    return 0;
}
