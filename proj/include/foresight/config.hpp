#pragma once

#include <filesystem>

#include <json.hpp>

#include "foresight/bench.hpp"
#include "foresight/training.hpp"

namespace foresight
{

/// Everything the command-line tool can be configured with. The JSON file has
/// one optional object per member, e.g. {"policy": {"alpha": 0.5}}.
struct RunConfig
{
    DataGenConfig data;
    TrainConfig train;
    OnPolicyConfig on_policy;
    PolicyConfig policy;
    BenchmarkConfig bench;
    Row3Config row3;
    ScenarioSpec scenario;
    TransModelConfig transition;
    SimConfig gripper;
};

/// Overrides defaults with the keys present in j. Unknown sections or keys and
/// wrongly typed values throw ConfigError.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Applies one seed to every randomized component.
void apply_seed(RunConfig& cfg, uint64_t seed);

nlohmann::json to_json(const RunConfig& cfg);

}  // namespace foresight
