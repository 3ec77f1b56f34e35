#include "foresight/config.hpp"

#include <fstream>
#include <set>
#include <string>

#include "foresight/errors.hpp"

namespace foresight
{

namespace
{

template <class F>
void fields(DataGenConfig& c, F&& f)
{
    f("seed", c.seed);
    f("scenes", c.scenes);
    f("rounds_per_scene", c.rounds_per_scene);
    f("actions_per_round", c.actions_per_round);
    f("object_focus", c.object_focus);
    f("wall_focus", c.wall_focus);
    f("empty_wall_focus", c.empty_wall_focus);
    f("row3_fraction", c.row3_fraction);
    f("mixed_fraction", c.mixed_fraction);
    f("empty_fraction", c.empty_fraction);
    f("max_cubes", c.max_cubes);
    f("rotations", c.rotations);
}

template <class F>
void fields(TrainConfig& c, F&& f)
{
    f("seed", c.seed);
    f("epochs", c.epochs);
    f("batch_size", c.batch_size);
    f("learning_rate", c.learning_rate);
    f("momentum", c.momentum);
    f("weight_decay", c.weight_decay);
    f("lr_decay", c.lr_decay);
    f("label_smoothing", c.label_smoothing);
    f("verbose", c.verbose);
}

template <class F>
void fields(OnPolicyConfig& c, F&& f)
{
    f("rounds", c.rounds);
    f("actions", c.actions);
    f("epsilon", c.epsilon);
    f("top_k", c.top_k);
    f("episode_cap", c.episode_cap);
    f("empty_fraction", c.empty_fraction);
    f("idle_cap", c.idle_cap);
    f("epochs", c.epochs);
    f("rotations", c.rotations);
    f("action_margin", c.action_margin);
}

template <class F>
void fields(PolicyConfig& c, F&& f)
{
    f("alpha", c.alpha);
    f("sigma2_image", c.sigma2_image);
    f("lb_empty", c.lb_empty);
    f("top_n", c.top_n);
    f("branching", c.branching);
    f("depth", c.depth);
    f("rotations", c.rotations);
    f("branch_both_outcomes", c.branch_both_outcomes);
    f("use_prediction", c.use_prediction);
    f("force_measure_every", c.force_measure_every);
    f("step_cap", c.step_cap);
    f("random_actions", c.random_actions);
    f("measure_on_failure", c.measure_on_failure);
    f("action_margin", c.action_margin);
    f("wall_check", c.wall_check);
    f("nms_radius", c.nms_radius);
}

template <class F>
void fields(BenchmarkConfig& c, F&& f)
{
    f("t_grasp", c.t_grasp);
    f("t_image", c.t_image);
    f("episodes", c.episodes);
    f("time_limit", c.time_limit);
    f("seed", c.seed);
    f("cubes", c.cubes);
    f("sensor_sigma", c.sensor.sigma);
    f("sensor_dropout", c.sensor.dropout);
}

template <class F>
void fields(Row3Config& c, F&& f)
{
    f("episodes", c.episodes);
    f("layout_seed", c.layout_seed);
    f("depth", c.depth);
    f("branching", c.branching);
    f("top_n", c.top_n);
    f("rotations", c.rotations);
    f("step_cap", c.step_cap);
}

template <class F>
void fields(ScenarioSpec& c, F&& f)
{
    f("count", c.count);
    f("cube_size", c.cube_size);
    f("row3_cube_size", c.row3_cube_size);
    f("stack_fraction", c.stack_fraction);
}

template <class F>
void fields(TransModelConfig& c, F&& f)
{
    f("samples", c.samples);
    f("seg_height_tol", c.seg_height_tol);
    f("floor_threshold", c.floor_threshold);
    f("max_object_height", c.max_object_height);
    f("boundary_jitter_prob", c.boundary_jitter_prob);
    f("boundary_offset_prob", c.boundary_offset_prob);
    f("neighbor_jitter_prob", c.neighbor_jitter_prob);
    f("neighbor_jitter_px", c.neighbor_jitter_px);
    f("neighbor_radius_px", c.neighbor_radius_px);
    f("shift_travel", c.shift_travel);
    f("shift_jitter", c.shift_jitter);
}

template <class F>
void fields(SimConfig& c, F&& f)
{
    f("gripper_widths", c.gripper_widths);
    f("finger_thickness", c.finger_thickness);
    f("finger_length", c.finger_length);
    f("descent_offset", c.descent_offset);
    f("min_descent", c.min_descent);
    f("failure_jitter_std", c.failure_jitter_std);
    f("jitter_radius", c.jitter_radius);
    f("shift_travel", c.shift_travel);
    f("shift_noise_std", c.shift_noise_std);
}

// Section-level keys that are not plain fields.
const std::set<std::string> kPolicyExtra{"objective"};
const std::set<std::string> kScenarioExtra{"kind"};

template <class T>
void parse_section(const nlohmann::json& j, const std::string& name, T& target,
                   const std::set<std::string>& extra = {})
{
    if (!j.is_object())
    {
        throw Error(ErrorCode::ConfigError, "section '" + name + "' must be an object");
    }
    std::set<std::string> known(extra);
    fields(target, [&](const char* key, auto& value) {
        known.insert(key);
        if (const auto it = j.find(key); it != j.end())
        {
            try
            {
                it->get_to(value);
            }
            catch (const nlohmann::json::exception&)
            {
                throw Error(ErrorCode::ConfigError, "bad value for '" + name + "." + key + "'");
            }
        }
    });
    for (const auto& [key, value] : j.items())
    {
        if (!known.contains(key))
        {
            throw Error(ErrorCode::ConfigError, "unknown key '" + name + "." + key + "'");
        }
    }
}

template <class T>
nlohmann::json dump_section(const T& source)
{
    T copy = source;
    nlohmann::json j = nlohmann::json::object();
    fields(copy, [&](const char* key, auto& value) { j[key] = value; });
    return j;
}

std::string string_value(const nlohmann::json& j, const std::string& key)
{
    if (!j.is_string())
    {
        throw Error(ErrorCode::ConfigError, "'" + key + "' must be a string");
    }
    return j.get<std::string>();
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& j)
{
    if (!j.is_object())
    {
        throw Error(ErrorCode::ConfigError, "config must be a JSON object");
    }
    RunConfig cfg;
    for (const auto& [key, value] : j.items())
    {
        if (key == "data")
        {
            parse_section(value, key, cfg.data);
        }
        else if (key == "train")
        {
            parse_section(value, key, cfg.train);
        }
        else if (key == "on_policy")
        {
            parse_section(value, key, cfg.on_policy);
        }
        else if (key == "policy")
        {
            parse_section(value, key, cfg.policy, kPolicyExtra);
            if (const auto it = value.find("objective"); it != value.end())
            {
                try
                {
                    cfg.policy.objective = objective_from_string(string_value(*it, "policy.objective"));
                }
                catch (const Error& e)
                {
                    throw Error(ErrorCode::ConfigError, e.what());
                }
            }
        }
        else if (key == "bench")
        {
            parse_section(value, key, cfg.bench);
        }
        else if (key == "row3")
        {
            parse_section(value, key, cfg.row3);
        }
        else if (key == "scenario")
        {
            parse_section(value, key, cfg.scenario, kScenarioExtra);
            if (const auto it = value.find("kind"); it != value.end())
            {
                try
                {
                    cfg.scenario.kind = scenario_kind_from_string(string_value(*it, "scenario.kind"));
                }
                catch (const Error& e)
                {
                    throw Error(ErrorCode::ConfigError, e.what());
                }
            }
        }
        else if (key == "transition")
        {
            parse_section(value, key, cfg.transition);
        }
        else if (key == "gripper")
        {
            parse_section(value, key, cfg.gripper);
        }
        else
        {
            throw Error(ErrorCode::ConfigError, "unknown section '" + key + "'");
        }
    }
    cfg.data.sim = cfg.gripper;
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw Error(ErrorCode::ConfigError, "cannot read config " + path.string());
    }
    nlohmann::json j;
    try
    {
        j = nlohmann::json::parse(in);
    }
    catch (const nlohmann::json::exception& e)
    {
        throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
    }
    return parse_run_config(j);
}

void apply_seed(RunConfig& cfg, uint64_t seed)
{
    cfg.data.seed = derive_seed(seed, 1);
    cfg.train.seed = derive_seed(seed, 2);
    cfg.bench.seed = seed;
}

nlohmann::json to_json(const RunConfig& cfg)
{
    nlohmann::json policy = dump_section(cfg.policy);
    policy["objective"] = to_string(cfg.policy.objective);
    nlohmann::json scenario = dump_section(cfg.scenario);
    scenario["kind"] = to_string(cfg.scenario.kind);
    return {{"data", dump_section(cfg.data)},
            {"train", dump_section(cfg.train)},
            {"on_policy", dump_section(cfg.on_policy)},
            {"policy", policy},
            {"bench", dump_section(cfg.bench)},
            {"row3", dump_section(cfg.row3)},
            {"scenario", scenario},
            {"transition", dump_section(cfg.transition)},
            {"gripper", dump_section(cfg.gripper)}};
}

}  // namespace foresight
