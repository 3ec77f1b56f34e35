#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "foresight/bench.hpp"
#include "foresight/config.hpp"
#include "foresight/errors.hpp"
#include "foresight/pgm_io.hpp"
#include "foresight/report_io.hpp"
#include "foresight/training.hpp"

namespace fs = std::filesystem;
using namespace foresight;

namespace
{

constexpr int kExitConfig = 2;
constexpr int kExitBenchmark = 3;

struct ConfigFailure : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

struct Options
{
    std::string config;
    std::optional<uint64_t> seed;
    std::string out = "out";
    std::string model;
    std::string scenario;
    int episodes = 0;
    std::string bench_kind;
    double x = 0.2;
    double y = 0.15;
    double a = 0.0;
    int primitive = 0;
    double reward = 1.0;
};

RunConfig load(const Options& o)
{
    RunConfig cfg;
    try
    {
        if (!o.config.empty())
        {
            cfg = load_run_config(o.config);
        }
        if (o.seed)
        {
            apply_seed(cfg, *o.seed);
        }
        if (!o.scenario.empty())
        {
            cfg.scenario.kind = scenario_kind_from_string(o.scenario);
        }
        if (o.episodes > 0)
        {
            cfg.bench.episodes = o.episodes;
            cfg.row3.episodes = o.episodes;
        }
    }
    catch (const Error& e)
    {
        throw ConfigFailure(e.what());
    }
    if (cfg.bench.episodes < 1 || cfg.bench.time_limit <= 0.0 || cfg.bench.t_grasp < 0.0 || cfg.bench.t_image < 0.0)
    {
        throw ConfigFailure("bench needs episodes >= 1, a positive time limit and non-negative durations");
    }
    if (cfg.policy.depth < 1 || cfg.policy.branching < 1 || cfg.policy.top_n < 1 || cfg.policy.rotations < 1)
    {
        throw ConfigFailure("policy depth, branching, top_n and rotations must be positive");
    }
    if (cfg.row3.depth < 2 || cfg.row3.episodes < 0 || cfg.row3.step_cap < 1)
    {
        throw ConfigFailure("row3 needs depth >= 2 and a positive step cap");
    }
    return cfg;
}

Models models_for(const RunConfig& cfg, const Options& o)
{
    if (o.model.empty())
    {
        throw ConfigFailure("--model is required");
    }
    Models m;
    try
    {
        m.reward = load_model(o.model);
    }
    catch (const std::exception& e)
    {
        throw ConfigFailure(std::string("cannot load model: ") + e.what());
    }
    m.transition = cfg.transition;
    m.gripper = cfg.gripper;
    m.bin = cfg.scenario.bin;
    return m;
}

uint64_t seed_of(const RunConfig& cfg)
{
    return cfg.bench.seed;
}

SceneState scene_for(const RunConfig& cfg)
{
    Rng rng(seed_of(cfg));
    return spawn_scenario(cfg.scenario, rng);
}

int cmd_train(const Options& o)
{
    const RunConfig cfg = load(o);
    const TrainResult r = train_model(cfg.data, cfg.train, cfg.on_policy);
    fs::create_directories(o.out);
    save_model((fs::path(o.out) / "model.json").string(), r.weights);
    write_json_file(fs::path(o.out) / "train_meta.json", {{"seed", seed_of(cfg)},
                                                          {"final_loss", r.final_loss},
                                                          {"final_accuracy", r.final_accuracy},
                                                          {"config", to_json(cfg)}});
    std::printf("model written to %s (loss %.4f, accuracy %.4f)\n", (fs::path(o.out) / "model.json").c_str(),
                r.final_loss, r.final_accuracy);
    return 0;
}

int cmd_predict(const Options& o)
{
    const RunConfig cfg = load(o);
    const SceneState scene = scene_for(cfg);
    Rng rng(derive_seed(seed_of(cfg), 5));
    const DepthImage before = render_depth(scene);
    const PlanarPose pose{o.x, o.y, o.a};
    ImagePrediction pred = predict_image(cfg.transition, before, pose, o.primitive, o.reward, rng);
    fs::create_directories(o.out);
    const double z_range = scene.bin.wall_height * 1.25;
    double v_range = 1e-12;
    for (double v : pred.variance.data())
    {
        v_range = std::max(v_range, v);
    }
    write_depth_pgm(fs::path(o.out) / "before.pgm", before, z_range);
    write_depth_pgm(fs::path(o.out) / "predicted.pgm", pred.image, z_range);
    write_variance_pgm(fs::path(o.out) / "variance.pgm", pred.variance, v_range);
    write_json_file(fs::path(o.out) / "predict_meta.json",
                    {{"seed", seed_of(cfg)},
                     {"pose", {{"x", pose.x}, {"y", pose.y}, {"a", pose.a}}},
                     {"primitive", o.primitive},
                     {"reward", o.reward},
                     {"scenario", to_string(cfg.scenario.kind)}});
    std::printf("wrote before.pgm, predicted.pgm, variance.pgm to %s\n", o.out.c_str());
    return 0;
}

int cmd_run(const Options& o)
{
    const RunConfig cfg = load(o);
    const Models models = models_for(cfg, o);
    const SceneState scene = scene_for(cfg);
    EpisodeLimits limits;
    limits.t_grasp = cfg.bench.t_grasp;
    limits.t_image = cfg.bench.t_image;
    limits.time_limit = cfg.scenario.kind == ScenarioKind::bbt ? cfg.bench.time_limit : 0.0;
    const EpisodeLog log = run_episode(scene, cfg.policy, models, seed_of(cfg), limits, cfg.bench.sensor);
    fs::create_directories(o.out);
    std::ofstream jsonl(fs::path(o.out) / "episode.jsonl");
    log.write_jsonl(jsonl);
    write_json_file(fs::path(o.out) / "run_meta.json", {{"seed", log.seed},
                                                        {"actions", log.actions()},
                                                        {"measurements", log.measurements},
                                                        {"grasp_attempts", log.grasp_attempts},
                                                        {"grasp_successes", log.grasp_successes},
                                                        {"objects_picked", log.objects_picked},
                                                        {"emptied", log.emptied},
                                                        {"clock_s", log.clock}});
    std::printf("%d actions, %d images, %d objects, emptied %s\n", log.actions(), log.measurements,
                log.objects_picked, log.emptied ? "yes" : "no");
    return 0;
}

int cmd_plan(const Options& o)
{
    RunConfig cfg = load(o);
    const Models models = models_for(cfg, o);
    const SceneState scene = scene_for(cfg);
    const DepthImage image = render_depth(scene);
    const int depth = cfg.policy.depth > 1 ? cfg.policy.depth : cfg.row3.depth;
    PolicyConfig policy = cfg.policy;
    if (cfg.scenario.kind == ScenarioKind::row3)
    {
        policy.objective = Objective::min_steps_to_empty;
    }
    const PlanResult plan =
        plan_bfs(image, reset_on_measure(image.geometry()), depth, policy, models, seed_of(cfg));
    nlohmann::json path = nlohmann::json::array();
    for (const Action& a : plan.path)
    {
        path.push_back(to_json(a));
    }
    const nlohmann::json j = {{"seed", seed_of(cfg)},
                              {"depth", depth},
                              {"objective", to_string(policy.objective)},
                              {"value", plan.value},
                              {"empty_depth", plan.empty_depth},
                              {"nodes", plan.nodes},
                              {"path", path}};
    write_json_file(fs::path(o.out) / "plan.json", j);
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_bench(const Options& o)
{
    const RunConfig cfg = load(o);
    const Models models = models_for(cfg, o);
    const fs::path out(o.out);
    try
    {
        if (o.bench_kind == "bbt")
        {
            const BenchReport r = bench_bbt(cfg.bench, cfg.policy, models);
            write_json_file(out / "bench_bbt.json", to_json(r));
            std::printf("%-20s %12s %14s %16s %8s\n", "condition", "grasp rate", "objects", "PPH", "images");
            for (const ConditionResult& c : r.conditions)
            {
                std::printf("%-20s %5.3f±%5.3f %6.2f±%6.2f %7.1f±%7.1f %8.2f\n", c.name.c_str(), c.grasp_rate_mean,
                            c.grasp_rate_std, c.objects_mean, c.objects_std, c.pph_mean, c.pph_std, c.images_mean);
            }
        }
        else if (o.bench_kind == "steps")
        {
            const StepCurve c = bench_step_curve(cfg.bench, cfg.policy, models);
            fs::create_directories(out);
            std::ofstream csv(out / "steps.csv");
            write_step_csv(csv, c.rows);
            write_json_file(out / "steps.json", to_json(c));
            for (const StepRate& r : c.rows)
            {
                std::printf("t=%2d rate %.3f (%d/%d) sigma2 %.3e\n", r.t, r.rate, r.successes, r.attempts,
                            r.sigma2_mean);
            }
            std::printf("spearman rho %.4f p %.3g; fit %.5f t^2 %+.5f t %+.5f; t* %.3f\n", c.success_vs_t.rho,
                        c.success_vs_t.p_value, c.fit.c2, c.fit.c1, c.fit.c0, c.t_opt);
        }
        else
        {
            const Row3Report r = bench_plan_row3(cfg.bench, cfg.row3, cfg.policy, models);
            write_json_file(out / "row3.json", to_json(r));
            std::printf("deterministic: planned %d actions (first p%d on cube %d), greedy %d actions (first p%d on cube %d)\n",
                        r.planned_deterministic.actions, r.planned_deterministic.first_primitive,
                        r.planned_deterministic.first_target, r.greedy_deterministic.actions,
                        r.greedy_deterministic.first_primitive, r.greedy_deterministic.first_target);
            std::printf("planned %.2f±%.2f steps, success %.2f; greedy %.2f±%.2f steps, success %.2f\n",
                        r.planned.steps_mean, r.planned.steps_std, r.planned.success_rate, r.greedy.steps_mean,
                        r.greedy.steps_std, r.greedy.success_rate);
        }
    }
    catch (const std::exception& e)
    {
        std::fprintf(stderr, "benchmark failed: %s\n", e.what());
        return kExitBenchmark;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Grasping with predicted depth images: training, episodes and benchmarks"};
    app.require_subcommand(1);
    Options o;
    app.add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--seed", o.seed, "seed for every randomized component");
    app.add_option("--out", o.out, "output directory");

    auto* train = app.add_subcommand("train", "generate data in the simulator and fit the reward model");
    auto* predict = app.add_subcommand("predict", "predict one transition and dump a PGM triplet");
    predict->add_option("--x", o.x, "pose x [m]");
    predict->add_option("--y", o.y, "pose y [m]");
    predict->add_option("--a", o.a, "pose angle [rad]");
    predict->add_option("--primitive", o.primitive, "primitive index 0..5")->check(CLI::Range(0, 5));
    predict->add_option("--reward", o.reward, "reward the prediction is conditioned on");
    auto* run = app.add_subcommand("run", "run one episode and log it as JSON lines");
    auto* bench = app.add_subcommand("bench", "run a benchmark");
    bench->add_option("kind", o.bench_kind, "bbt | steps | row3")
        ->required()
        ->check(CLI::IsMember({"bbt", "steps", "row3"}));
    bench->add_option("--episodes", o.episodes, "override the episode count");
    auto* plan = app.add_subcommand("plan", "print the planned path for the configured scene");
    for (auto* sub : {run, bench, plan})
    {
        sub->add_option("--model", o.model, "reward model JSON")->required();
    }
    for (auto* sub : {predict, run, plan})
    {
        sub->add_option("--scenario", o.scenario, "bbt | row3 | mixed")->check(CLI::IsMember({"bbt", "row3", "mixed"}));
    }
    for (auto* sub : {train, predict, run, bench, plan})
    {
        sub->fallthrough();
    }

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try
    {
        if (*train)
        {
            return cmd_train(o);
        }
        if (*predict)
        {
            return cmd_predict(o);
        }
        if (*run)
        {
            return cmd_run(o);
        }
        if (*bench)
        {
            return cmd_bench(o);
        }
        return cmd_plan(o);
    }
    catch (const ConfigFailure& e)
    {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    }
    catch (const std::exception& e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
