#include <algorithm>
#include <cmath>
#include <numbers>

#include "foresight/errors.hpp"
#include "foresight/rewardnet.hpp"

namespace foresight
{

namespace
{

PlanarPose sample_pose(const SceneState& scene, const DataGenConfig& cfg, int primitive, Rng& rng)
{
    const AxisBox box = scene.bin.interior();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int k = std::uniform_int_distribution<int>(0, cfg.rotations - 1)(rng);
    double a = k * std::numbers::pi / cfg.rotations;
    double x = 0.0;
    double y = 0.0;
    if (!scene.objects.empty() && unit(rng) < cfg.object_focus)
    {
        const auto& objs = scene.objects;
        const Cuboid& c = objs[std::uniform_int_distribution<size_t>(0, objs.size() - 1)(rng)];
        const double spread = is_grasp(primitive) ? 0.003 : 0.01;
        std::normal_distribution<double> normal(0.0, spread);
        x = c.x;
        y = c.y;
        if (is_grasp(primitive) && objs.size() > 1 && unit(rng) < 0.2)
        {
            // Aim between the object and its nearest neighbour.
            const Cuboid* best = nullptr;
            double best_d = 1e9;
            for (const Cuboid& o : objs)
            {
                const double d = std::hypot(o.x - c.x, o.y - c.y);
                if (&o != &c && d < best_d)
                {
                    best_d = d;
                    best = &o;
                }
            }
            x = 0.5 * (c.x + best->x);
            y = 0.5 * (c.y + best->y);
            double pair = std::atan2(best->y - c.y, best->x - c.x);
            if (pair < 0.0)
            {
                pair += std::numbers::pi;
            }
            const int kk = static_cast<int>(std::lround(pair / (std::numbers::pi / cfg.rotations))) % cfg.rotations;
            a = kk * std::numbers::pi / cfg.rotations;
        }
        x += normal(rng);
        y += normal(rng);
    }
    else if (unit(rng) < (scene.objects.empty() ? cfg.empty_wall_focus : cfg.wall_focus))
    {
        std::uniform_real_distribution<double> inset(0.01, 0.05);
        x = std::uniform_real_distribution<double>(box.x0, box.x1)(rng);
        y = std::uniform_real_distribution<double>(box.y0, box.y1)(rng);
        const int side = std::uniform_int_distribution<int>(0, 3)(rng);
        const bool corner = unit(rng) < 0.5;
        if (side % 2 == 0 || corner)
        {
            x = side < 2 ? box.x0 + inset(rng) : box.x1 - inset(rng);
        }
        if (side % 2 == 1 || corner)
        {
            y = (side == 0 || side == 3) ? box.y0 + inset(rng) : box.y1 - inset(rng);
        }
    }
    else
    {
        x = std::uniform_real_distribution<double>(box.x0, box.x1)(rng);
        y = std::uniform_real_distribution<double>(box.y0, box.y1)(rng);
    }
    x = std::clamp(x, box.x0, box.x1);
    y = std::clamp(y, box.y0, box.y1);
    return {x, y, a};
}

}  // namespace

ScenarioSpec sample_scenario(const DataGenConfig& cfg, Rng& rng)
{
    ScenarioSpec scenario;
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (u < cfg.row3_fraction)
    {
        scenario.kind = ScenarioKind::row3;
    }
    else if (u < cfg.row3_fraction + cfg.mixed_fraction)
    {
        scenario.kind = ScenarioKind::mixed;
        scenario.count = std::uniform_int_distribution<int>(1, 12)(rng);
    }
    else if (u < cfg.row3_fraction + cfg.mixed_fraction + cfg.empty_fraction)
    {
        scenario.kind = ScenarioKind::bbt;
        scenario.count = 0;
    }
    else
    {
        scenario.kind = ScenarioKind::bbt;
        scenario.count = std::uniform_int_distribution<int>(0, cfg.max_cubes)(rng);
    }
    return scenario;
}

std::vector<TrainingSample> generate_training_data(const DataGenConfig& cfg)
{
    if (cfg.rotations <= 0 || cfg.scenes < 0)
    {
        throw Error(ErrorCode::InvalidArgument, "rotations must be positive");
    }
    std::vector<TrainingSample> samples;
    const WindowSpec spec = WindowSpec::reward();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int s = 0; s < cfg.scenes; ++s)
    {
        Rng rng(derive_seed(cfg.seed, static_cast<uint64_t>(s)));
        const ScenarioSpec scenario = sample_scenario(cfg, rng);
        SceneState scene;
        try
        {
            scene = spawn_scenario(scenario, rng);
        }
        catch (const Error& e)
        {
            if (e.code() != ErrorCode::PackingFailure)
            {
                throw;
            }
            continue;
        }

        for (int round = 0; round < cfg.rounds_per_scene; ++round)
        {
            const DepthImage image = render_depth(scene);
            std::vector<SceneState> successors;
            std::vector<SceneState> grasped;
            for (int k = 0; k < cfg.actions_per_round; ++k)
            {
                const int p = std::uniform_int_distribution<int>(0, kNumPrimitives - 1)(rng);
                const PlanarPose pose = sample_pose(scene, cfg, p, rng);
                PrimitiveOutcome out = execute(scene, pose, p, rng, cfg.sim);
                TrainingSample sample;
                sample.window = crop_window(image, pose, spec);
                sample.primitive = p;
                sample.reward = out.reward;
                if (is_grasp(p) && out.reward > 0.5)
                {
                    sample.multi_label = out.final_gripper_width > 0.04 ? 1 : 0;
                    grasped.push_back(out.next_scene);
                }
                successors.push_back(std::move(out.next_scene));
                samples.push_back(std::move(sample));
            }
            const auto& pool = grasped.empty() ? successors : grasped;
            if (pool.empty())
            {
                break;
            }
            scene = pool[std::uniform_int_distribution<size_t>(0, pool.size() - 1)(rng)];
        }
    }
    return samples;
}

}  // namespace foresight
