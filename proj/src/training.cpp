#include "foresight/training.hpp"

#include <algorithm>
#include <numeric>

#include "foresight/errors.hpp"
#include "foresight/reward_field.hpp"

namespace foresight
{

namespace
{

AxisBox inset(const AxisBox& box, double m)
{
    return {box.x0 + m, box.y0 + m, box.x1 - m, box.y1 - m};
}

}  // namespace

std::vector<TrainingSample> collect_on_policy(const ModelWeights& w, const DataGenConfig& data,
                                              const OnPolicyConfig& cfg, uint64_t seed)
{
    if (cfg.actions < 0 || cfg.top_k < 1 || cfg.episode_cap < 1 || cfg.rotations < 1 || cfg.idle_cap < 0)
    {
        throw Error(ErrorCode::InvalidArgument, "on-policy collection needs positive counts");
    }
    std::vector<TrainingSample> samples;
    const WindowSpec spec = WindowSpec::reward();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (uint64_t episode = 0; static_cast<int>(samples.size()) < cfg.actions; ++episode)
    {
        Rng rng(derive_seed(seed, episode));
        SceneState scene;
        try
        {
            ScenarioSpec spec = sample_scenario(data, rng);
            if (unit(rng) < cfg.empty_fraction)
            {
                spec.kind = ScenarioKind::bbt;
                spec.count = 0;
            }
            scene = spawn_scenario(spec, rng);
        }
        catch (const Error& e)
        {
            if (e.code() != ErrorCode::PackingFailure)
            {
                throw;
            }
            continue;
        }
        int idle = 0;  // actions taken on an empty bin
        for (int step = 0; step < cfg.episode_cap && static_cast<int>(samples.size()) < cfg.actions; ++step)
        {
            const DepthImage image = render_depth(scene);
            const RewardMap map = forward_full(w, image, cfg.rotations, inset(scene.bin.interior(), cfg.action_margin));
            std::vector<size_t> cells;
            for (size_t i = 0; i < map.size(); ++i)
            {
                const MapCell c = map.layout->cell(i);
                if (map.valid(i) && c.p < kNumPrimitives &&
                    primitive_fits(scene.bin, map.layout->pose(c.r, c.oy, c.ox), c.p, data.sim))
                {
                    cells.push_back(i);
                }
            }
            if (cells.empty())
            {
                break;
            }
            size_t pick = 0;
            if (unit(rng) < cfg.epsilon)
            {
                pick = cells[std::uniform_int_distribution<size_t>(0, cells.size() - 1)(rng)];
            }
            else
            {
                const size_t k = std::min(cells.size(), static_cast<size_t>(cfg.top_k));
                std::partial_sort(cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(k), cells.end(),
                                  [&](size_t a, size_t b) {
                                      return map.values[a] != map.values[b] ? map.values[a] > map.values[b] : a < b;
                                  });
                pick = cells[std::uniform_int_distribution<size_t>(0, k - 1)(rng)];
            }
            const MapCell c = map.layout->cell(pick);
            const PlanarPose pose = map.layout->pose(c.r, c.oy, c.ox);
            PrimitiveOutcome out = execute(scene, pose, c.p, rng, data.sim);
            TrainingSample sample;
            sample.window = crop_window(image, pose, spec);
            sample.primitive = c.p;
            sample.reward = out.reward;
            if (is_grasp(c.p) && out.reward > 0.5)
            {
                sample.multi_label = out.final_gripper_width > 0.04 ? 1 : 0;
            }
            samples.push_back(std::move(sample));
            scene = std::move(out.next_scene);
            if (scene.objects.empty() && ++idle > cfg.idle_cap)
            {
                break;
            }
        }
    }
    return samples;
}

TrainResult train_model(const DataGenConfig& data, const TrainConfig& train, const OnPolicyConfig& on_policy)
{
    std::vector<TrainingSample> samples = generate_training_data(data);
    TrainResult result = train_sgd(samples, train);
    for (int round = 0; round < on_policy.rounds; ++round)
    {
        std::vector<TrainingSample> more =
            collect_on_policy(result.weights, data, on_policy, derive_seed(data.seed, 0x5E1F + round));
        samples.insert(samples.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
        TrainConfig tune = train;
        tune.epochs = on_policy.epochs;
        tune.seed = derive_seed(train.seed, round + 1);
        const ModelWeights init = result.weights;
        result = train_sgd(samples, tune, &init);
    }
    return result;
}

}  // namespace foresight
