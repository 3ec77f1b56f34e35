#pragma once

#include <cstdint>
#include <vector>

#include "foresight/rewardnet.hpp"

namespace foresight
{

/// Data collected by acting with the current model, as in epsilon-greedy
/// exploration on the robot: most actions are drawn from the model's best
/// cells, so confident mistakes get labelled.
struct OnPolicyConfig
{
    int rounds = 4;           // collect-and-retrain iterations after the random stage
    int actions = 800;        // actions per round
    double epsilon = 0.2;     // share of uniformly random actions
    int top_k = 3;            // greedy actions are drawn uniformly from the k best cells
    int episode_cap = 25;
    double empty_fraction = 0.3;  // episodes started on an empty bin
    int idle_cap = 6;              // actions allowed on an empty bin before the episode ends
    int epochs = 5;           // fine-tuning epochs per round
    int rotations = 16;
    double action_margin = 0.01;  // gripper-wall collisions are skipped as in the policy
};

std::vector<TrainingSample> collect_on_policy(const ModelWeights& w, const DataGenConfig& data,
                                              const OnPolicyConfig& cfg, uint64_t seed);

/// Random-action data, a first fit, then `rounds` of on-policy collection and
/// fine-tuning on the growing dataset.
TrainResult train_model(const DataGenConfig& data, const TrainConfig& train, const OnPolicyConfig& on_policy);

}  // namespace foresight
