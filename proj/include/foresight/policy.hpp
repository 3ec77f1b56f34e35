#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "foresight/binsim.hpp"
#include "foresight/reward_field.hpp"
#include "foresight/transmodel.hpp"
#include "foresight/uncprop.hpp"

namespace foresight
{

enum class Objective
{
    single_reward,
    expected_object_count,
    min_steps_to_empty,
};

Objective objective_from_string(const std::string& s);
std::string to_string(Objective o);

struct PolicyConfig
{
    double alpha = 1.0;
    double sigma2_image = 0.12;  // re-image when the chosen action's sigma_a^2 exceeds this
    double lb_empty = 0.3;
    int top_n = 5;
    int branching = 3;  // B
    int depth = 1;      // D; 1 disables lookahead
    Objective objective = Objective::single_reward;
    int rotations = 16;
    bool branch_both_outcomes = false;
    bool use_prediction = true;    // false: take an image before every action
    int force_measure_every = 0;   // >0: re-image once t reaches this value
    int step_cap = 60;
    bool random_actions = false;   // baseline: uniform random grasp cell, no model
    bool measure_on_failure = true;  // re-image after a grasp that failed against a confident estimate
    double action_margin = 0.01;   // inset of the action region from the bin walls [m]
    bool wall_check = true;        // skip actions whose gripper would touch a wall
    double nms_radius = 0.0;       // top(n) keeps same-kind actions at least this far apart [m]
};

/// Everything the policy needs besides the scene.
struct Models
{
    ModelWeights reward;
    TransModelConfig transition;
    SimConfig gripper;
    BinGeometry bin;
};

struct Action
{
    int p = 0;
    PlanarPose pose;
    double z = 0.0;
    double psi = 0.0;
    double sigma = 0.0;
    double lb = 0.0;
    double multi = 0.0;  // multi-object channel probability
    double value = 0.0;  // objective value used for ranking
    size_t index = 0;
};

/// Poses eligible for actions: the bin interior inset by cfg.action_margin.
AxisBox action_region(const BinGeometry& bin, const PolicyConfig& cfg);

/// Descent height from the image: highest pixel under the closing region
/// (grasp) or closed-gripper footprint (shift), minus the descent offset.
double descent_height_from_image(const DepthImage& image, const PlanarPose& pose, int primitive,
                                 const SimConfig& gripper);

/// Argmax over action channels of valid cells; ties go to the lowest linear index.
Action select_action(const CellMap& lb_map, const DepthImage& image, const PolicyConfig& cfg,
                     const SimConfig& gripper = {});
bool decide_measure(double sigma_a, int t, const PolicyConfig& cfg);
/// True iff the max lower bound over grasp channels is below lb_empty.
bool detect_empty(const CellMap& lb_map, const PolicyConfig& cfg);
double expected_object_value(double psi_grasp, double psi_multi, double sigma_a, double alpha);

/// Lower-confidence-bound search on one (possibly predicted) image. Reward
/// std is evaluated lazily in descending order of the reward upper bound, so
/// results equal those of the fully evaluated map.
class ActionSearch
{
public:
    ActionSearch(const Models& models, const DepthImage& image, const UncertaintyImage& sigma2,
                 const PolicyConfig& cfg);

    /// Best n actions by objective value, descending, ties by linear index.
    /// With nms_radius > 0, same-kind actions closer than it to a better one are skipped.
    std::vector<Action> top(int n);
    Action best() { return top(1).at(0); }
    double max_grasp_lb();
    bool empty() { return max_grasp_lb() < cfg_.lb_empty; }

    const RewardMap& psi() const { return psi_; }
    Action action_at(size_t index);
    /// Fully evaluated maps, mostly for tests and dumps.
    RewardUncertaintyMap sigma_map();
    CellMap value_map();

private:
    double sigma(size_t index);
    double upper_bound(size_t index) const;
    double value(size_t index);
    size_t multi_index(size_t index) const;
    bool fits(size_t index) const;
    const std::vector<size_t>& order();

    const Models& models_;
    const DepthImage& image_;
    const UncertaintyImage& sigma2_;
    PolicyConfig cfg_;
    RewardMap psi_;
    bool zero_uncertainty_ = true;
    std::unique_ptr<UncertaintyEvaluator> eval_;
    std::vector<size_t> order_;  // action cells by upper bound, descending
    bool ordered_ = false;
};

struct PlanNodeRecord
{
    int depth = 0;
    int parent = -1;
    std::vector<Action> path;
    double value = 0.0;
    bool predicted_empty = false;
    double sigma2_sum = 0.0;
    UncertaintyImage sigma2;
};

struct PlanResult
{
    std::vector<Action> path;
    double value = 0.0;
    int empty_depth = -1;  // first depth predicted empty along the chosen path
    size_t nodes = 0;      // expanded children, excluding the root
    std::vector<PlanNodeRecord> records;
};

/// Lookahead over predicted states: at each node sample B of the top_n actions,
/// predict the mode next image and accumulate its variance, down to depth D.
PlanResult plan_bfs(const DepthImage& root, const CumulativeUncertainty& root_unc, int depth,
                    const PolicyConfig& cfg, const Models& models, uint64_t seed, bool record = false);

struct StepRecord
{
    int step = 0;
    int t = 0;  // prediction steps since the image the action was chosen on
    Action action;
    double r_measured = 0.0;
    int grasped = 0;
    bool measured = false;  // a fresh image was taken right before this action
    bool planned = false;
    double clock = 0.0;     // simulated seconds at the end of the action
};

struct EpisodeLimits
{
    double t_grasp = 6.5;
    double t_image = 2.5;
    double time_limit = 0.0;  // seconds of simulated clock, 0 = none
    bool stop_when_cleared = false;  // end as soon as the true scene holds no objects
};

struct EpisodeLog
{
    uint64_t seed = 0;
    std::vector<StepRecord> steps;
    int measurements = 0;
    int grasp_attempts = 0;
    int grasp_successes = 0;
    int objects_picked = 0;
    bool emptied = false;
    bool step_cap_exceeded = false;
    double clock = 0.0;

    double grasp_rate() const
    {
        return grasp_attempts > 0 ? static_cast<double>(grasp_successes) / grasp_attempts : 0.0;
    }
    int actions() const { return static_cast<int>(steps.size()); }
    void write_jsonl(std::ostream& out) const;
};

EpisodeLog run_episode(const SceneState& scene, const PolicyConfig& cfg, const Models& models, uint64_t seed,
                       const EpisodeLimits& limits = {}, const NoiseConfig& sensor = {});

nlohmann::json to_json(const Action& a);

}  // namespace foresight
