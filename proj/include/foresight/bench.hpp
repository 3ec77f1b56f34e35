#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "foresight/policy.hpp"

namespace foresight
{

struct BenchmarkConfig
{
    double t_grasp = 6.5;   // s per action, place motion included
    double t_image = 2.5;   // s per image
    int episodes = 20;
    double time_limit = 120.0;  // s, bbt only
    uint64_t seed = 1;          // episode k uses derive_seed(seed, k)
    int cubes = 30;
    NoiseConfig sensor{0.001, 0.0};
};

struct QuadFit
{
    double c2 = 0.0;
    double c1 = 0.0;
    double c0 = 0.0;
    double residual = 0.0;  // sum of squared residuals

    double operator()(double t) const { return (c2 * t + c1) * t + c0; }
};

/// Picks per hour when every t-th action is preceded by an image.
double pph(double rate, double t, const BenchmarkConfig& cfg);

/// Golden-section maximum of pph(fit(t), t) over [1, t_max], checked against
/// a grid with step 0.001; the better of the two is returned.
double optimal_step(const QuadFit& fit, const BenchmarkConfig& cfg, double t_max = 100.0);

/// Least squares on the Vandermonde system.
QuadFit fit_quadratic(const std::vector<std::pair<double, double>>& points);

struct SpearmanResult
{
    double rho = 0.0;
    double p_value = 1.0;  // two-sided, Student t approximation
    size_t n = 0;
};

/// Rank correlation with average ranks for ties.
SpearmanResult spearman(const std::vector<double>& x, const std::vector<double>& y);

struct StepRate
{
    int t = 0;
    int attempts = 0;
    int successes = 0;
    double rate = 0.0;
    double sigma2_mean = 0.0;  // mean sigma_a^2 of the attempted grasps
};

struct ConditionResult
{
    std::string name;
    int episodes = 0;
    double grasp_rate_mean = 0.0;
    double grasp_rate_std = 0.0;
    double objects_mean = 0.0;
    double objects_std = 0.0;
    double pph_mean = 0.0;
    double pph_std = 0.0;
    double images_mean = 0.0;
    int measurements = 0;
    int actions = 0;
    std::vector<StepRate> per_step;
    std::vector<EpisodeLog> logs;
};

struct BenchReport
{
    uint64_t seed = 0;
    BenchmarkConfig config;
    std::vector<ConditionResult> conditions;

    const ConditionResult& at(const std::string& name) const;
};

/// Box-and-blocks runs for single, single_prediction, multiple,
/// multiple_prediction and random. Every condition sees the same scenes.
BenchReport bench_bbt(const BenchmarkConfig& cfg, const PolicyConfig& policy, const Models& models);

struct StepCurve
{
    uint64_t seed = 0;
    int episodes = 0;
    std::vector<StepRate> rows;  // t = 0..t_max
    SpearmanResult success_vs_t;  // over all grasp attempts
    QuadFit fit;
    double t_opt = 1.0;  // searched over the measured range of t only
};

/// Each episode images once, then acts t_max + 1 times on predictions only.
StepCurve bench_step_curve(const BenchmarkConfig& cfg, const PolicyConfig& policy, const Models& models,
                           int t_max = 10);

struct Row3Config
{
    int episodes = 50;
    uint64_t layout_seed = 10;  // layout of the deterministic variant
    int depth = 4;
    int branching = 3;
    int top_n = 3;
    int rotations = 8;
    int step_cap = 20;
};

struct Row3Run
{
    int actions = 0;
    bool emptied = false;
    int first_primitive = -1;
    int first_target = -1;  // cube nearest to the first action, 0..2 along the row
    std::vector<StepRecord> steps;
};

struct Row3Stats
{
    int episodes = 0;
    int successes = 0;
    double steps_mean = 0.0;  // over successful episodes
    double steps_std = 0.0;
    double actions_mean = 0.0;  // over all episodes, capped ones count their step cap
    double success_rate = 0.0;
};

struct Row3Report
{
    uint64_t seed = 0;
    Row3Run planned_deterministic;
    Row3Run greedy_deterministic;
    Row3Stats planned;
    Row3Stats greedy;
};

/// One noiseless layout with and without lookahead, then `episodes` seeded
/// noisy episodes of each.
Row3Report bench_plan_row3(const BenchmarkConfig& cfg, const Row3Config& row3, const PolicyConfig& policy,
                           const Models& models);

/// Row3 episode on a given scene; stops once the scene is cleared.
Row3Run run_row3(const SceneState& scene, const PolicyConfig& policy, const Models& models, uint64_t seed,
                 const NoiseConfig& sensor, int step_cap);

nlohmann::json to_json(const BenchReport& r);
nlohmann::json to_json(const StepCurve& c);
nlohmann::json to_json(const Row3Report& r);
nlohmann::json to_json(const QuadFit& f);

}  // namespace foresight
