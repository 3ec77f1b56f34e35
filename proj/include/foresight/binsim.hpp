#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "foresight/geometry2d.hpp"
#include "foresight/imagecore.hpp"

namespace foresight
{

using Rng = std::mt19937_64;

/// Splits an independent stream off a parent seed (splitmix64 finalizer).
uint64_t derive_seed(uint64_t parent, uint64_t stream);

struct Cuboid
{
    int id = 0;
    double x = 0.0;    // center, meters
    double y = 0.0;
    double yaw = 0.0;  // radians
    double lx = 0.025;
    double ly = 0.025;
    double lz = 0.025;
    double z = 0.0;    // base height; nonzero only when resting on another object

    double top() const { return z + lz; }
    OrientedRect footprint() const { return {{x, y}, yaw, 0.5 * lx, 0.5 * ly}; }
};

struct BinGeometry
{
    double inner_width = 0.34;   // along x
    double inner_depth = 0.24;   // along y
    double wall_thickness = 0.03;  // wide enough that reward windows see wall, not the image border
    double wall_height = 0.08;
    double resolution = 0.0025;
    double max_stack_height = 0.06;

    AxisBox interior() const
    {
        return {wall_thickness, wall_thickness, wall_thickness + inner_width, wall_thickness + inner_depth};
    }
    ImageGeometry image_geometry() const;
};

struct SceneState
{
    BinGeometry bin;
    std::vector<Cuboid> objects;
    uint64_t rng_seed = 0;

    /// Throws InvalidArgument on out-of-bin, below-floor or interpenetrating objects.
    void check_invariants() const;
    int next_id() const;
};

struct GraspPrimitive
{
    int index = 0;
    double width = 0.03;             // pre-shaped opening d_m
    double finger_thickness = 0.008;
    double finger_length = 0.02;
};

struct ShiftPrimitive
{
    int index = 4;
    Vec2 direction{1.0, 0.0};  // gripper frame
    double travel = 0.03;
    double finger_thickness = 0.008;
    double finger_length = 0.02;
};

inline constexpr int kNumGraspPrimitives = 4;
inline constexpr int kNumPrimitives = 6;

inline bool is_grasp(int primitive)
{
    return primitive >= 0 && primitive < kNumGraspPrimitives;
}

struct SimConfig
{
    std::array<double, kNumGraspPrimitives> gripper_widths{0.030, 0.040, 0.050, 0.060};
    double finger_thickness = 0.008;
    double finger_length = 0.02;
    double descent_offset = 0.01;   // z = local max height - offset
    double min_descent = 0.005;
    double failure_jitter_std = 0.002;
    double jitter_radius = 0.01;
    double shift_travel = 0.03;
    double shift_noise_std = 0.003;
    int neighborhood_px = 32;
    int check_rotations = 16;

    GraspPrimitive grasp(int index) const;
    ShiftPrimitive shift(int index) const;
    SimConfig noiseless() const;
};

struct PrimitiveOutcome
{
    double reward = 0.0;
    int grasped_count = 0;
    double final_gripper_width = 0.0;
    SceneState next_scene;
};

/// Deterministic evaluation of the grasp rule, without executing it.
struct GraspCheck
{
    bool collision = false;
    double z = 0.0;
    std::vector<size_t> captured;  // indices into scene.objects
    double extent = 0.0;
    bool success = false;
};

DepthImage render_depth(const SceneState& scene);

GraspCheck check_grasp(const SceneState& scene, const PlanarPose& pose, const GraspPrimitive& prim,
                       const SimConfig& cfg = {});

PrimitiveOutcome exec_grasp(const SceneState& scene, const PlanarPose& pose, const GraspPrimitive& prim, Rng& rng,
                            const SimConfig& cfg = {});
PrimitiveOutcome exec_shift(const SceneState& scene, const PlanarPose& pose, const ShiftPrimitive& prim, Rng& rng,
                            const SimConfig& cfg = {});
/// Dispatches on the primitive index (0..3 grasp, 4..5 shift).
PrimitiveOutcome execute(const SceneState& scene, const PlanarPose& pose, int primitive, Rng& rng,
                         const SimConfig& cfg = {});

/// 1 if any object centered in the square neighborhood of pose can be grasped
/// (probed at its own center over all check rotations and gripper widths).
double max_grasp_reward(const SceneState& scene, const PlanarPose& pose, const SimConfig& cfg = {});
/// False when the open fingers (grasp) or the closed gripper (shift) would
/// touch a wall; such actions leave the scene unchanged with reward 0.
bool primitive_fits(const BinGeometry& bin, const PlanarPose& pose, int primitive, const SimConfig& cfg = {});
bool object_graspable(const SceneState& scene, size_t object_index, const SimConfig& cfg = {});

enum class ScenarioKind
{
    bbt,
    row3,
    mixed,
};

ScenarioKind scenario_kind_from_string(const std::string& s);
std::string to_string(ScenarioKind kind);

struct ScenarioSpec
{
    ScenarioKind kind = ScenarioKind::bbt;
    int count = 30;
    double cube_size = 0.025;
    double row3_cube_size = 0.032;  // two neighbours together exceed the widest opening
    double stack_fraction = 0.0;  // bbt only: share of cubes placed on a second layer
    BinGeometry bin;
};

SceneState spawn_scenario(const ScenarioSpec& spec, Rng& rng);

struct NoiseConfig
{
    double sigma = 0.0;    // meters
    double dropout = 0.0;  // probability of an invalid pixel
};

DepthImage measure(const SceneState& scene, const NoiseConfig& noise, Rng& rng);

/// Drops every stacked object onto the highest support below its footprint.
void settle(SceneState& scene);

void to_json(nlohmann::json& j, const Cuboid& c);
void from_json(const nlohmann::json& j, Cuboid& c);
void to_json(nlohmann::json& j, const BinGeometry& b);
void from_json(const nlohmann::json& j, BinGeometry& b);
void to_json(nlohmann::json& j, const SceneState& s);
void from_json(const nlohmann::json& j, SceneState& s);

}  // namespace foresight
