#pragma once

#include <cstdint>
#include <vector>

#include "foresight/binsim.hpp"
#include "foresight/imagecore.hpp"

namespace foresight
{

struct TransModelConfig
{
    int samples = 20;                  // N
    double seg_height_tol = 0.005;     // m, flood-fill tolerance around the seed height
    double floor_threshold = 0.003;    // m, pixels at or below count as floor
    double max_object_height = 0.06;   // m, taller pixels (walls) never segment
    double boundary_jitter_prob = 0.6; // chance a sample dilates or erodes the removed footprint
    double boundary_offset_prob = 0.4; // chance the removed footprint is offset by one pixel
    double neighbor_jitter_prob = 0.15;
    int neighbor_jitter_px = 1;
    int neighbor_radius_px = 4;
    double shift_travel = 0.03;        // m
    double shift_jitter = 0.003;       // m, std of the shift displacement
    double finger_thickness = 0.008;
    double finger_length = 0.02;
    double max_gripper_width = 0.06;
    double descent_offset = 0.01;
    double min_descent = 0.005;
    int window_px = 64;

    TransModelConfig noiseless() const;
};

struct TransitionInput
{
    DepthImage window;  // 64 x 64, centered at the action pose, x axis along the gripper
    int primitive = 0;
    double reward = 0.0;
};

struct TransitionSampleSet
{
    std::vector<DepthImage> samples;
    DepthImage mode;
    UncertaintyImage variance;
    int n = 0;
};

using Mask = std::vector<uint8_t>;

/// 4-connected flood fill from the seed over pixels within threshold of the
/// seed height and above the floor threshold. Empty if the seed is on the floor
/// or taller than max_height.
Mask segment_at(const DepthImage& window, int seed_col, int seed_row, double threshold,
                double floor_threshold = 0.003, double max_height = 0.06);

DepthImage predict_mode(const TransModelConfig& cfg, const TransitionInput& input);
TransitionSampleSet predict_samples(const TransModelConfig& cfg, const TransitionInput& input, Rng& rng);

/// Uniformly weighted squared deviation of the samples from the mode.
UncertaintyImage pixel_variance(const std::vector<DepthImage>& samples, const DepthImage& mode);

/// Prediction written back into a full image.
struct ImagePrediction
{
    DepthImage image;
    UncertaintyImage variance;
    TransitionSampleSet window;
};

ImagePrediction predict_image(const TransModelConfig& cfg, const DepthImage& image, const PlanarPose& pose,
                              int primitive, double reward, Rng& rng);
DepthImage predict_image_mode(const TransModelConfig& cfg, const DepthImage& image, const PlanarPose& pose,
                              int primitive, double reward);

/// Patch that only writes window pixels that differ from the pre-action crop,
/// so unchanged regions are not resampled twice.
DepthImage patch_changes(const DepthImage& image, const DepthImage& before, const DepthImage& after,
                         const PlanarPose& pose);

}  // namespace foresight
