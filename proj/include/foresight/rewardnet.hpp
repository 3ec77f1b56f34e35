#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "foresight/binsim.hpp"
#include "foresight/imagecore.hpp"

namespace foresight
{

// Eigen picks its summation order from the address alignment, so every buffer
// it reads is over-aligned to keep results independent of heap layout.
using AlignedVector = std::vector<double, Eigen::aligned_allocator<double>>;

enum class Activation
{
    identity,
    leaky_relu,
    sigmoid,
};

struct ConvLayer
{
    int in_channels = 1;
    int out_channels = 1;
    int kernel = 1;
    int stride = 1;
    Activation activation = Activation::identity;
    double leak = 0.1;
    AlignedVector weight;  // [out][in][ky][kx]
    std::vector<double> bias;    // [out]

    size_t fan_in() const { return static_cast<size_t>(in_channels) * kernel * kernel; }
};

inline constexpr int kMultiObjectChannel = 6;

/// The manipulation model: a valid-padding conv stack whose 1x1 output on a
/// 32 px window holds one reward estimate per primitive, plus an optional
/// multi-object channel.
struct ModelWeights
{
    int version = 1;
    double input_scale = 40.0;  // heights are multiplied by this before the first layer
    int num_primitives = kNumPrimitives;
    bool multi_object = true;
    std::vector<ConvLayer> layers;

    int output_channels() const { return layers.empty() ? 0 : layers.back().out_channels; }
    int receptive_field() const;
    int output_stride() const;
    /// Throws InvalidArgument on inconsistent shapes or non-finite parameters.
    void check_invariants() const;
};

ModelWeights make_default_model(uint64_t seed, bool multi_object = true);

void to_json(nlohmann::json& j, const ModelWeights& w);
void from_json(const nlohmann::json& j, ModelWeights& w);
void save_model(const std::string& path, const ModelWeights& w);
ModelWeights load_model(const std::string& path);

/// Activations laid out as [channel][batch][row][col].
struct Tensor
{
    int c = 0;
    int n = 1;
    int h = 0;
    int w = 0;
    AlignedVector v;

    Tensor() = default;
    Tensor(int channels, int batch, int height, int width)
        : c(channels), n(batch), h(height), w(width), v(static_cast<size_t>(channels) * batch * height * width, 0.0)
    {}
    size_t plane() const { return static_cast<size_t>(h) * w; }
    size_t offset(int ch, int b, int y, int x) const
    {
        return ((static_cast<size_t>(ch) * n + b) * h + y) * w + x;
    }
    double at(int ch, int b, int y, int x) const { return v[offset(ch, b, y, x)]; }
    double& at(int ch, int b, int y, int x) { return v[offset(ch, b, y, x)]; }
};

/// acts[0] is the scaled input, acts[i + 1] the post-activation output of layer i.
struct ForwardTrace
{
    std::vector<Tensor> acts;
};

/// Scaled single-sample input tensor; invalid pixels read as 0.
Tensor window_input(const ModelWeights& w, const DepthImage& window);
ForwardTrace forward_trace(const ModelWeights& w, Tensor input);
/// Gradient of sum(grad_top * output) with respect to the scaled input.
Tensor backward_to_input(const ModelWeights& w, const ForwardTrace& trace, const Tensor& grad_top);
/// Sub-trace of a larger (canvas) trace that covers output cell (ox, oy).
ForwardTrace slice_trace(const ModelWeights& w, const ForwardTrace& full, int ox, int oy);

double forward_window(const ModelWeights& w, const DepthImage& window, int channel);
std::vector<double> forward_window_all(const ModelWeights& w, const DepthImage& window);

/// d(psi_channel)/d(pixel height) in 1/m, row-major with the window's size;
/// zero at invalid pixels.
std::vector<double> input_gradient(const ModelWeights& w, const DepthImage& window, int channel);

struct TrainingSample
{
    DepthImage window;
    int primitive = 0;
    double reward = 0.0;
    int multi_label = -1;  // -1: no label for the multi-object channel
};

struct TrainConfig
{
    uint64_t seed = 1;
    int epochs = 12;
    int batch_size = 32;
    double learning_rate = 0.02;
    double momentum = 0.9;
    double weight_decay = 1e-5;
    double lr_decay = 0.85;  // per-epoch multiplier
    double label_smoothing = 0.05;  // targets pulled towards 0.5 by this fraction; keeps the sigmoid off saturation
    bool verbose = false;
};

struct TrainResult
{
    ModelWeights weights;
    double final_loss = 0.0;
    double final_accuracy = 0.0;
};

/// Mini-batch SGD with momentum on mean binary cross-entropy. Starts from
/// `init` when given, otherwise from make_default_model(cfg.seed).
TrainResult train_sgd(const std::vector<TrainingSample>& samples, const TrainConfig& cfg,
                      const ModelWeights* init = nullptr);

/// Mean BCE and thresholded accuracy of the model on a dataset.
std::pair<double, double> evaluate_dataset(const ModelWeights& w, const std::vector<TrainingSample>& samples);

struct DataGenConfig
{
    uint64_t seed = 7;
    int scenes = 500;
    int rounds_per_scene = 4;
    int actions_per_round = 14;
    double object_focus = 0.7;  // share of actions aimed near an object
    double wall_focus = 0.1;    // share of actions aimed within 5 cm of a wall or corner
    double empty_wall_focus = 0.7;  // the same share in scenes without objects
    double row3_fraction = 0.15;
    double mixed_fraction = 0.1;
    double empty_fraction = 0.15;  // scenes without objects
    int max_cubes = 30;
    int rotations = 16;
    SimConfig sim;
};

/// Scenario for one data-collection scene, drawn by the configured fractions.
ScenarioSpec sample_scenario(const DataGenConfig& cfg, Rng& rng);

/// Self-supervised data collection in the simulator.
std::vector<TrainingSample> generate_training_data(const DataGenConfig& cfg);

}  // namespace foresight
