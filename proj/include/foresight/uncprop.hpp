#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "foresight/reward_field.hpp"

namespace foresight
{

/// Pixel-wise variance accumulated since the last measurement, with the number
/// of prediction steps it covers.
struct CumulativeUncertainty
{
    UncertaintyImage sigma2;
    int t = 0;
};

CumulativeUncertainty reset_on_measure(const ImageGeometry& geometry);
CumulativeUncertainty accumulate(const CumulativeUncertainty& state, const UncertaintyImage& step_variance);

enum class PropagationVariant
{
    exact,  // crop, forward and backward per cell
    fcn,    // one canvas forward per rotation, per-cell backward on shared activations
};

/// Reward standard deviation per map cell under independent pixel variances:
/// sigma^2 = sum over input pixels of (d psi / d pixel)^2 * Sigma^2.
/// Cells are evaluated on demand and cached.
class UncertaintyEvaluator
{
public:
    UncertaintyEvaluator(const ModelWeights& w, const DepthImage& image, const UncertaintyImage& sigma2,
                         std::shared_ptr<const MapLayout> layout, PropagationVariant variant = PropagationVariant::fcn);

    double sigma(size_t index);
    /// True when every pixel the cell can see has zero variance.
    bool zero_field(size_t index) const;
    const MapLayout& layout() const { return *layout_; }
    size_t evaluated() const { return evaluated_; }

private:
    double compute(size_t index);
    double splat_and_reduce(const Tensor& grad, int r, int ox, int oy, const std::vector<BilinearTaps>* canvas_taps,
                            const std::vector<uint8_t>* canvas_valid, const PlanarPose* pose);
    const RotationPass& rotation(int r);

    const ModelWeights& w_;
    const DepthImage& image_;
    const UncertaintyImage& sigma2_;
    std::shared_ptr<const MapLayout> layout_;
    PropagationVariant variant_;
    std::vector<double> cache_;
    std::vector<uint8_t> done_;
    std::vector<std::unique_ptr<RotationPass>> passes_;
    std::vector<int64_t> nonzero_sat_;  // summed-area table of (sigma2 > 0)
    std::vector<double> scratch_;
    std::vector<int> touched_;
    size_t evaluated_ = 0;
};

RewardUncertaintyMap propagate_exact(const ModelWeights& w, const DepthImage& image, const UncertaintyImage& sigma2,
                                     int rotations, const std::optional<AxisBox>& valid_region = std::nullopt);
RewardUncertaintyMap propagate_fcn(const ModelWeights& w, const DepthImage& image, const UncertaintyImage& sigma2,
                                   int rotations, const std::optional<AxisBox>& valid_region = std::nullopt);

/// LB = psi - alpha * sigma, element-wise.
CellMap lower_bound_map(const RewardMap& psi, const RewardUncertaintyMap& sigma, double alpha);

/// One row per valid cell: index, r, p, oy, ox, x, y, a, psi, sigma, lb.
void write_cells_csv(const std::string& path, const RewardMap& psi, const RewardUncertaintyMap& sigma,
                     const CellMap& lb);

}  // namespace foresight
