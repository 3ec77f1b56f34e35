#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "foresight/geometry2d.hpp"
#include "foresight/imagecore.hpp"
#include "foresight/rewardnet.hpp"

namespace foresight
{

// Output grid of one rotation. Cell (ox, oy) sees canvas pixels
// [stride*ox, stride*ox + field) x [stride*oy, stride*oy + field); canvas pixel
// (i, j) samples the image at center_img + Rot(angle) * ((i, j) - center_canvas).
struct RotationGrid
{
    double angle = 0.0;
    double cos_a = 1.0;
    double sin_a = 0.0;
    int nx = 0;
    int ny = 0;
    int canvas_w = 0;
    int canvas_h = 0;
    double canvas_cx = 0.0;
    double canvas_cy = 0.0;
    size_t offset = 0;  // linear index of (r, p=0, 0, 0)

    std::array<double, 2> canvas_to_image(const ImageGeometry& g, double i, double j) const;
};

struct MapCell
{
    int r = 0;
    int p = 0;
    int oy = 0;
    int ox = 0;
};

/// Shape and pose metadata shared by reward, uncertainty and bound maps.
/// Linear order: rotation-major, then channel, then row-major.
struct MapLayout
{
    ImageGeometry geometry;
    int rotations = 0;
    int channels = 0;
    int stride = 4;
    int field = 32;
    std::vector<RotationGrid> grids;
    std::vector<uint8_t> valid;  // per linear index; pose inside the valid region
    size_t total = 0;

    size_t size() const { return total; }
    size_t index(int r, int p, int oy, int ox) const
    {
        const RotationGrid& g = grids[static_cast<size_t>(r)];
        return g.offset + (static_cast<size_t>(p) * g.ny + oy) * g.nx + ox;
    }
    MapCell cell(size_t index) const;
    PlanarPose pose(int r, int oy, int ox) const;
    PlanarPose pose(size_t index) const
    {
        const MapCell c = cell(index);
        return pose(c.r, c.oy, c.ox);
    }
};

std::shared_ptr<const MapLayout> make_layout(const ImageGeometry& g, int rotations, int channels, int stride,
                                             int field, const std::optional<AxisBox>& valid_region);

/// Values over a MapLayout (reward, reward std, lower bound, ...).
struct CellMap
{
    std::shared_ptr<const MapLayout> layout;
    std::vector<double> values;

    size_t size() const { return values.size(); }
    double at(int r, int p, int oy, int ox) const { return values[layout->index(r, p, oy, ox)]; }
    bool valid(size_t i) const { return layout->valid[i] != 0; }
};

using RewardMap = CellMap;
using RewardUncertaintyMap = CellMap;

/// Canvas image of one rotation: scaled model input plus the bilinear taps
/// tying each canvas pixel to image pixels (taps of invalid samples are unused).
struct RotationCanvas
{
    Tensor input;
    std::vector<BilinearTaps> taps;
    std::vector<uint8_t> valid;
};

RotationCanvas build_canvas(const ModelWeights& w, const DepthImage& image, const MapLayout& layout, int r);

struct RotationPass
{
    RotationCanvas canvas;
    ForwardTrace trace;
};

RotationPass forward_rotation(const ModelWeights& w, const DepthImage& image, const MapLayout& layout, int r);

/// Reward heatmaps for all R rotations over [0, pi) and all model channels.
/// Cells whose pose falls outside valid_region (default: whole image) are
/// marked invalid but still evaluated.
RewardMap forward_full(const ModelWeights& w, const DepthImage& image, int rotations,
                       const std::optional<AxisBox>& valid_region = std::nullopt);

std::shared_ptr<const MapLayout> layout_for(const ModelWeights& w, const ImageGeometry& g, int rotations,
                                            const std::optional<AxisBox>& valid_region = std::nullopt);

}  // namespace foresight
