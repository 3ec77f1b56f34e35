#include "foresight/reward_field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "foresight/errors.hpp"

namespace foresight
{

std::array<double, 2> RotationGrid::canvas_to_image(const ImageGeometry& g, double i, double j) const
{
    const double c = cos_a;
    const double s = sin_a;
    const double du = i - canvas_cx;
    const double dv = j - canvas_cy;
    return {0.5 * (g.width_px - 1) + c * du - s * dv, 0.5 * (g.height_px - 1) + s * du + c * dv};
}

MapCell MapLayout::cell(size_t index) const
{
    if (index >= total)
    {
        throw Error(ErrorCode::InvalidArgument, "map index out of range");
    }
    size_t r = 0;
    while (r + 1 < grids.size() && grids[r + 1].offset <= index)
    {
        ++r;
    }
    const RotationGrid& g = grids[r];
    size_t rem = index - g.offset;
    const size_t plane = static_cast<size_t>(g.nx) * g.ny;
    MapCell c;
    c.r = static_cast<int>(r);
    c.p = static_cast<int>(rem / plane);
    rem %= plane;
    c.oy = static_cast<int>(rem / g.nx);
    c.ox = static_cast<int>(rem % g.nx);
    return c;
}

PlanarPose MapLayout::pose(int r, int oy, int ox) const
{
    const RotationGrid& g = grids[static_cast<size_t>(r)];
    const double half = 0.5 * (field - 1);
    const auto [px, py] = g.canvas_to_image(geometry, stride * ox + half, stride * oy + half);
    return {geometry.to_meter_x(px), geometry.to_meter_y(py), g.angle};
}

std::shared_ptr<const MapLayout> make_layout(const ImageGeometry& geom, int rotations, int channels, int stride,
                                             int field, const std::optional<AxisBox>& valid_region)
{
    if (rotations <= 0 || channels <= 0 || stride <= 0 || field <= 0)
    {
        throw Error(ErrorCode::InvalidArgument, "layout needs positive rotations, channels, stride and field");
    }
    if (geom.width_px < field || geom.height_px < field)
    {
        throw Error(ErrorCode::ImageTooSmall, "image must be at least " + std::to_string(field) + " px per side");
    }
    auto layout = std::make_shared<MapLayout>();
    layout->geometry = geom;
    layout->rotations = rotations;
    layout->channels = channels;
    layout->stride = stride;
    layout->field = field;
    const AxisBox region = valid_region.value_or(
        AxisBox{0.0, 0.0, geom.width_px * geom.resolution, geom.height_px * geom.resolution});

    size_t offset = 0;
    for (int r = 0; r < rotations; ++r)
    {
        RotationGrid g;
        g.angle = PlanarPose(0.0, 0.0, r * std::numbers::pi / rotations).a;
        g.cos_a = std::cos(g.angle);
        g.sin_a = std::sin(g.angle);
        const double c = std::abs(std::cos(g.angle));
        const double s = std::abs(std::sin(g.angle));
        const double hx = 0.5 * (c * geom.width_px + s * geom.height_px);
        const double hy = 0.5 * (s * geom.width_px + c * geom.height_px);
        g.nx = static_cast<int>(std::ceil(2.0 * hx / stride - 1e-9)) + 1;
        g.ny = static_cast<int>(std::ceil(2.0 * hy / stride - 1e-9)) + 1;
        g.nx += (g.nx % 2 == 0) ? 1 : 0;
        g.ny += (g.ny % 2 == 0) ? 1 : 0;
        g.canvas_w = stride * (g.nx - 1) + field;
        g.canvas_h = stride * (g.ny - 1) + field;
        // Shift by half a pixel when parities differ so rotation 0 lands on pixel centers.
        g.canvas_cx = 0.5 * (g.canvas_w - 1) + ((g.canvas_w - geom.width_px) % 2 != 0 ? 0.5 : 0.0);
        g.canvas_cy = 0.5 * (g.canvas_h - 1) + ((g.canvas_h - geom.height_px) % 2 != 0 ? 0.5 : 0.0);
        g.offset = offset;
        offset += static_cast<size_t>(channels) * g.nx * g.ny;
        layout->grids.push_back(g);
    }
    layout->total = offset;
    layout->valid.assign(offset, 0);
    for (int r = 0; r < rotations; ++r)
    {
        const RotationGrid& g = layout->grids[static_cast<size_t>(r)];
        for (int oy = 0; oy < g.ny; ++oy)
        {
            for (int ox = 0; ox < g.nx; ++ox)
            {
                const PlanarPose p = layout->pose(r, oy, ox);
                const bool ok = p.x >= region.x0 && p.x <= region.x1 && p.y >= region.y0 && p.y <= region.y1;
                for (int ch = 0; ch < channels; ++ch)
                {
                    layout->valid[layout->index(r, ch, oy, ox)] = ok ? 1 : 0;
                }
            }
        }
    }
    return layout;
}

std::shared_ptr<const MapLayout> layout_for(const ModelWeights& w, const ImageGeometry& g, int rotations,
                                            const std::optional<AxisBox>& valid_region)
{
    return make_layout(g, rotations, w.output_channels(), w.output_stride(), w.receptive_field(), valid_region);
}

RotationCanvas build_canvas(const ModelWeights& w, const DepthImage& image, const MapLayout& layout, int r)
{
    const RotationGrid& g = layout.grids.at(static_cast<size_t>(r));
    RotationCanvas canvas;
    canvas.input = Tensor(1, 1, g.canvas_h, g.canvas_w);
    canvas.taps.resize(static_cast<size_t>(g.canvas_w) * g.canvas_h);
    canvas.valid.assign(canvas.taps.size(), 0);
    const auto data = image.data();
    const auto mask = image.valid_mask();
    for (int j = 0; j < g.canvas_h; ++j)
    {
        for (int i = 0; i < g.canvas_w; ++i)
        {
            const size_t k = static_cast<size_t>(j) * g.canvas_w + i;
            const auto [px, py] = g.canvas_to_image(image.geometry(), i, j);
            const BilinearTaps taps = bilinear_taps(image.geometry(), px, py);
            canvas.taps[k] = taps;
            if (!taps.inside)
            {
                continue;
            }
            double v = 0.0;
            bool ok = true;
            for (int t = 0; t < 4; ++t)
            {
                if (taps.weight[t] == 0.0)
                {
                    continue;
                }
                v += taps.weight[t] * data[taps.index[t]];
                ok = ok && mask[taps.index[t]] != 0;
            }
            if (ok)
            {
                canvas.valid[k] = 1;
                canvas.input.v[k] = w.input_scale * v;
            }
        }
    }
    return canvas;
}

RotationPass forward_rotation(const ModelWeights& w, const DepthImage& image, const MapLayout& layout, int r)
{
    RotationPass pass;
    pass.canvas = build_canvas(w, image, layout, r);
    pass.trace = forward_trace(w, pass.canvas.input);
    const Tensor& out = pass.trace.acts.back();
    const RotationGrid& g = layout.grids[static_cast<size_t>(r)];
    if (out.w != g.nx || out.h != g.ny || out.c != layout.channels)
    {
        throw Error(ErrorCode::ShapeMismatch, "model output grid does not match the map layout");
    }
    return pass;
}

RewardMap forward_full(const ModelWeights& w, const DepthImage& image, int rotations,
                       const std::optional<AxisBox>& valid_region)
{
    w.check_invariants();
    RewardMap map;
    map.layout = layout_for(w, image.geometry(), rotations, valid_region);
    map.values.assign(map.layout->size(), 0.0);
    for (int r = 0; r < rotations; ++r)
    {
        const RotationPass pass = forward_rotation(w, image, *map.layout, r);
        const Tensor& out = pass.trace.acts.back();
        const size_t off = map.layout->grids[static_cast<size_t>(r)].offset;
        std::copy(out.v.begin(), out.v.end(), map.values.begin() + static_cast<std::ptrdiff_t>(off));
    }
    return map;
}

}  // namespace foresight
