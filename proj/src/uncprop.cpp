#include "foresight/uncprop.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "foresight/errors.hpp"

namespace foresight
{

CumulativeUncertainty reset_on_measure(const ImageGeometry& geometry)
{
    return {UncertaintyImage(geometry, 0.0), 0};
}

CumulativeUncertainty accumulate(const CumulativeUncertainty& state, const UncertaintyImage& step_variance)
{
    if (state.sigma2.geometry() != step_variance.geometry())
    {
        throw Error(ErrorCode::ShapeMismatch, "variance geometry differs from the accumulated state");
    }
    CumulativeUncertainty out = state;
    auto acc = out.sigma2.data();
    const auto add = step_variance.data();
    for (size_t i = 0; i < acc.size(); ++i)
    {
        acc[i] += add[i];
    }
    ++out.t;
    return out;
}

UncertaintyEvaluator::UncertaintyEvaluator(const ModelWeights& w, const DepthImage& image,
                                           const UncertaintyImage& sigma2, std::shared_ptr<const MapLayout> layout,
                                           PropagationVariant variant)
    : w_(w)
    , image_(image)
    , sigma2_(sigma2)
    , layout_(std::move(layout))
    , variant_(variant)
{
    if (sigma2.geometry() != image.geometry() || layout_->geometry != image.geometry())
    {
        throw Error(ErrorCode::ShapeMismatch, "uncertainty image, depth image and map layout must share geometry");
    }
    if (std::any_of(sigma2.data().begin(), sigma2.data().end(), [](double v) { return !(v >= 0.0); }))
    {
        throw Error(ErrorCode::InvalidArgument, "variance must be non-negative");
    }
    cache_.assign(layout_->size(), 0.0);
    done_.assign(layout_->size(), 0);
    passes_.resize(static_cast<size_t>(layout_->rotations));
    const ImageGeometry& g = image.geometry();
    const int W = g.width_px;
    const int H = g.height_px;
    nonzero_sat_.assign(static_cast<size_t>(W + 1) * (H + 1), 0);
    const auto s2 = sigma2.data();
    for (int r = 0; r < H; ++r)
    {
        int64_t row = 0;
        for (int c = 0; c < W; ++c)
        {
            row += s2[static_cast<size_t>(r) * W + c] > 0.0 ? 1 : 0;
            nonzero_sat_[static_cast<size_t>(r + 1) * (W + 1) + c + 1] =
                nonzero_sat_[static_cast<size_t>(r) * (W + 1) + c + 1] + row;
        }
    }
    scratch_.assign(g.size(), 0.0);
}

bool UncertaintyEvaluator::zero_field(size_t index) const
{
    const MapCell cell = layout_->cell(index);
    const RotationGrid& grid = layout_->grids[static_cast<size_t>(cell.r)];
    const ImageGeometry& g = layout_->geometry;
    const double i0 = layout_->stride * cell.ox - 0.5;
    const double j0 = layout_->stride * cell.oy - 0.5;
    const double i1 = i0 + layout_->field;
    const double j1 = j0 + layout_->field;
    double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
    for (const auto& [i, j] : {std::pair{i0, j0}, {i1, j0}, {i0, j1}, {i1, j1}})
    {
        const auto [x, y] = grid.canvas_to_image(g, i, j);
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
    }
    const int c0 = std::max(0, static_cast<int>(std::floor(min_x)) - 1);
    const int c1 = std::min(g.width_px - 1, static_cast<int>(std::ceil(max_x)) + 1);
    const int r0 = std::max(0, static_cast<int>(std::floor(min_y)) - 1);
    const int r1 = std::min(g.height_px - 1, static_cast<int>(std::ceil(max_y)) + 1);
    if (c0 > c1 || r0 > r1)
    {
        return true;
    }
    const size_t W1 = static_cast<size_t>(g.width_px) + 1;
    const int64_t n = nonzero_sat_[(r1 + 1) * W1 + c1 + 1] - nonzero_sat_[r0 * W1 + c1 + 1] -
                      nonzero_sat_[(r1 + 1) * W1 + c0] + nonzero_sat_[r0 * W1 + c0];
    return n == 0;
}

const RotationPass& UncertaintyEvaluator::rotation(int r)
{
    auto& slot = passes_[static_cast<size_t>(r)];
    if (!slot)
    {
        slot = std::make_unique<RotationPass>(forward_rotation(w_, image_, *layout_, r));
    }
    return *slot;
}

double UncertaintyEvaluator::sigma(size_t index)
{
    if (index >= cache_.size())
    {
        throw Error(ErrorCode::InvalidArgument, "map index out of range");
    }
    if (!done_[index])
    {
        cache_[index] = zero_field(index) ? 0.0 : compute(index);
        done_[index] = 1;
    }
    return cache_[index];
}

double UncertaintyEvaluator::splat_and_reduce(const Tensor& grad, int r, int ox, int oy,
                                              const std::vector<BilinearTaps>* canvas_taps,
                                              const std::vector<uint8_t>* canvas_valid, const PlanarPose* pose)
{
    const ImageGeometry& g = image_.geometry();
    const int n = grad.w;
    const auto add = [&](const BilinearTaps& taps, double gv) {
        for (int k = 0; k < 4; ++k)
        {
            if (taps.weight[k] == 0.0)
            {
                continue;
            }
            const int idx = taps.index[k];
            if (scratch_[static_cast<size_t>(idx)] == 0.0)
            {
                touched_.push_back(idx);
            }
            scratch_[static_cast<size_t>(idx)] += taps.weight[k] * gv;
        }
    };

    if (canvas_taps)
    {
        const RotationGrid& grid = layout_->grids[static_cast<size_t>(r)];
        for (int j = 0; j < n; ++j)
        {
            for (int i = 0; i < n; ++i)
            {
                const size_t k = static_cast<size_t>(layout_->stride * oy + j) * grid.canvas_w +
                                 static_cast<size_t>(layout_->stride * ox + i);
                if ((*canvas_valid)[k])
                {
                    add((*canvas_taps)[k], grad.v[static_cast<size_t>(j) * n + i] * w_.input_scale);
                }
            }
        }
    }
    else
    {
        const AffineMap map = pose_to_affine(*pose, g);
        const double half = 0.5 * (n - 1);
        const auto valid = image_.valid_mask();
        for (int j = 0; j < n; ++j)
        {
            for (int i = 0; i < n; ++i)
            {
                const auto [px, py] = map.apply(i - half, j - half);
                const BilinearTaps taps = bilinear_taps(g, px, py);
                if (!taps.inside)
                {
                    continue;
                }
                bool ok = true;
                for (int t = 0; t < 4; ++t)
                {
                    ok = ok && (taps.weight[t] == 0.0 || valid[taps.index[t]] != 0);
                }
                if (ok)
                {
                    add(taps, grad.v[static_cast<size_t>(j) * n + i] * w_.input_scale);
                }
            }
        }
    }

    const auto s2 = sigma2_.data();
    double var = 0.0;
    for (int idx : touched_)
    {
        const double gv = scratch_[static_cast<size_t>(idx)];
        var += gv * gv * s2[static_cast<size_t>(idx)];
        scratch_[static_cast<size_t>(idx)] = 0.0;
    }
    touched_.clear();
    return std::sqrt(var);
}

double UncertaintyEvaluator::compute(size_t index)
{
    ++evaluated_;
    const MapCell cell = layout_->cell(index);
    Tensor top(layout_->channels, 1, 1, 1);
    top.v[static_cast<size_t>(cell.p)] = 1.0;
    if (variant_ == PropagationVariant::fcn)
    {
        const RotationPass& pass = rotation(cell.r);
        const ForwardTrace local = slice_trace(w_, pass.trace, cell.ox, cell.oy);
        const Tensor grad = backward_to_input(w_, local, top);
        return splat_and_reduce(grad, cell.r, cell.ox, cell.oy, &pass.canvas.taps, &pass.canvas.valid, nullptr);
    }
    const PlanarPose pose = layout_->pose(cell.r, cell.oy, cell.ox);
    const DepthImage window = crop_window(image_, pose, WindowSpec{layout_->field});
    const ForwardTrace trace = forward_trace(w_, window_input(w_, window));
    const Tensor grad = backward_to_input(w_, trace, top);
    return splat_and_reduce(grad, cell.r, cell.ox, cell.oy, nullptr, nullptr, &pose);
}

namespace
{

RewardUncertaintyMap propagate(const ModelWeights& w, const DepthImage& image, const UncertaintyImage& sigma2,
                               int rotations, const std::optional<AxisBox>& valid_region, PropagationVariant variant)
{
    w.check_invariants();
    RewardUncertaintyMap out;
    out.layout = layout_for(w, image.geometry(), rotations, valid_region);
    UncertaintyEvaluator eval(w, image, sigma2, out.layout, variant);
    out.values.resize(out.layout->size());
    for (size_t i = 0; i < out.values.size(); ++i)
    {
        out.values[i] = eval.sigma(i);
    }
    return out;
}

}  // namespace

RewardUncertaintyMap propagate_exact(const ModelWeights& w, const DepthImage& image, const UncertaintyImage& sigma2,
                                     int rotations, const std::optional<AxisBox>& valid_region)
{
    return propagate(w, image, sigma2, rotations, valid_region, PropagationVariant::exact);
}

RewardUncertaintyMap propagate_fcn(const ModelWeights& w, const DepthImage& image, const UncertaintyImage& sigma2,
                                   int rotations, const std::optional<AxisBox>& valid_region)
{
    return propagate(w, image, sigma2, rotations, valid_region, PropagationVariant::fcn);
}

CellMap lower_bound_map(const RewardMap& psi, const RewardUncertaintyMap& sigma, double alpha)
{
    if (!(alpha >= 0.0))
    {
        throw Error(ErrorCode::InvalidArgument, "alpha must be non-negative");
    }
    if (psi.values.size() != sigma.values.size())
    {
        throw Error(ErrorCode::ShapeMismatch, "reward and uncertainty maps differ in size");
    }
    CellMap lb{psi.layout, psi.values};
    for (size_t i = 0; i < lb.values.size(); ++i)
    {
        lb.values[i] -= alpha * sigma.values[i];
    }
    return lb;
}

void write_cells_csv(const std::string& path, const RewardMap& psi, const RewardUncertaintyMap& sigma,
                     const CellMap& lb)
{
    if (psi.size() != sigma.size() || psi.size() != lb.size())
    {
        throw Error(ErrorCode::ShapeMismatch, "maps differ in size");
    }
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f)
    {
        throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
    }
    std::fprintf(f, "index,r,p,oy,ox,x,y,a,psi,sigma,lb\n");
    for (size_t i = 0; i < psi.size(); ++i)
    {
        if (!psi.valid(i))
        {
            continue;
        }
        const MapCell c = psi.layout->cell(i);
        const PlanarPose pose = psi.layout->pose(c.r, c.oy, c.ox);
        std::fprintf(f, "%zu,%d,%d,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", i, c.r, c.p, c.oy, c.ox, pose.x,
                     pose.y, pose.a, psi.values[i], sigma.values[i], lb.values[i]);
    }
    std::fclose(f);
}

}  // namespace foresight
