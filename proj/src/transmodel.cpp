#include "foresight/transmodel.hpp"

#include <algorithm>
#include <cmath>

#include "foresight/errors.hpp"

namespace foresight
{

TransModelConfig TransModelConfig::noiseless() const
{
    TransModelConfig c = *this;
    c.boundary_jitter_prob = 0.0;
    c.boundary_offset_prob = 0.0;
    c.neighbor_jitter_prob = 0.0;
    c.shift_jitter = 0.0;
    return c;
}

namespace
{

struct Grid
{
    int w;
    int h;
    size_t idx(int c, int r) const { return static_cast<size_t>(r) * w + c; }
    bool in(int c, int r) const { return c >= 0 && r >= 0 && c < w && r < h; }
};

template <typename Accept>
Mask flood(const Grid& g, const std::vector<std::pair<int, int>>& seeds, Accept&& accept)
{
    Mask mask(static_cast<size_t>(g.w) * g.h, 0);
    std::vector<std::pair<int, int>> stack;
    for (const auto& s : seeds)
    {
        if (g.in(s.first, s.second) && !mask[g.idx(s.first, s.second)] && accept(s.first, s.second))
        {
            mask[g.idx(s.first, s.second)] = 1;
            stack.push_back(s);
        }
    }
    while (!stack.empty())
    {
        const auto [c, r] = stack.back();
        stack.pop_back();
        for (const auto& [dc, dr] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}})
        {
            const int nc = c + dc;
            const int nr = r + dr;
            if (g.in(nc, nr) && !mask[g.idx(nc, nr)] && accept(nc, nr))
            {
                mask[g.idx(nc, nr)] = 1;
                stack.push_back({nc, nr});
            }
        }
    }
    return mask;
}

Mask dilate(const Mask& m, const Grid& g, int radius)
{
    Mask out = m;
    for (int it = 0; it < radius; ++it)
    {
        const Mask prev = out;
        for (int r = 0; r < g.h; ++r)
        {
            for (int c = 0; c < g.w; ++c)
            {
                if (prev[g.idx(c, r)])
                {
                    continue;
                }
                for (const auto& [dc, dr] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}})
                {
                    if (g.in(c + dc, r + dr) && prev[g.idx(c + dc, r + dr)])
                    {
                        out[g.idx(c, r)] = 1;
                        break;
                    }
                }
            }
        }
    }
    return out;
}

Mask erode(const Mask& m, const Grid& g)
{
    Mask out = m;
    for (int r = 0; r < g.h; ++r)
    {
        for (int c = 0; c < g.w; ++c)
        {
            if (!m[g.idx(c, r)])
            {
                continue;
            }
            for (const auto& [dc, dr] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}})
            {
                if (!g.in(c + dc, r + dr) || !m[g.idx(c + dc, r + dr)])
                {
                    out[g.idx(c, r)] = 0;
                    break;
                }
            }
        }
    }
    return out;
}

Mask offset_mask(const Mask& m, const Grid& g, int dx, int dy)
{
    Mask out(m.size(), 0);
    for (int r = 0; r < g.h; ++r)
    {
        for (int c = 0; c < g.w; ++c)
        {
            if (m[g.idx(c, r)] && g.in(c + dx, r + dy))
            {
                out[g.idx(c + dx, r + dy)] = 1;
            }
        }
    }
    return out;
}

bool any(const Mask& m)
{
    return std::any_of(m.begin(), m.end(), [](uint8_t v) { return v != 0; });
}

// Lowest height in a two-pixel ring around the mask; the floor the removed
// object is assumed to have rested on.
double ring_floor(const DepthImage& win, const Mask& m, const Grid& g)
{
    const Mask ring = dilate(m, g, 2);
    double lo = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < m.size(); ++i)
    {
        if (ring[i] && !m[i] && win.valid_mask()[i])
        {
            lo = std::min(lo, win.data()[i]);
        }
    }
    return std::isfinite(lo) ? std::max(0.0, lo) : 0.0;
}

void remove_mask(DepthImage& win, const Mask& m, double floor)
{
    auto data = win.data();
    for (size_t i = 0; i < m.size(); ++i)
    {
        if (m[i])
        {
            data[i] = std::min(data[i], floor);
        }
    }
}

bool is_object(const TransModelConfig& cfg, double h)
{
    return h > cfg.floor_threshold && h <= cfg.max_object_height;
}

std::pair<int, int> central_seed(const DepthImage& win)
{
    const int c0 = win.width() / 2 - 1;
    const int r0 = win.height() / 2 - 1;
    std::pair<int, int> best{c0, r0};
    for (int r = r0; r <= r0 + 1; ++r)
    {
        for (int c = c0; c <= c0 + 1; ++c)
        {
            if (win.at(c, r) > win.at(best.first, best.second))
            {
                best = {c, r};
            }
        }
    }
    return best;
}

Mask grasp_mask(const TransModelConfig& cfg, const DepthImage& win)
{
    const auto [sc, sr] = central_seed(win);
    return segment_at(win, sc, sr, cfg.seg_height_tol, cfg.floor_threshold, cfg.max_object_height);
}

// Moves the object pixels in `moving` by (dx, dy) with max compositing; vacated
// pixels drop to the surrounding floor. Pixels leaving the window are lost.
void translate(DepthImage& win, const DepthImage& src, const Mask& moving, const Grid& g, int dx, int dy)
{
    if (!any(moving) || (dx == 0 && dy == 0))
    {
        return;
    }
    const double floor = ring_floor(src, moving, g);
    remove_mask(win, moving, floor);
    auto data = win.data();
    const auto sdata = src.data();
    for (int r = 0; r < g.h; ++r)
    {
        for (int c = 0; c < g.w; ++c)
        {
            if (moving[g.idx(c, r)] && g.in(c + dx, r + dy))
            {
                double& d = data[g.idx(c + dx, r + dy)];
                d = std::max(d, sdata[g.idx(c, r)]);
            }
        }
    }
}

std::vector<Mask> components(const TransModelConfig& cfg, const DepthImage& win, const Grid& g, const Mask& region,
                             const Mask& exclude)
{
    std::vector<Mask> out;
    Mask taken = exclude;
    for (int r = 0; r < g.h; ++r)
    {
        for (int c = 0; c < g.w; ++c)
        {
            const size_t i = g.idx(c, r);
            if (!region[i] || taken[i] || !is_object(cfg, win.data()[i]))
            {
                continue;
            }
            Mask comp = flood(g, {{c, r}}, [&](int cc, int rr) {
                const size_t k = g.idx(cc, rr);
                return !taken[k] && is_object(cfg, win.data()[k]);
            });
            for (size_t k = 0; k < comp.size(); ++k)
            {
                taken[k] |= comp[k];
            }
            out.push_back(std::move(comp));
        }
    }
    return out;
}

void jitter_neighbors(const TransModelConfig& cfg, DepthImage& out, const DepthImage& src, const Grid& g,
                      const Mask& zone, const Mask& exclude, Rng& rng)
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (cfg.neighbor_jitter_prob <= 0.0 || !(unit(rng) < cfg.neighbor_jitter_prob))
    {
        return;
    }
    std::uniform_int_distribution<int> step(-cfg.neighbor_jitter_px, cfg.neighbor_jitter_px);
    for (const Mask& comp : components(cfg, src, g, zone, exclude))
    {
        const int dx = step(rng);
        const int dy = step(rng);
        translate(out, src, comp, g, dx, dy);
    }
}

struct ShiftPlan
{
    std::vector<Mask> comps;
    std::vector<double> gap_px;  // free travel before the gripper front reaches the component
    int dir = 1;
};

ShiftPlan plan_shift(const TransModelConfig& cfg, const DepthImage& win, const Grid& g, int primitive)
{
    ShiftPlan plan;
    plan.dir = primitive == 4 ? 1 : -1;
    const double res = win.resolution();
    const double cx = 0.5 * (g.w - 1);
    const double cy = 0.5 * (g.h - 1);
    const double half_u = cfg.finger_thickness / res;
    const double half_v = 0.5 * cfg.finger_length / res;
    const double travel = cfg.shift_travel / res;

    double top = 0.0;
    for (int r = 0; r < g.h; ++r)
    {
        for (int c = 0; c < g.w; ++c)
        {
            if (std::abs(c - cx) <= half_u && std::abs(r - cy) <= half_v)
            {
                top = std::max(top, win.at(c, r));
            }
        }
    }
    const double z = std::max(cfg.min_descent, top - cfg.descent_offset);

    Mask corridor(static_cast<size_t>(g.w) * g.h, 0);
    for (int r = 0; r < g.h; ++r)
    {
        for (int c = 0; c < g.w; ++c)
        {
            const double u = plan.dir * (c - cx);
            if (u >= -half_u && u <= half_u + travel && std::abs(r - cy) <= half_v && win.at(c, r) > z &&
                win.at(c, r) <= cfg.max_object_height)
            {
                corridor[g.idx(c, r)] = 1;
            }
        }
    }
    const Mask none(corridor.size(), 0);
    plan.comps = components(cfg, win, g, corridor, none);
    for (const Mask& comp : plan.comps)
    {
        double nearest = std::numeric_limits<double>::infinity();
        for (int r = 0; r < g.h; ++r)
        {
            for (int c = 0; c < g.w; ++c)
            {
                if (comp[g.idx(c, r)] && corridor[g.idx(c, r)])
                {
                    nearest = std::min(nearest, plan.dir * (c - cx));
                }
            }
        }
        plan.gap_px.push_back(std::max(0.0, nearest - half_u));
    }
    return plan;
}

// Largest displacement up to k that keeps the component off wall pixels.
int clamp_to_walls(const TransModelConfig& cfg, const DepthImage& win, const Grid& g, const Mask& comp, int dir,
                   int k)
{
    for (; k > 0; --k)
    {
        bool blocked = false;
        for (int r = 0; r < g.h && !blocked; ++r)
        {
            for (int c = 0; c < g.w; ++c)
            {
                const int nc = c + dir * k;
                if (comp[g.idx(c, r)] && g.in(nc, r) && win.at(nc, r) > cfg.max_object_height)
                {
                    blocked = true;
                    break;
                }
            }
        }
        if (!blocked)
        {
            return k;
        }
    }
    return 0;
}

DepthImage apply_shift(const TransModelConfig& cfg, const DepthImage& win, const Grid& g, const ShiftPlan& plan,
                       double travel_m)
{
    DepthImage out = win;
    const double travel_px = travel_m / win.resolution();
    for (size_t i = 0; i < plan.comps.size(); ++i)
    {
        const int k = static_cast<int>(std::lround(std::max(0.0, travel_px - plan.gap_px[i])));
        const int kk = clamp_to_walls(cfg, win, g, plan.comps[i], plan.dir, k);
        translate(out, win, plan.comps[i], g, plan.dir * kk, 0);
    }
    return out;
}

void check_input(const TransitionInput& in)
{
    if (in.window.width() != in.window.height() || in.window.width() < 4)
    {
        throw Error(ErrorCode::ShapeMismatch, "transition window must be square");
    }
    if (in.primitive < 0 || in.primitive >= kNumPrimitives)
    {
        throw Error(ErrorCode::InvalidArgument, "primitive out of range");
    }
}

Mask finger_zone(const TransModelConfig& cfg, const Grid& g, double res)
{
    Mask zone(static_cast<size_t>(g.w) * g.h, 0);
    const double cx = 0.5 * (g.w - 1);
    const double cy = 0.5 * (g.h - 1);
    const double half_u = (0.5 * cfg.max_gripper_width + cfg.finger_thickness) / res + cfg.neighbor_radius_px;
    const double half_v = 0.5 * cfg.finger_length / res + cfg.neighbor_radius_px;
    for (int r = 0; r < g.h; ++r)
    {
        for (int c = 0; c < g.w; ++c)
        {
            zone[g.idx(c, r)] = std::abs(c - cx) <= half_u && std::abs(r - cy) <= half_v;
        }
    }
    return zone;
}

}  // namespace

Mask segment_at(const DepthImage& window, int seed_col, int seed_row, double threshold, double floor_threshold,
                double max_height)
{
    const Grid g{window.width(), window.height()};
    if (!g.in(seed_col, seed_row))
    {
        throw Error(ErrorCode::InvalidArgument, "segmentation seed outside the window");
    }
    const double h0 = window.at(seed_col, seed_row);
    if (!(h0 > floor_threshold) || h0 > max_height || !window.valid(seed_col, seed_row))
    {
        return Mask(g.w * static_cast<size_t>(g.h), 0);
    }
    return flood(g, {{seed_col, seed_row}}, [&](int c, int r) {
        const double h = window.at(c, r);
        return window.valid(c, r) && h > floor_threshold && std::abs(h - h0) < threshold;
    });
}

DepthImage predict_mode(const TransModelConfig& cfg, const TransitionInput& input)
{
    check_input(input);
    const DepthImage& win = input.window;
    const Grid g{win.width(), win.height()};
    if (is_grasp(input.primitive))
    {
        if (input.reward < 0.5)
        {
            return win;
        }
        DepthImage out = win;
        const Mask m = grasp_mask(cfg, win);
        if (any(m))
        {
            remove_mask(out, m, ring_floor(win, m, g));
        }
        return out;
    }
    return apply_shift(cfg, win, g, plan_shift(cfg, win, g, input.primitive), cfg.shift_travel);
}

TransitionSampleSet predict_samples(const TransModelConfig& cfg, const TransitionInput& input, Rng& rng)
{
    check_input(input);
    if (cfg.samples < 2)
    {
        throw Error(ErrorCode::InvalidArgument, "need at least two samples");
    }
    const DepthImage& win = input.window;
    const Grid g{win.width(), win.height()};
    TransitionSampleSet set;
    set.n = cfg.samples;
    set.mode = predict_mode(cfg, input);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    if (is_grasp(input.primitive) && input.reward >= 0.5)
    {
        const Mask m = grasp_mask(cfg, win);
        const double floor = any(m) ? ring_floor(win, m, g) : 0.0;
        const Mask near = dilate(m, g, cfg.neighbor_radius_px);
        for (int s = 0; s < cfg.samples; ++s)
        {
            Mask pm = m;
            if (any(m) && unit(rng) < cfg.boundary_jitter_prob)
            {
                pm = unit(rng) < 0.5 ? dilate(pm, g, 1) : erode(pm, g);
            }
            if (any(m) && unit(rng) < cfg.boundary_offset_prob)
            {
                const int k = std::uniform_int_distribution<int>(0, 3)(rng);
                const int dx = k == 0 ? 1 : (k == 1 ? -1 : 0);
                const int dy = k == 2 ? 1 : (k == 3 ? -1 : 0);
                pm = offset_mask(pm, g, dx, dy);
            }
            DepthImage out = win;
            remove_mask(out, pm, floor);
            jitter_neighbors(cfg, out, win, g, near, m, rng);
            set.samples.push_back(std::move(out));
        }
    }
    else if (is_grasp(input.primitive))
    {
        const Mask zone = finger_zone(cfg, g, win.resolution());
        const Mask none(zone.size(), 0);
        for (int s = 0; s < cfg.samples; ++s)
        {
            DepthImage out = win;
            jitter_neighbors(cfg, out, win, g, zone, none, rng);
            set.samples.push_back(std::move(out));
        }
    }
    else
    {
        const ShiftPlan plan = plan_shift(cfg, win, g, input.primitive);
        std::normal_distribution<double> normal(0.0, cfg.shift_jitter > 0.0 ? cfg.shift_jitter : 1.0);
        for (int s = 0; s < cfg.samples; ++s)
        {
            const double travel = cfg.shift_travel + (cfg.shift_jitter > 0.0 ? normal(rng) : 0.0);
            set.samples.push_back(apply_shift(cfg, win, g, plan, std::max(0.0, travel)));
        }
    }
    set.variance = pixel_variance(set.samples, set.mode);
    return set;
}

UncertaintyImage pixel_variance(const std::vector<DepthImage>& samples, const DepthImage& mode)
{
    if (samples.size() < 2)
    {
        throw Error(ErrorCode::InvalidArgument, "variance needs at least two samples");
    }
    UncertaintyImage var(mode.geometry(), 0.0);
    auto out = var.data();
    const auto m = mode.data();
    for (const DepthImage& s : samples)
    {
        if (s.width() != mode.width() || s.height() != mode.height())
        {
            throw Error(ErrorCode::ShapeMismatch, "sample shape differs from mode");
        }
        const auto d = s.data();
        for (size_t i = 0; i < out.size(); ++i)
        {
            const double e = d[i] - m[i];
            out[i] += e * e;
        }
    }
    const double inv = 1.0 / static_cast<double>(samples.size());
    for (double& v : out)
    {
        v *= inv;
    }
    return var;
}

DepthImage patch_changes(const DepthImage& image, const DepthImage& before, const DepthImage& after,
                         const PlanarPose& pose)
{
    DepthImage delta = after;
    bool changed = false;
    for (int r = 0; r < after.height(); ++r)
    {
        for (int c = 0; c < after.width(); ++c)
        {
            const bool diff = after.at(c, r) != before.at(c, r);
            delta.set_valid(c, r, diff && after.valid(c, r));
            changed = changed || diff;
        }
    }
    if (!changed)
    {
        return image;
    }
    return patch_window(image, delta, pose);
}

namespace
{

TransitionInput make_input(const TransModelConfig& cfg, const DepthImage& image, const PlanarPose& pose,
                           int primitive, double reward)
{
    TransitionInput in;
    in.window = crop_window(image, pose, WindowSpec{cfg.window_px});
    in.primitive = primitive;
    in.reward = reward;
    return in;
}

}  // namespace

ImagePrediction predict_image(const TransModelConfig& cfg, const DepthImage& image, const PlanarPose& pose,
                              int primitive, double reward, Rng& rng)
{
    const TransitionInput in = make_input(cfg, image, pose, primitive, reward);
    ImagePrediction out;
    out.window = predict_samples(cfg, in, rng);
    out.image = patch_changes(image, in.window, out.window.mode, pose);
    out.variance = zero_pad_uncertainty(out.window.variance, pose, image.geometry());
    return out;
}

DepthImage predict_image_mode(const TransModelConfig& cfg, const DepthImage& image, const PlanarPose& pose,
                              int primitive, double reward)
{
    const TransitionInput in = make_input(cfg, image, pose, primitive, reward);
    return patch_changes(image, in.window, predict_mode(cfg, in), pose);
}

}  // namespace foresight
