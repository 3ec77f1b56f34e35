#include "foresight/binsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "foresight/errors.hpp"

namespace foresight
{

uint64_t derive_seed(uint64_t parent, uint64_t stream)
{
    uint64_t z = parent + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

ImageGeometry BinGeometry::image_geometry() const
{
    const int w = static_cast<int>(std::lround((inner_width + 2.0 * wall_thickness) / resolution));
    const int h = static_cast<int>(std::lround((inner_depth + 2.0 * wall_thickness) / resolution));
    return {w, h, resolution};
}

namespace
{

bool z_overlap(const Cuboid& a, const Cuboid& b)
{
    return std::min(a.top(), b.top()) - std::max(a.z, b.z) > 1e-9;
}

bool collides(const Cuboid& a, const Cuboid& b)
{
    return z_overlap(a, b) && overlaps(a.footprint(), b.footprint());
}

bool collides_any(const std::vector<Cuboid>& objects, size_t i)
{
    for (size_t j = 0; j < objects.size(); ++j)
    {
        if (j != i && collides(objects[i], objects[j]))
        {
            return true;
        }
    }
    return false;
}

Vec2 rotate(Vec2 v, double a)
{
    const double c = std::cos(a);
    const double s = std::sin(a);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

void check_pose(const SceneState& scene, const PlanarPose& pose)
{
    const AxisBox box = scene.bin.interior();
    if (!(pose.x >= box.x0 && pose.x <= box.x1 && pose.y >= box.y0 && pose.y <= box.y1))
    {
        throw Error(ErrorCode::PoseOutOfBin, "action pose outside the bin interior");
    }
}

double gaussian(Rng& rng, double stddev)
{
    if (stddev <= 0.0)
    {
        return 0.0;
    }
    return std::normal_distribution<double>(0.0, stddev)(rng);
}

double descent_height(const SceneState& scene, const OrientedRect& region, const SimConfig& cfg)
{
    double top = 0.0;
    for (const Cuboid& c : scene.objects)
    {
        if (overlaps(region, c.footprint()))
        {
            top = std::max(top, c.top());
        }
    }
    return std::max(cfg.min_descent, top - cfg.descent_offset);
}

// Extent along u of the part of `fp` within |v| <= half_l of the gripper center.
double strip_extent(const OrientedRect& fp, Vec2 center, Vec2 u, double half_l)
{
    const Vec2 v{-u.y, u.x};
    std::vector<Vec2> poly;
    for (const Vec2& p : fp.corners())
    {
        poly.push_back({(p - center).dot(u), (p - center).dot(v)});
    }
    for (const double sign : {1.0, -1.0})
    {
        std::vector<Vec2> out;
        for (size_t i = 0; i < poly.size(); ++i)
        {
            const Vec2 a = poly[i];
            const Vec2 b = poly[(i + 1) % poly.size()];
            const double da = half_l - sign * a.y;
            const double db = half_l - sign * b.y;
            if (da >= 0.0)
            {
                out.push_back(a);
            }
            if ((da >= 0.0) != (db >= 0.0))
            {
                const double t = da / (da - db);
                out.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
            }
        }
        poly = std::move(out);
    }
    if (poly.empty())
    {
        return 0.0;
    }
    double lo = poly[0].x;
    double hi = poly[0].x;
    for (const Vec2& p : poly)
    {
        lo = std::min(lo, p.x);
        hi = std::max(hi, p.x);
    }
    return hi - lo;
}

}  // namespace

void SceneState::check_invariants() const
{
    const AxisBox box = bin.interior();
    for (size_t i = 0; i < objects.size(); ++i)
    {
        const Cuboid& c = objects[i];
        if (!(c.lx > 0.0 && c.ly > 0.0 && c.lz > 0.0) || c.lz > bin.max_stack_height)
        {
            throw Error(ErrorCode::InvalidArgument, "cuboid dimensions out of range");
        }
        if (c.z < 0.0)
        {
            throw Error(ErrorCode::InvalidArgument, "object below the floor");
        }
        if (!inside(c.footprint(), box, 1e-9))
        {
            throw Error(ErrorCode::InvalidArgument, "object outside the bin interior");
        }
        for (size_t j = i + 1; j < objects.size(); ++j)
        {
            if (collides(c, objects[j]))
            {
                throw Error(ErrorCode::InvalidArgument, "objects interpenetrate");
            }
        }
    }
}

int SceneState::next_id() const
{
    int id = 0;
    for (const Cuboid& c : objects)
    {
        id = std::max(id, c.id + 1);
    }
    return id;
}

GraspPrimitive SimConfig::grasp(int index) const
{
    if (!is_grasp(index))
    {
        throw Error(ErrorCode::InvalidArgument, "grasp primitive index must be 0..3");
    }
    return {index, gripper_widths[static_cast<size_t>(index)], finger_thickness, finger_length};
}

ShiftPrimitive SimConfig::shift(int index) const
{
    if (index != 4 && index != 5)
    {
        throw Error(ErrorCode::InvalidArgument, "shift primitive index must be 4 or 5");
    }
    const Vec2 dir = index == 4 ? Vec2{1.0, 0.0} : Vec2{-1.0, 0.0};
    return {index, dir, shift_travel, finger_thickness, finger_length};
}

SimConfig SimConfig::noiseless() const
{
    SimConfig c = *this;
    c.failure_jitter_std = 0.0;
    c.shift_noise_std = 0.0;
    return c;
}

DepthImage render_depth(const SceneState& scene)
{
    const ImageGeometry g = scene.bin.image_geometry();
    DepthImage img(g);
    const AxisBox box = scene.bin.interior();
    for (int r = 0; r < g.height_px; ++r)
    {
        const double y = g.to_meter_y(r);
        for (int c = 0; c < g.width_px; ++c)
        {
            const double x = g.to_meter_x(c);
            if (x < box.x0 || x > box.x1 || y < box.y0 || y > box.y1)
            {
                img.at(c, r) = scene.bin.wall_height;
            }
        }
    }
    for (const Cuboid& obj : scene.objects)
    {
        const OrientedRect fp = obj.footprint();
        const auto [x0, x1] = fp.project({1.0, 0.0});
        const auto [y0, y1] = fp.project({0.0, 1.0});
        const int c0 = std::max(0, static_cast<int>(std::floor(g.to_pixel_x(x0))));
        const int c1 = std::min(g.width_px - 1, static_cast<int>(std::ceil(g.to_pixel_x(x1))));
        const int r0 = std::max(0, static_cast<int>(std::floor(g.to_pixel_y(y0))));
        const int r1 = std::min(g.height_px - 1, static_cast<int>(std::ceil(g.to_pixel_y(y1))));
        for (int r = r0; r <= r1; ++r)
        {
            for (int c = c0; c <= c1; ++c)
            {
                if (fp.contains({g.to_meter_x(c), g.to_meter_y(r)}))
                {
                    img.at(c, r) = std::max(img.at(c, r), obj.top());
                }
            }
        }
    }
    return img;
}

GraspCheck check_grasp(const SceneState& scene, const PlanarPose& pose, const GraspPrimitive& prim,
                       const SimConfig& cfg)
{
    GraspCheck out;
    const Vec2 center{pose.x, pose.y};
    const Vec2 u = unit_from_angle(pose.a);
    const double half_d = 0.5 * prim.width;
    const double half_t = 0.5 * prim.finger_thickness;
    const double half_l = 0.5 * prim.finger_length;
    const OrientedRect closing{center, pose.a, half_d, half_l};
    const std::array<OrientedRect, 2> fingers{
        OrientedRect{center + u * (half_d + half_t), pose.a, half_t, half_l},
        OrientedRect{center - u * (half_d + half_t), pose.a, half_t, half_l},
    };

    out.z = descent_height(scene, closing, cfg);
    const AxisBox box = scene.bin.interior();
    for (const OrientedRect& f : fingers)
    {
        if (!inside(f, box, 1e-9))
        {
            out.collision = true;
        }
        for (const Cuboid& c : scene.objects)
        {
            if (c.top() > out.z && overlaps(f, c.footprint()))
            {
                out.collision = true;
            }
        }
    }

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    bool spills = false;
    for (size_t i = 0; i < scene.objects.size(); ++i)
    {
        const Cuboid& c = scene.objects[i];
        if (c.top() <= out.z || !overlaps(closing, c.footprint()))
        {
            continue;
        }
        const auto [p0, p1] = c.footprint().project(u);
        const double c0 = p0 - center.dot(u);
        const double c1 = p1 - center.dot(u);
        if (c0 < -half_d - 1e-9 || c1 > half_d + 1e-9)
        {
            spills = true;
        }
        // Objects touched only by a corner tip inside the finger strip are not held.
        if (strip_extent(c.footprint(), center, u, half_l) < 0.5 * (c1 - c0))
        {
            spills = true;
        }
        out.captured.push_back(i);
        lo = std::min(lo, c0);
        hi = std::max(hi, c1);
    }
    if (!out.captured.empty())
    {
        out.extent = hi - lo;
    }
    out.success = !out.collision && !spills && !out.captured.empty() && out.extent >= 0.3 * prim.width - 1e-12 &&
                  out.extent <= prim.width + 1e-12;
    return out;
}

void settle(SceneState& scene)
{
    auto& objs = scene.objects;
    std::vector<size_t> order(objs.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return objs[a].z < objs[b].z; });
    for (size_t k = 0; k < order.size(); ++k)
    {
        Cuboid& c = objs[order[k]];
        if (c.z <= 0.0)
        {
            c.z = 0.0;
            continue;
        }
        double support = 0.0;
        for (size_t m = 0; m < k; ++m)
        {
            const Cuboid& b = objs[order[m]];
            if (b.top() <= c.z + 1e-9 && overlaps(b.footprint(), c.footprint()))
            {
                support = std::max(support, b.top());
            }
        }
        c.z = support;
    }
}

namespace
{

void jitter_near(SceneState& scene, const std::vector<OrientedRect>& zones, double stddev, Rng& rng)
{
    const AxisBox box = scene.bin.interior();
    for (size_t i = 0; i < scene.objects.size(); ++i)
    {
        Cuboid& c = scene.objects[i];
        const bool near = std::any_of(zones.begin(), zones.end(),
                                      [&](const OrientedRect& z) { return overlaps(z, c.footprint(), 0.0); });
        if (!near)
        {
            continue;
        }
        const double dx = gaussian(rng, stddev);
        const double dy = gaussian(rng, stddev);
        const Cuboid old = c;
        c.x += dx;
        c.y += dy;
        if (!inside(c.footprint(), box, 0.0) || collides_any(scene.objects, i))
        {
            c = old;
        }
    }
    settle(scene);
}

}  // namespace

PrimitiveOutcome exec_grasp(const SceneState& scene, const PlanarPose& pose, const GraspPrimitive& prim, Rng& rng,
                            const SimConfig& cfg)
{
    check_pose(scene, pose);
    const GraspCheck check = check_grasp(scene, pose, prim, cfg);
    PrimitiveOutcome out;
    out.next_scene = scene;
    if (check.success)
    {
        out.reward = 1.0;
        out.grasped_count = static_cast<int>(check.captured.size());
        out.final_gripper_width = check.extent;
        auto& objs = out.next_scene.objects;
        for (auto it = check.captured.rbegin(); it != check.captured.rend(); ++it)
        {
            objs.erase(objs.begin() + static_cast<std::ptrdiff_t>(*it));
        }
        settle(out.next_scene);
        return out;
    }

    const Vec2 center{pose.x, pose.y};
    const Vec2 u = unit_from_angle(pose.a);
    const double half_d = 0.5 * prim.width;
    const double half_t = 0.5 * prim.finger_thickness;
    const double half_l = 0.5 * prim.finger_length;
    const std::vector<OrientedRect> zones{
        OrientedRect{center + u * (half_d + half_t), pose.a, half_t, half_l}.inflated(cfg.jitter_radius),
        OrientedRect{center - u * (half_d + half_t), pose.a, half_t, half_l}.inflated(cfg.jitter_radius),
    };
    jitter_near(out.next_scene, zones, cfg.failure_jitter_std, rng);
    return out;
}

namespace
{

OrientedRect moved(const OrientedRect& r, Vec2 dir, double s)
{
    return {r.center + dir * s, r.yaw, r.hx, r.hy};
}

// Objects pushed into contact are left this far apart so rounding in the
// position update cannot turn contact into overlap.
constexpr double kClearance = 1e-7;

// Smallest t >= 0 such that b moved by t along dir no longer overlaps a.
double separation(const OrientedRect& a, const OrientedRect& b, Vec2 dir)
{
    double lo = 0.0;
    double hi = 2.0 * (a.hx + a.hy + b.hx + b.hy);
    for (int it = 0; it < 60; ++it)
    {
        const double mid = 0.5 * (lo + hi);
        (overlaps(a, moved(b, dir, mid)) ? lo : hi) = mid;
    }
    return hi;
}

// Moves object i by up to s along dir, pushing whatever it runs into.
// Returns the distance actually travelled.
double push(std::vector<Cuboid>& objs, size_t i, Vec2 dir, double s, const AxisBox& box, int depth)
{
    s = std::min(s, max_travel_inside(objs[i].footprint(), dir, s, box));
    if (s <= 0.0 || depth > static_cast<int>(objs.size()))
    {
        return 0.0;
    }
    for (size_t j = 0; j < objs.size(); ++j)
    {
        if (j == i || !z_overlap(objs[i], objs[j]))
        {
            continue;
        }
        const OrientedRect target = moved(objs[i].footprint(), dir, s);
        if (!overlaps(target, objs[j].footprint()))
        {
            continue;
        }
        const double need = separation(target, objs[j].footprint(), dir) + kClearance;
        const double got = push(objs, j, dir, need, box, depth + 1);
        if (got < need)
        {
            // j is blocked; stop i at contact.
            double lo = 0.0;
            double hi = s;
            for (int it = 0; it < 60; ++it)
            {
                const double mid = 0.5 * (lo + hi);
                (overlaps(moved(objs[i].footprint(), dir, mid), objs[j].footprint()) ? hi : lo) = mid;
            }
            s = std::max(0.0, lo - kClearance);
        }
    }
    // Nested pushes of rotated blocks can move a neighbour back into the path.
    const auto blocked = [&](double t) {
        const OrientedRect r = moved(objs[i].footprint(), dir, t);
        for (size_t j = 0; j < objs.size(); ++j)
        {
            if (j != i && z_overlap(objs[i], objs[j]) && overlaps(r, objs[j].footprint()))
            {
                return true;
            }
        }
        return false;
    };
    if (s > 0.0 && blocked(s))
    {
        double lo = 0.0;
        double hi = s;
        for (int it = 0; it < 60; ++it)
        {
            const double mid = 0.5 * (lo + hi);
            (blocked(mid) ? hi : lo) = mid;
        }
        s = std::max(0.0, lo - kClearance);
    }
    objs[i].x += dir.x * s;
    objs[i].y += dir.y * s;
    return s;
}

double push_stepwise(std::vector<Cuboid>& objs, size_t i, Vec2 dir, double s, const AxisBox& box)
{
    constexpr double kStep = 0.002;
    double total = 0.0;
    while (s - total > 1e-12)
    {
        const double step = std::min(kStep, s - total);
        const double got = push(objs, i, dir, step, box, 0);
        total += got;
        if (got < step - 1e-12)
        {
            break;
        }
    }
    return total;
}

}  // namespace

PrimitiveOutcome exec_shift(const SceneState& scene, const PlanarPose& pose, const ShiftPrimitive& prim, Rng& rng,
                            const SimConfig& cfg)
{
    check_pose(scene, pose);
    PrimitiveOutcome out;
    out.next_scene = scene;
    const AxisBox box = scene.bin.interior();
    const Vec2 dir = rotate(prim.direction, pose.a);
    const double dir_angle = std::atan2(dir.y, dir.x);
    const OrientedRect gripper{{pose.x, pose.y}, dir_angle, prim.finger_thickness, 0.5 * prim.finger_length};
    if (!inside(gripper, box, 1e-9))
    {
        return out;
    }
    const double z = descent_height(scene, gripper, cfg);
    const double travel = max_travel_inside(gripper, dir, prim.travel, box);
    const OrientedRect corridor{gripper.center + dir * (0.5 * travel), dir_angle, gripper.hx + 0.5 * travel,
                                gripper.hy};
    const double front = gripper.center.dot(dir) + gripper.hx;

    struct Contact
    {
        size_t index;
        double ahead;
        double amount;
    };
    std::vector<Contact> contacts;
    for (size_t i = 0; i < scene.objects.size(); ++i)
    {
        const Cuboid& c = scene.objects[i];
        if (c.top() <= z || !overlaps(corridor, c.footprint()))
        {
            continue;
        }
        const double near = c.footprint().project(dir).first;
        const double gap = std::max(0.0, near - front);
        contacts.push_back({i, near, std::max(0.0, travel - gap)});
    }
    // Noise draws happen in index order so they do not depend on sort stability.
    for (Contact& ct : contacts)
    {
        ct.amount = std::max(0.0, ct.amount + gaussian(rng, cfg.shift_noise_std));
    }
    std::stable_sort(contacts.begin(), contacts.end(),
                     [](const Contact& a, const Contact& b) { return a.ahead > b.ahead; });

    const double before = max_grasp_reward(scene, pose, cfg);
    for (const Contact& ct : contacts)
    {
        push_stepwise(out.next_scene.objects, ct.index, dir, ct.amount, box);
    }
    settle(out.next_scene);
    const double after = max_grasp_reward(out.next_scene, pose, cfg);
    out.reward = std::clamp(after - before, 0.0, 1.0);
    return out;
}

PrimitiveOutcome execute(const SceneState& scene, const PlanarPose& pose, int primitive, Rng& rng,
                         const SimConfig& cfg)
{
    if (is_grasp(primitive))
    {
        return exec_grasp(scene, pose, cfg.grasp(primitive), rng, cfg);
    }
    return exec_shift(scene, pose, cfg.shift(primitive), rng, cfg);
}

bool primitive_fits(const BinGeometry& bin, const PlanarPose& pose, int primitive, const SimConfig& cfg)
{
    const AxisBox box = bin.interior();
    const Vec2 center{pose.x, pose.y};
    if (is_grasp(primitive))
    {
        const GraspPrimitive prim = cfg.grasp(primitive);
        const Vec2 u = unit_from_angle(pose.a);
        const double half_t = 0.5 * prim.finger_thickness;
        const double half_l = 0.5 * prim.finger_length;
        const double off = 0.5 * prim.width + half_t;
        return inside(OrientedRect{center + u * off, pose.a, half_t, half_l}, box, 1e-9) &&
               inside(OrientedRect{center - u * off, pose.a, half_t, half_l}, box, 1e-9);
    }
    const ShiftPrimitive prim = cfg.shift(primitive);
    const Vec2 dir = rotate(prim.direction, pose.a);
    return inside(OrientedRect{center, std::atan2(dir.y, dir.x), prim.finger_thickness, 0.5 * prim.finger_length},
                  box, 1e-9);
}

bool object_graspable(const SceneState& scene, size_t object_index, const SimConfig& cfg)
{
    const Cuboid& c = scene.objects.at(object_index);
    std::vector<double> angles{c.yaw, c.yaw + 0.5 * std::numbers::pi};
    for (int k = 0; k < cfg.check_rotations; ++k)
    {
        angles.push_back(k * std::numbers::pi / cfg.check_rotations);
    }
    for (double a : angles)
    {
        const PlanarPose pose(c.x, c.y, a);
        for (int p = 0; p < kNumGraspPrimitives; ++p)
        {
            if (check_grasp(scene, pose, cfg.grasp(p), cfg).success)
            {
                return true;
            }
        }
    }
    return false;
}

double max_grasp_reward(const SceneState& scene, const PlanarPose& pose, const SimConfig& cfg)
{
    const double half = 0.5 * cfg.neighborhood_px * scene.bin.resolution;
    const OrientedRect window{{pose.x, pose.y}, pose.a, half, half};
    for (size_t i = 0; i < scene.objects.size(); ++i)
    {
        const Cuboid& c = scene.objects[i];
        if (window.contains({c.x, c.y}) && object_graspable(scene, i, cfg))
        {
            return 1.0;
        }
    }
    return 0.0;
}

ScenarioKind scenario_kind_from_string(const std::string& s)
{
    if (s == "bbt") return ScenarioKind::bbt;
    if (s == "row3") return ScenarioKind::row3;
    if (s == "mixed") return ScenarioKind::mixed;
    throw Error(ErrorCode::ParseError, "unknown scenario kind '" + s + "'");
}

std::string to_string(ScenarioKind kind)
{
    switch (kind)
    {
        case ScenarioKind::bbt: return "bbt";
        case ScenarioKind::row3: return "row3";
        case ScenarioKind::mixed: return "mixed";
    }
    return "bbt";
}

namespace
{

constexpr int kMaxAttempts = 10000;

double uniform(Rng& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

bool place_on_floor(SceneState& scene, Cuboid c, Rng& rng, int& attempts)
{
    const AxisBox box = scene.bin.interior();
    const double r = 0.5 * std::hypot(c.lx, c.ly);
    while (attempts < kMaxAttempts)
    {
        ++attempts;
        c.x = uniform(rng, box.x0 + r, box.x1 - r);
        c.y = uniform(rng, box.y0 + r, box.y1 - r);
        c.yaw = uniform(rng, 0.0, 0.5 * std::numbers::pi);
        c.z = 0.0;
        const OrientedRect clear = c.footprint().inflated(0.0005);
        const bool free = std::none_of(scene.objects.begin(), scene.objects.end(), [&](const Cuboid& o) {
            return o.z < c.lz && overlaps(clear, o.footprint());
        });
        if (free)
        {
            scene.objects.push_back(c);
            return true;
        }
    }
    return false;
}

bool place_on_top(SceneState& scene, Cuboid c, Rng& rng, int& attempts)
{
    const AxisBox box = scene.bin.interior();
    std::vector<size_t> bases;
    for (size_t i = 0; i < scene.objects.size(); ++i)
    {
        if (scene.objects[i].z == 0.0)
        {
            bases.push_back(i);
        }
    }
    if (bases.empty())
    {
        return false;
    }
    while (attempts < kMaxAttempts)
    {
        ++attempts;
        const Cuboid& base = scene.objects[bases[std::uniform_int_distribution<size_t>(0, bases.size() - 1)(rng)]];
        c.x = base.x + uniform(rng, -0.004, 0.004);
        c.y = base.y + uniform(rng, -0.004, 0.004);
        c.yaw = base.yaw + uniform(rng, -0.2, 0.2);
        c.z = base.top();
        if (c.top() > scene.bin.max_stack_height + 1e-12 || !inside(c.footprint(), box, 0.0))
        {
            continue;
        }
        const bool free = std::none_of(scene.objects.begin(), scene.objects.end(), [&](const Cuboid& o) {
            return o.top() > c.z + 1e-9 && overlaps(c.footprint().inflated(0.0005), o.footprint());
        });
        if (free)
        {
            scene.objects.push_back(c);
            settle(scene);
            return true;
        }
    }
    return false;
}

SceneState spawn_row3(const ScenarioSpec& spec, Rng& rng)
{
    SceneState scene;
    scene.bin = spec.bin;
    const AxisBox box = spec.bin.interior();
    const double s = spec.row3_cube_size;
    const int wall = std::uniform_int_distribution<int>(0, 3)(rng);
    const double wall_gap = uniform(rng, 0.0025, 0.0035);
    const std::array<double, 2> gaps{uniform(rng, 0.0025, 0.0035), uniform(rng, 0.0025, 0.0035)};
    const double row_len = 3.0 * s + gaps[0] + gaps[1];
    const bool horizontal = wall < 2;  // walls 0/1 run along x (y = min / max)
    const double span_lo = (horizontal ? box.x0 : box.y0) + 0.06;
    const double span_hi = (horizontal ? box.x1 : box.y1) - 0.06 - row_len;
    const double start = uniform(rng, span_lo, span_hi);
    double normal_coord = 0.0;
    switch (wall)
    {
        case 0: normal_coord = box.y0 + wall_gap + 0.5 * s; break;
        case 1: normal_coord = box.y1 - wall_gap - 0.5 * s; break;
        case 2: normal_coord = box.x0 + wall_gap + 0.5 * s; break;
        default: normal_coord = box.x1 - wall_gap - 0.5 * s; break;
    }
    double along = start + 0.5 * s;
    for (int k = 0; k < 3; ++k)
    {
        Cuboid c;
        c.id = k;
        c.lx = c.ly = c.lz = s;
        c.x = horizontal ? along : normal_coord;
        c.y = horizontal ? normal_coord : along;
        scene.objects.push_back(c);
        if (k < 2)
        {
            along += s + gaps[static_cast<size_t>(k)];
        }
    }
    return scene;
}

}  // namespace

SceneState spawn_scenario(const ScenarioSpec& spec, Rng& rng)
{
    if (spec.count < 0)
    {
        throw Error(ErrorCode::InvalidArgument, "object count must be non-negative");
    }
    if (spec.kind == ScenarioKind::row3)
    {
        SceneState scene = spawn_row3(spec, rng);
        scene.check_invariants();
        return scene;
    }

    SceneState scene;
    scene.bin = spec.bin;
    int attempts = 0;
    const int stacked =
        spec.kind == ScenarioKind::bbt ? static_cast<int>(std::lround(spec.count * spec.stack_fraction)) : 0;
    for (int k = 0; k < spec.count; ++k)
    {
        Cuboid c;
        c.id = k;
        if (spec.kind == ScenarioKind::bbt)
        {
            c.lx = c.ly = c.lz = spec.cube_size;
        }
        else
        {
            c.lx = uniform(rng, 0.015, 0.05);
            c.ly = uniform(rng, 0.015, 0.05);
            c.lz = uniform(rng, 0.01, 0.05);
        }
        const bool ok = k < spec.count - stacked ? place_on_floor(scene, c, rng, attempts)
                                                 : place_on_top(scene, c, rng, attempts);
        if (!ok)
        {
            throw Error(ErrorCode::PackingFailure, "could not place all objects within the attempt budget");
        }
    }
    scene.check_invariants();
    return scene;
}

DepthImage measure(const SceneState& scene, const NoiseConfig& noise, Rng& rng)
{
    DepthImage img = render_depth(scene);
    if (noise.sigma <= 0.0 && noise.dropout <= 0.0)
    {
        return img;
    }
    auto data = img.data();
    auto valid = img.valid_mask();
    std::normal_distribution<double> normal(0.0, noise.sigma > 0.0 ? noise.sigma : 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (size_t i = 0; i < data.size(); ++i)
    {
        if (noise.sigma > 0.0)
        {
            data[i] = std::max(0.0, data[i] + normal(rng));
        }
        if (noise.dropout > 0.0 && unit(rng) < noise.dropout)
        {
            data[i] = 0.0;
            valid[i] = 0;
        }
    }
    return img;
}

void to_json(nlohmann::json& j, const Cuboid& c)
{
    j = {{"id", c.id}, {"x", c.x}, {"y", c.y}, {"yaw", c.yaw}, {"lx", c.lx},
         {"ly", c.ly}, {"lz", c.lz}, {"z", c.z}};
}

void from_json(const nlohmann::json& j, Cuboid& c)
{
    c.id = j.at("id").get<int>();
    c.x = j.at("x").get<double>();
    c.y = j.at("y").get<double>();
    c.yaw = j.value("yaw", 0.0);
    c.lx = j.at("lx").get<double>();
    c.ly = j.at("ly").get<double>();
    c.lz = j.at("lz").get<double>();
    c.z = j.value("z", 0.0);
}

void to_json(nlohmann::json& j, const BinGeometry& b)
{
    j = {{"inner_width_m", b.inner_width}, {"inner_depth_m", b.inner_depth},
         {"wall_thickness_m", b.wall_thickness}, {"wall_height_m", b.wall_height},
         {"resolution_m", b.resolution}, {"max_stack_height_m", b.max_stack_height}};
}

void from_json(const nlohmann::json& j, BinGeometry& b)
{
    const BinGeometry d;
    b.inner_width = j.value("inner_width_m", d.inner_width);
    b.inner_depth = j.value("inner_depth_m", d.inner_depth);
    b.wall_thickness = j.value("wall_thickness_m", d.wall_thickness);
    b.wall_height = j.value("wall_height_m", d.wall_height);
    b.resolution = j.value("resolution_m", d.resolution);
    b.max_stack_height = j.value("max_stack_height_m", d.max_stack_height);
}

void to_json(nlohmann::json& j, const SceneState& s)
{
    j = {{"bin", s.bin}, {"objects", s.objects}, {"seed", s.rng_seed}};
}

void from_json(const nlohmann::json& j, SceneState& s)
{
    s.bin = j.value("bin", BinGeometry{});
    s.objects = j.at("objects").get<std::vector<Cuboid>>();
    s.rng_seed = j.value("seed", uint64_t{0});
}

}  // namespace foresight
