#include "foresight/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "foresight/errors.hpp"

namespace foresight
{

Objective objective_from_string(const std::string& s)
{
    if (s == "single_reward") return Objective::single_reward;
    if (s == "expected_object_count") return Objective::expected_object_count;
    if (s == "min_steps_to_empty") return Objective::min_steps_to_empty;
    throw Error(ErrorCode::ParseError, "unknown objective '" + s + "'");
}

std::string to_string(Objective o)
{
    switch (o)
    {
        case Objective::single_reward: return "single_reward";
        case Objective::expected_object_count: return "expected_object_count";
        case Objective::min_steps_to_empty: return "min_steps_to_empty";
    }
    return "single_reward";
}

AxisBox action_region(const BinGeometry& bin, const PolicyConfig& cfg)
{
    const AxisBox box = bin.interior();
    const double m = std::clamp(cfg.action_margin, 0.0, 0.5 * std::min(box.x1 - box.x0, box.y1 - box.y0));
    return {box.x0 + m, box.y0 + m, box.x1 - m, box.y1 - m};
}

double descent_height_from_image(const DepthImage& image, const PlanarPose& pose, int primitive,
                                 const SimConfig& gripper)
{
    OrientedRect region;
    if (is_grasp(primitive))
    {
        region = {{pose.x, pose.y}, pose.a, 0.5 * gripper.grasp(primitive).width, 0.5 * gripper.finger_length};
    }
    else
    {
        region = {{pose.x, pose.y}, pose.a, gripper.finger_thickness, 0.5 * gripper.finger_length};
    }
    const ImageGeometry& g = image.geometry();
    const auto [x0, x1] = region.project({1.0, 0.0});
    const auto [y0, y1] = region.project({0.0, 1.0});
    const int c0 = std::max(0, static_cast<int>(std::floor(g.to_pixel_x(x0))));
    const int c1 = std::min(g.width_px - 1, static_cast<int>(std::ceil(g.to_pixel_x(x1))));
    const int r0 = std::max(0, static_cast<int>(std::floor(g.to_pixel_y(y0))));
    const int r1 = std::min(g.height_px - 1, static_cast<int>(std::ceil(g.to_pixel_y(y1))));
    double top = 0.0;
    for (int r = r0; r <= r1; ++r)
    {
        for (int c = c0; c <= c1; ++c)
        {
            if (image.valid(c, r) && region.contains({g.to_meter_x(c), g.to_meter_y(r)}))
            {
                top = std::max(top, image.at(c, r));
            }
        }
    }
    return std::max(gripper.min_descent, top - gripper.descent_offset);
}

Action select_action(const CellMap& lb_map, const DepthImage& image, const PolicyConfig&, const SimConfig& gripper)
{
    const MapLayout& layout = *lb_map.layout;
    bool found = false;
    size_t best = 0;
    for (const RotationGrid& g : layout.grids)
    {
        const int channels = std::min(layout.channels, kNumPrimitives);
        const size_t end = g.offset + static_cast<size_t>(channels) * g.nx * g.ny;
        for (size_t i = g.offset; i < end; ++i)
        {
            if (lb_map.valid(i) && (!found || lb_map.values[i] > lb_map.values[best]))
            {
                best = i;
                found = true;
            }
        }
    }
    if (!found)
    {
        throw Error(ErrorCode::EmptyMap, "no valid action cell");
    }
    const MapCell c = layout.cell(best);
    Action a;
    a.index = best;
    a.p = c.p;
    a.pose = layout.pose(c.r, c.oy, c.ox);
    a.z = descent_height_from_image(image, a.pose, a.p, gripper);
    a.lb = lb_map.values[best];
    a.psi = a.lb;
    a.value = a.lb;
    return a;
}

bool decide_measure(double sigma_a, int t, const PolicyConfig& cfg)
{
    if (t <= 0)
    {
        return false;
    }
    if (cfg.sigma2_image <= 0.0)
    {
        return true;
    }
    return sigma_a * sigma_a > cfg.sigma2_image;
}

bool detect_empty(const CellMap& lb_map, const PolicyConfig& cfg)
{
    double best = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < lb_map.size(); ++i)
    {
        if (lb_map.valid(i) && lb_map.layout->cell(i).p < kNumGraspPrimitives)
        {
            best = std::max(best, lb_map.values[i]);
        }
    }
    return best < cfg.lb_empty;
}

double expected_object_value(double psi_grasp, double psi_multi, double sigma_a, double alpha)
{
    return (psi_grasp - alpha * sigma_a) * (1.0 + psi_multi);
}

ActionSearch::ActionSearch(const Models& models, const DepthImage& image, const UncertaintyImage& sigma2,
                           const PolicyConfig& cfg)
    : models_(models)
    , image_(image)
    , sigma2_(sigma2)
    , cfg_(cfg)
{
    psi_ = forward_full(models.reward, image, cfg.rotations, action_region(models.bin, cfg));
    zero_uncertainty_ = sigma2.all_zero();
}

double ActionSearch::sigma(size_t index)
{
    if (zero_uncertainty_)
    {
        return 0.0;
    }
    if (!eval_)
    {
        eval_ = std::make_unique<UncertaintyEvaluator>(models_.reward, image_, sigma2_, psi_.layout,
                                                       PropagationVariant::fcn);
    }
    return eval_->sigma(index);
}

size_t ActionSearch::multi_index(size_t index) const
{
    const MapCell c = psi_.layout->cell(index);
    return psi_.layout->index(c.r, kMultiObjectChannel, c.oy, c.ox);
}

double ActionSearch::upper_bound(size_t index) const
{
    const double psi = psi_.values[index];
    if (cfg_.objective == Objective::expected_object_count && psi_.layout->channels > kMultiObjectChannel &&
        psi_.layout->cell(index).p < kNumGraspPrimitives)
    {
        return psi * (1.0 + psi_.values[multi_index(index)]);
    }
    return psi;
}

double ActionSearch::value(size_t index)
{
    const double s = sigma(index);
    if (cfg_.objective == Objective::expected_object_count && psi_.layout->channels > kMultiObjectChannel &&
        psi_.layout->cell(index).p < kNumGraspPrimitives)
    {
        return expected_object_value(psi_.values[index], psi_.values[multi_index(index)], s, cfg_.alpha);
    }
    return psi_.values[index] - cfg_.alpha * s;
}

bool ActionSearch::fits(size_t index) const
{
    const MapCell c = psi_.layout->cell(index);
    return primitive_fits(models_.bin, psi_.layout->pose(c.r, c.oy, c.ox), c.p, models_.gripper);
}

const std::vector<size_t>& ActionSearch::order()
{
    if (!ordered_)
    {
        const MapLayout& layout = *psi_.layout;
        std::vector<double> ub(layout.size(), 0.0);
        for (const RotationGrid& g : layout.grids)
        {
            const int channels = std::min(layout.channels, kNumPrimitives);
            const size_t end = g.offset + static_cast<size_t>(channels) * g.nx * g.ny;
            for (size_t i = g.offset; i < end; ++i)
            {
                if (layout.valid[i] && (!cfg_.wall_check || fits(i)))
                {
                    order_.push_back(i);
                    ub[i] = upper_bound(i);
                }
            }
        }
        std::sort(order_.begin(), order_.end(), [&](size_t a, size_t b) {
            return ub[a] != ub[b] ? ub[a] > ub[b] : a < b;
        });
        ordered_ = true;
    }
    return order_;
}

Action ActionSearch::action_at(size_t index)
{
    const MapLayout& layout = *psi_.layout;
    const MapCell c = layout.cell(index);
    Action a;
    a.index = index;
    a.p = c.p;
    a.pose = layout.pose(c.r, c.oy, c.ox);
    a.z = descent_height_from_image(image_, a.pose, a.p, models_.gripper);
    a.psi = psi_.values[index];
    a.sigma = sigma(index);
    a.lb = a.psi - cfg_.alpha * a.sigma;
    a.multi = layout.channels > kMultiObjectChannel ? psi_.values[multi_index(index)] : 0.0;
    a.value = value(index);
    return a;
}

std::vector<Action> ActionSearch::top(int n)
{
    if (n <= 0)
    {
        throw Error(ErrorCode::InvalidArgument, "top needs n >= 1");
    }
    const std::vector<size_t>& cells = order();
    if (cells.empty())
    {
        throw Error(ErrorCode::EmptyMap, "no valid action cell");
    }
    std::vector<std::pair<double, size_t>> best;  // (value, index), best first
    const auto better = [](const std::pair<double, size_t>& a, const std::pair<double, size_t>& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    };
    if (cfg_.nms_radius <= 0.0)
    {
        for (size_t i : cells)
        {
            if (static_cast<int>(best.size()) == n && upper_bound(i) < best.back().first)
            {
                break;
            }
            const std::pair<double, size_t> cand{value(i), i};
            if (static_cast<int>(best.size()) < n || better(cand, best.back()))
            {
                best.insert(std::upper_bound(best.begin(), best.end(), cand, better), cand);
                if (static_cast<int>(best.size()) > n)
                {
                    best.pop_back();
                }
            }
        }
    }
    else
    {
        // Greedy suppression over everything evaluated so far. Unevaluated cells
        // rank below the n-th kept value, so they cannot change the kept set.
        const double r2 = cfg_.nms_radius * cfg_.nms_radius;
        const auto near = [&](size_t a, size_t b) {
            if (is_grasp(psi_.layout->cell(a).p) != is_grasp(psi_.layout->cell(b).p))
            {
                return false;
            }
            const MapCell ca = psi_.layout->cell(a);
            const MapCell cb = psi_.layout->cell(b);
            const PlanarPose pa = psi_.layout->pose(ca.r, ca.oy, ca.ox);
            const PlanarPose pb = psi_.layout->pose(cb.r, cb.oy, cb.ox);
            const double dx = pa.x - pb.x;
            const double dy = pa.y - pb.y;
            return dx * dx + dy * dy < r2;
        };
        std::vector<std::pair<double, size_t>> seen;
        const auto suppress = [&]() {
            best.clear();
            for (const auto& c : seen)
            {
                if (static_cast<int>(best.size()) == n)
                {
                    break;
                }
                if (std::none_of(best.begin(), best.end(), [&](const auto& b) { return near(b.second, c.second); }))
                {
                    best.push_back(c);
                }
            }
        };
        for (size_t i : cells)
        {
            if (static_cast<int>(best.size()) == n && upper_bound(i) < best.back().first)
            {
                break;
            }
            const std::pair<double, size_t> cand{value(i), i};
            seen.insert(std::upper_bound(seen.begin(), seen.end(), cand, better), cand);
            if (static_cast<int>(best.size()) < n || better(cand, best.back()))
            {
                suppress();
            }
        }
    }
    std::vector<Action> out;
    for (const auto& [v, i] : best)
    {
        out.push_back(action_at(i));
    }
    return out;
}

double ActionSearch::max_grasp_lb()
{
    const std::vector<size_t>& cells = order();
    // Upper bounds may include the multi-object factor, so scan by reward here.
    std::vector<size_t> grasp;
    for (size_t i : cells)
    {
        if (psi_.layout->cell(i).p < kNumGraspPrimitives)
        {
            grasp.push_back(i);
        }
    }
    if (cfg_.objective == Objective::expected_object_count)
    {
        std::sort(grasp.begin(), grasp.end(), [&](size_t a, size_t b) {
            return psi_.values[a] != psi_.values[b] ? psi_.values[a] > psi_.values[b] : a < b;
        });
    }
    double best = -std::numeric_limits<double>::infinity();
    for (size_t i : grasp)
    {
        if (psi_.values[i] < best)
        {
            break;
        }
        best = std::max(best, psi_.values[i] - cfg_.alpha * sigma(i));
    }
    return best;
}

RewardUncertaintyMap ActionSearch::sigma_map()
{
    RewardUncertaintyMap out{psi_.layout, std::vector<double>(psi_.size(), 0.0)};
    for (size_t i = 0; i < out.size(); ++i)
    {
        out.values[i] = sigma(i);
    }
    return out;
}

CellMap ActionSearch::value_map()
{
    CellMap out{psi_.layout, std::vector<double>(psi_.size(), 0.0)};
    for (size_t i = 0; i < out.size(); ++i)
    {
        out.values[i] = value(i);
    }
    return out;
}

namespace
{

double assumed_reward(const Action& a)
{
    return is_grasp(a.p) ? (a.psi > 0.5 ? 1.0 : 0.0) : a.psi;
}

struct SubPlan
{
    double value = 0.0;
    int empty_depth = -1;  // relative to the node the plan starts from
    std::vector<Action> path;
};

class Planner
{
public:
    Planner(const PolicyConfig& cfg, const Models& models, int depth, bool record)
        : cfg_(cfg)
        , models_(models)
        , depth_(depth)
        , record_(record)
    {}

    bool better(const SubPlan& a, const SubPlan& b) const
    {
        if (cfg_.objective == Objective::min_steps_to_empty)
        {
            const int da = a.empty_depth < 0 ? std::numeric_limits<int>::max() : a.empty_depth;
            const int db = b.empty_depth < 0 ? std::numeric_limits<int>::max() : b.empty_depth;
            if (da != db)
            {
                return da < db;
            }
        }
        return a.value > b.value;
    }

    // Best continuation from a node at `level` (root = 0).
    SubPlan expand(const DepthImage& image, const CumulativeUncertainty& unc, ActionSearch& search, int level,
                   uint64_t seed, int parent, const std::vector<Action>& prefix, double prefix_value)
    {
        std::vector<Action> cands = search.top(std::max(1, cfg_.top_n));
        std::vector<size_t> pick(cands.size());
        std::iota(pick.begin(), pick.end(), size_t{0});
        const size_t b = static_cast<size_t>(std::max(1, cfg_.branching));
        if (pick.size() > b)
        {
            Rng rng(derive_seed(seed, 0xB1));
            std::shuffle(pick.begin(), pick.end(), rng);
            pick.resize(b);
            std::sort(pick.begin(), pick.end());
        }

        SubPlan best;
        bool have = false;
        for (size_t k = 0; k < pick.size(); ++k)
        {
            const Action& a = cands[pick[k]];
            const uint64_t child_seed = derive_seed(seed, k + 1);
            SubPlan sub = evaluate_child(image, unc, level, child_seed, parent, prefix, prefix_value, a,
                                         assumed_reward(a));
            if (cfg_.branch_both_outcomes && is_grasp(a.p))
            {
                const double r_alt = 1.0 - assumed_reward(a);
                SubPlan alt = evaluate_child(image, unc, level, derive_seed(child_seed, 0xA17), parent, prefix,
                                             prefix_value, a, r_alt);
                const double p_success = std::clamp(a.psi, 0.0, 1.0);
                const SubPlan& succ = r_alt > 0.5 ? alt : sub;
                const SubPlan& fail = r_alt > 0.5 ? sub : alt;
                SubPlan mixed = succ;
                mixed.value = p_success * succ.value + (1.0 - p_success) * fail.value;
                sub = mixed;
            }
            if (!have || better(sub, best))
            {
                best = std::move(sub);
                have = true;
            }
        }
        return best;
    }

    SubPlan evaluate_child(const DepthImage& image, const CumulativeUncertainty& unc, int level, uint64_t seed,
                           int parent, const std::vector<Action>& prefix, double prefix_value, const Action& a,
                           double reward)
    {
        Rng rng(seed);
        ImagePrediction pred = predict_image(models_.transition, image, a.pose, a.p, reward, rng);
        const CumulativeUncertainty child_unc = accumulate(unc, pred.variance);
        ++nodes_;
        std::vector<Action> path = prefix;
        path.push_back(a);
        const double value = prefix_value + a.value;

        const bool leaf = level + 1 == depth_;
        std::optional<ActionSearch> child;
        if (!leaf || cfg_.objective == Objective::min_steps_to_empty)
        {
            child.emplace(models_, pred.image, child_unc.sigma2, cfg_);
        }
        const bool empty = cfg_.objective == Objective::min_steps_to_empty && child->empty();
        int self = -1;
        if (record_)
        {
            PlanNodeRecord rec;
            rec.depth = level + 1;
            rec.parent = parent;
            rec.path = path;
            rec.value = value;
            rec.predicted_empty = empty;
            rec.sigma2_sum = child_unc.sigma2.sum();
            rec.sigma2 = child_unc.sigma2;
            records_.push_back(std::move(rec));
            self = static_cast<int>(records_.size()) - 1;
        }

        SubPlan rest;
        if (!leaf)
        {
            rest = expand(pred.image, child_unc, *child, level + 1, seed, self, path, value);
        }
        SubPlan out;
        out.path.push_back(a);
        if (empty)
        {
            out.value = a.value;
            out.empty_depth = 1;
            return out;
        }
        out.value = a.value + rest.value;
        out.empty_depth = rest.empty_depth < 0 ? -1 : rest.empty_depth + 1;
        out.path.insert(out.path.end(), rest.path.begin(), rest.path.end());
        return out;
    }

    size_t nodes_ = 0;
    std::vector<PlanNodeRecord> records_;

private:
    const PolicyConfig& cfg_;
    const Models& models_;
    int depth_;
    bool record_;
};

}  // namespace

PlanResult plan_bfs(const DepthImage& root, const CumulativeUncertainty& root_unc, int depth,
                    const PolicyConfig& cfg, const Models& models, uint64_t seed, bool record)
{
    if (depth < 1)
    {
        throw Error(ErrorCode::DepthZero, "planning depth must be at least 1");
    }
    if (cfg.branching < 1 || cfg.top_n < 1)
    {
        throw Error(ErrorCode::InvalidArgument, "branching and top_n must be at least 1");
    }
    Planner planner(cfg, models, depth, record);
    ActionSearch search(models, root, root_unc.sigma2, cfg);
    SubPlan best = planner.expand(root, root_unc, search, 0, seed, -1, {}, 0.0);
    PlanResult out;
    out.path = std::move(best.path);
    out.value = best.value;
    out.empty_depth = best.empty_depth;
    out.nodes = planner.nodes_;
    out.records = std::move(planner.records_);
    return out;
}

nlohmann::json to_json(const Action& a)
{
    return {{"p", a.p},
            {"pose", {{"x", a.pose.x}, {"y", a.pose.y}, {"a", a.pose.a}}},
            {"z", a.z},
            {"psi", a.psi},
            {"sigma_a", a.sigma},
            {"lb", a.lb},
            {"multi", a.multi},
            {"value", a.value}};
}

void EpisodeLog::write_jsonl(std::ostream& out) const
{
    for (const StepRecord& s : steps)
    {
        nlohmann::json j = {{"step", s.step},
                            {"t", s.t},
                            {"p", s.action.p},
                            {"pose", {{"x", s.action.pose.x}, {"y", s.action.pose.y}, {"a", s.action.pose.a}}},
                            {"z", s.action.z},
                            {"psi", s.action.psi},
                            {"sigma_a", s.action.sigma},
                            {"lb", s.action.lb},
                            {"r_measured", s.r_measured},
                            {"grasped", s.grasped},
                            {"measured", s.measured},
                            {"planned", s.planned},
                            {"clock_s", s.clock},
                            {"seed", seed}};
        out << j.dump() << '\n';
    }
}

namespace
{

Action random_grasp(const MapLayout& layout, const DepthImage& image, const SimConfig& gripper, Rng& rng)
{
    std::vector<size_t> cells;
    for (size_t i = 0; i < layout.size(); ++i)
    {
        if (layout.valid[i] && layout.cell(i).p < kNumGraspPrimitives)
        {
            cells.push_back(i);
        }
    }
    if (cells.empty())
    {
        throw Error(ErrorCode::EmptyMap, "no valid grasp cell");
    }
    const size_t i = cells[std::uniform_int_distribution<size_t>(0, cells.size() - 1)(rng)];
    const MapCell c = layout.cell(i);
    Action a;
    a.index = i;
    a.p = c.p;
    a.pose = layout.pose(c.r, c.oy, c.ox);
    a.z = descent_height_from_image(image, a.pose, a.p, gripper);
    return a;
}

}  // namespace

EpisodeLog run_episode(const SceneState& initial, const PolicyConfig& cfg, const Models& models, uint64_t seed,
                       const EpisodeLimits& limits, const NoiseConfig& sensor)
{
    EpisodeLog log;
    log.seed = seed;
    Rng sim_rng(derive_seed(seed, 1));
    Rng sensor_rng(derive_seed(seed, 2));
    Rng pred_rng(derive_seed(seed, 3));
    Rng policy_rng(derive_seed(seed, 4));
    SceneState scene = initial;
    const ImageGeometry geom = scene.bin.image_geometry();

    const auto fits = [&](double extra) {
        return limits.time_limit <= 0.0 || log.clock + extra <= limits.time_limit + 1e-9;
    };

    DepthImage image;
    CumulativeUncertainty unc = reset_on_measure(geom);
    bool fresh = false;
    const auto take_image = [&]() {
        image = measure(scene, sensor, sensor_rng);
        unc = reset_on_measure(geom);
        log.clock += limits.t_image;
        ++log.measurements;
        fresh = true;
    };

    if (!fits(limits.t_image + limits.t_grasp))
    {
        return log;
    }
    take_image();

    std::shared_ptr<const MapLayout> random_layout;
    if (cfg.random_actions)
    {
        random_layout = layout_for(models.reward, geom, cfg.rotations, action_region(scene.bin, cfg));
    }

    std::vector<Action> pending;
    uint64_t plan_counter = 0;
    bool must_measure = false;

    while (true)
    {
        if (limits.stop_when_cleared && scene.objects.empty())
        {
            log.emptied = true;
            break;
        }
        if (log.actions() >= cfg.step_cap)
        {
            log.step_cap_exceeded = true;
            break;
        }
        Action action;
        bool planned = false;
        bool measured_now = false;

        if (cfg.random_actions)
        {
            if (scene.objects.empty())
            {
                log.emptied = true;
                break;
            }
            if (!fits(limits.t_image + limits.t_grasp))
            {
                break;
            }
            if (log.actions() > 0)
            {
                take_image();
            }
            measured_now = fresh;
            action = random_grasp(*random_layout, image, models.gripper, policy_rng);
        }
        else
        {
            if (!cfg.use_prediction && unc.t > 0)
            {
                must_measure = true;
            }
            if (must_measure && unc.t > 0)
            {
                if (!fits(limits.t_image + limits.t_grasp))
                {
                    break;
                }
                take_image();
                pending.clear();
            }
            must_measure = false;

            if (!pending.empty())
            {
                action = pending.front();
                pending.erase(pending.begin());
                planned = true;
                if (decide_measure(action.sigma, unc.t, cfg))
                {
                    must_measure = true;
                    pending.clear();
                    continue;
                }
            }
            else
            {
                ActionSearch search(models, image, unc.sigma2, cfg);
                if (search.empty())
                {
                    if (unc.t > 0)
                    {
                        must_measure = true;
                        continue;
                    }
                    log.emptied = true;
                    break;
                }
                if (cfg.depth > 1)
                {
                    PlanResult plan = plan_bfs(image, unc, cfg.depth, cfg, models, derive_seed(seed, 100 + plan_counter++));
                    pending = std::move(plan.path);
                    action = pending.front();
                    pending.erase(pending.begin());
                    planned = true;
                }
                else
                {
                    action = search.best();
                }
                const bool forced = cfg.force_measure_every > 0 && unc.t >= cfg.force_measure_every;
                if (unc.t > 0 && (!cfg.use_prediction || forced || decide_measure(action.sigma, unc.t, cfg)))
                {
                    must_measure = true;
                    pending.clear();
                    continue;
                }
            }
            measured_now = fresh;
        }

        if (!fits(limits.t_grasp))
        {
            break;
        }
        PrimitiveOutcome out = execute(scene, action.pose, action.p, sim_rng, models.gripper);
        log.clock += limits.t_grasp;
        fresh = false;

        StepRecord rec;
        rec.step = log.actions();
        rec.t = unc.t;
        rec.action = action;
        rec.r_measured = out.reward;
        rec.grasped = out.grasped_count;
        rec.measured = measured_now;
        rec.planned = planned;
        rec.clock = log.clock;
        log.steps.push_back(rec);
        if (is_grasp(action.p))
        {
            ++log.grasp_attempts;
            log.grasp_successes += out.reward > 0.5 ? 1 : 0;
            log.objects_picked += out.grasped_count;
        }
        scene = std::move(out.next_scene);

        if (cfg.random_actions)
        {
            continue;
        }
        // Gripper feedback gives the grasp outcome; shift rewards are not observable.
        const double r = is_grasp(action.p) ? out.reward : action.psi;
        const bool deviated = is_grasp(action.p) && (r > 0.5) != (assumed_reward(action) > 0.5);
        if (deviated && (planned || (cfg.measure_on_failure && r <= 0.5)))
        {
            pending.clear();
            must_measure = true;
        }
        ImagePrediction pred = predict_image(models.transition, image, action.pose, action.p, r, pred_rng);
        image = std::move(pred.image);
        unc = accumulate(unc, pred.variance);
        if (planned && pending.empty())
        {
            must_measure = true;
        }
    }
    return log;
}

}  // namespace foresight
