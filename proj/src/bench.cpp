#include "foresight/bench.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "foresight/errors.hpp"

namespace foresight
{

namespace
{

std::pair<double, double> mean_std(const std::vector<double>& v)
{
    if (v.empty())
    {
        return {0.0, 0.0};
    }
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() < 2)
    {
        return {mean, 0.0};
    }
    double ss = 0.0;
    for (double x : v)
    {
        ss += (x - mean) * (x - mean);
    }
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

std::vector<double> average_ranks(const std::vector<double>& v)
{
    std::vector<size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> rank(v.size());
    for (size_t i = 0; i < idx.size();)
    {
        size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]])
        {
            ++j;
        }
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (size_t k = i; k <= j; ++k)
        {
            rank[idx[k]] = r;
        }
        i = j + 1;
    }
    return rank;
}

void add_steps(std::vector<StepRate>& table, const EpisodeLog& log)
{
    for (const StepRecord& s : log.steps)
    {
        if (!is_grasp(s.action.p))
        {
            continue;
        }
        if (static_cast<int>(table.size()) <= s.t)
        {
            const int old = static_cast<int>(table.size());
            table.resize(static_cast<size_t>(s.t + 1));
            for (int t = old; t <= s.t; ++t)
            {
                table[static_cast<size_t>(t)].t = t;
            }
        }
        StepRate& row = table[static_cast<size_t>(s.t)];
        ++row.attempts;
        row.successes += s.r_measured > 0.5 ? 1 : 0;
        row.sigma2_mean += s.action.sigma * s.action.sigma;  // summed here, divided in finish_steps
    }
}

void finish_steps(std::vector<StepRate>& table)
{
    for (StepRate& row : table)
    {
        if (row.attempts > 0)
        {
            row.rate = static_cast<double>(row.successes) / row.attempts;
            row.sigma2_mean /= row.attempts;
        }
    }
}

SceneState bbt_scene(const BenchmarkConfig& cfg, uint64_t episode)
{
    Rng rng(derive_seed(cfg.seed, episode));
    ScenarioSpec spec;
    spec.kind = ScenarioKind::bbt;
    spec.count = cfg.cubes;
    return spawn_scenario(spec, rng);
}

EpisodeLimits limits_for(const BenchmarkConfig& cfg, double time_limit)
{
    EpisodeLimits lim;
    lim.t_grasp = cfg.t_grasp;
    lim.t_image = cfg.t_image;
    lim.time_limit = time_limit;
    return lim;
}

Row3Stats row3_stats(const std::vector<Row3Run>& runs)
{
    Row3Stats st;
    st.episodes = static_cast<int>(runs.size());
    std::vector<double> steps;
    double actions = 0.0;
    for (const Row3Run& r : runs)
    {
        actions += r.actions;
        if (r.emptied)
        {
            ++st.successes;
            steps.push_back(r.actions);
        }
    }
    std::tie(st.steps_mean, st.steps_std) = mean_std(steps);
    st.actions_mean = st.episodes > 0 ? actions / st.episodes : 0.0;
    st.success_rate = st.episodes > 0 ? static_cast<double>(st.successes) / st.episodes : 0.0;
    return st;
}

nlohmann::json steps_json(const std::vector<StepRate>& table)
{
    nlohmann::json rows = nlohmann::json::array();
    for (const StepRate& r : table)
    {
        rows.push_back({{"t", r.t},
                        {"attempts", r.attempts},
                        {"successes", r.successes},
                        {"rate", r.rate},
                        {"sigma2_mean", r.sigma2_mean}});
    }
    return rows;
}

nlohmann::json run_json(const Row3Run& r)
{
    nlohmann::json steps = nlohmann::json::array();
    for (const StepRecord& s : r.steps)
    {
        steps.push_back({{"action", to_json(s.action)}, {"r_measured", s.r_measured}, {"grasped", s.grasped}});
    }
    return {{"actions", r.actions},
            {"emptied", r.emptied},
            {"first_primitive", r.first_primitive},
            {"first_target", r.first_target},
            {"steps", steps}};
}

nlohmann::json stats_json(const Row3Stats& s)
{
    return {{"episodes", s.episodes},
            {"successes", s.successes},
            {"steps_mean", s.steps_mean},
            {"steps_std", s.steps_std},
            {"actions_mean", s.actions_mean},
            {"success_rate", s.success_rate}};
}

}  // namespace

double pph(double rate, double t, const BenchmarkConfig& cfg)
{
    if (!(t >= 1.0))
    {
        throw Error(ErrorCode::NonPositiveStep, "prediction step must be at least 1");
    }
    if (!(rate >= 0.0 && rate <= 1.0))
    {
        throw Error(ErrorCode::InvalidArgument, "rate must lie in [0, 1]");
    }
    return 3600.0 * rate / (cfg.t_grasp + cfg.t_image / t);
}

double optimal_step(const QuadFit& fit, const BenchmarkConfig& cfg, double t_max)
{
    if (!(t_max > 1.0))
    {
        throw Error(ErrorCode::InvalidArgument, "t_max must exceed 1");
    }
    // The fitted rate leaves [0, 1] far from the data; clamp it there.
    const auto f = [&](double t) { return pph(std::clamp(fit(t), 0.0, 1.0), t, cfg); };

    const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = 1.0;
    double b = t_max;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > 1e-9)
    {
        if (fc >= fd)
        {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        }
        else
        {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    double golden = 0.5 * (a + b);
    for (double edge : {1.0, t_max})
    {
        if (f(edge) > f(golden))
        {
            golden = edge;
        }
    }

    const long n = std::lround((t_max - 1.0) / 0.001);
    double grid = 1.0;
    double grid_best = f(1.0);
    for (long i = 1; i <= n; ++i)
    {
        const double t = std::min(t_max, 1.0 + 0.001 * static_cast<double>(i));
        const double v = f(t);
        if (v > grid_best)
        {
            grid_best = v;
            grid = t;
        }
    }
    return f(golden) >= grid_best ? golden : grid;
}

QuadFit fit_quadratic(const std::vector<std::pair<double, double>>& points)
{
    std::vector<double> ts;
    for (const auto& [t, r] : points)
    {
        if (!std::isfinite(t) || !std::isfinite(r))
        {
            throw Error(ErrorCode::InvalidArgument, "non-finite point");
        }
        ts.push_back(t);
    }
    std::sort(ts.begin(), ts.end());
    if (std::unique(ts.begin(), ts.end()) - ts.begin() < 3)
    {
        throw Error(ErrorCode::RankDeficient, "a quadratic needs at least 3 distinct t values");
    }
    Eigen::MatrixXd a(static_cast<Eigen::Index>(points.size()), 3);
    Eigen::VectorXd y(static_cast<Eigen::Index>(points.size()));
    for (size_t i = 0; i < points.size(); ++i)
    {
        const auto row = static_cast<Eigen::Index>(i);
        const double t = points[i].first;
        a(row, 0) = t * t;
        a(row, 1) = t;
        a(row, 2) = 1.0;
        y(row) = points[i].second;
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < 3)
    {
        throw Error(ErrorCode::RankDeficient, "Vandermonde system is rank deficient");
    }
    const Eigen::Vector3d c = qr.solve(y);
    QuadFit fit{c(0), c(1), c(2), 0.0};
    fit.residual = (a * c - y).squaredNorm();
    return fit;
}

SpearmanResult spearman(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size())
    {
        throw Error(ErrorCode::ShapeMismatch, "spearman needs equal-length samples");
    }
    SpearmanResult out;
    out.n = x.size();
    if (out.n < 3)
    {
        return out;
    }
    const std::vector<double> rx = average_ranks(x);
    const std::vector<double> ry = average_ranks(y);
    const double mean = 0.5 * static_cast<double>(out.n + 1);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (size_t i = 0; i < out.n; ++i)
    {
        sxy += (rx[i] - mean) * (ry[i] - mean);
        sxx += (rx[i] - mean) * (rx[i] - mean);
        syy += (ry[i] - mean) * (ry[i] - mean);
    }
    if (sxx == 0.0 || syy == 0.0)
    {
        return out;
    }
    out.rho = sxy / std::sqrt(sxx * syy);
    const double df = static_cast<double>(out.n - 2);
    if (std::abs(out.rho) >= 1.0)
    {
        out.p_value = 0.0;
        return out;
    }
    const double t = out.rho * std::sqrt(df / (1.0 - out.rho * out.rho));
    out.p_value = 2.0 * boost::math::cdf(boost::math::students_t(df), -std::abs(t));
    return out;
}

const ConditionResult& BenchReport::at(const std::string& name) const
{
    for (const ConditionResult& c : conditions)
    {
        if (c.name == name)
        {
            return c;
        }
    }
    throw Error(ErrorCode::InvalidArgument, "no condition named " + name);
}

BenchReport bench_bbt(const BenchmarkConfig& cfg, const PolicyConfig& policy, const Models& models)
{
    if (cfg.episodes < 1 || cfg.time_limit <= 0.0)
    {
        throw Error(ErrorCode::InvalidArgument, "bbt needs episodes and a time limit");
    }
    struct Condition
    {
        const char* name;
        Objective objective;
        bool prediction;
        bool random;
    };
    const Condition conditions[] = {
        {"single", Objective::single_reward, false, false},
        {"single_prediction", Objective::single_reward, true, false},
        {"multiple", Objective::expected_object_count, false, false},
        {"multiple_prediction", Objective::expected_object_count, true, false},
        {"random", Objective::single_reward, false, true},
    };
    BenchReport report;
    report.seed = cfg.seed;
    report.config = cfg;
    const EpisodeLimits limits = limits_for(cfg, cfg.time_limit);
    for (const Condition& cond : conditions)
    {
        PolicyConfig pc = policy;
        pc.objective = cond.objective;
        pc.use_prediction = cond.prediction;
        pc.random_actions = cond.random;
        pc.depth = 1;

        ConditionResult res;
        res.name = cond.name;
        res.episodes = cfg.episodes;
        std::vector<double> rates;
        std::vector<double> objects;
        std::vector<double> pphs;
        std::vector<double> images;
        for (int k = 0; k < cfg.episodes; ++k)
        {
            const auto episode = static_cast<uint64_t>(k);
            EpisodeLog log = run_episode(bbt_scene(cfg, episode), pc, models, derive_seed(cfg.seed, 1000 + episode),
                                         limits, cfg.sensor);
            rates.push_back(log.grasp_rate());
            objects.push_back(log.objects_picked);
            pphs.push_back(3600.0 * log.objects_picked / cfg.time_limit);
            images.push_back(log.measurements);
            res.measurements += log.measurements;
            res.actions += log.actions();
            add_steps(res.per_step, log);
            res.logs.push_back(std::move(log));
        }
        finish_steps(res.per_step);
        std::tie(res.grasp_rate_mean, res.grasp_rate_std) = mean_std(rates);
        std::tie(res.objects_mean, res.objects_std) = mean_std(objects);
        std::tie(res.pph_mean, res.pph_std) = mean_std(pphs);
        res.images_mean = mean_std(images).first;
        report.conditions.push_back(std::move(res));
    }
    return report;
}

StepCurve bench_step_curve(const BenchmarkConfig& cfg, const PolicyConfig& policy, const Models& models, int t_max)
{
    if (cfg.episodes < 1 || t_max < 2)
    {
        throw Error(ErrorCode::InvalidArgument, "step curve needs episodes and t_max >= 2");
    }
    PolicyConfig pc = policy;
    pc.use_prediction = true;
    pc.random_actions = false;
    pc.depth = 1;
    pc.sigma2_image = std::numeric_limits<double>::infinity();
    pc.force_measure_every = 0;
    pc.measure_on_failure = false;
    pc.step_cap = t_max + 1;
    const EpisodeLimits limits = limits_for(cfg, 0.0);

    StepCurve curve;
    curve.seed = cfg.seed;
    curve.episodes = cfg.episodes;
    std::vector<double> ts;
    std::vector<double> successes;
    for (int k = 0; k < cfg.episodes; ++k)
    {
        const auto episode = static_cast<uint64_t>(k);
        const EpisodeLog log =
            run_episode(bbt_scene(cfg, episode), pc, models, derive_seed(cfg.seed, 2000 + episode), limits, cfg.sensor);
        add_steps(curve.rows, log);
        for (const StepRecord& s : log.steps)
        {
            if (is_grasp(s.action.p))
            {
                ts.push_back(s.t);
                successes.push_back(s.r_measured > 0.5 ? 1.0 : 0.0);
            }
        }
    }
    finish_steps(curve.rows);
    curve.success_vs_t = spearman(ts, successes);
    std::vector<std::pair<double, double>> points;
    for (const StepRate& r : curve.rows)
    {
        if (r.attempts > 0)
        {
            points.emplace_back(r.t, r.rate);
        }
    }
    if (points.size() >= 3)
    {
        curve.fit = fit_quadratic(points);
        curve.t_opt = optimal_step(curve.fit, cfg, std::max(2.0, points.back().first));
    }
    return curve;
}

Row3Run run_row3(const SceneState& scene, const PolicyConfig& policy, const Models& models, uint64_t seed,
                 const NoiseConfig& sensor, int step_cap)
{
    PolicyConfig pc = policy;
    pc.step_cap = step_cap;
    EpisodeLimits limits{0.0, 0.0, 0.0, true};
    EpisodeLog log = run_episode(scene, pc, models, seed, limits, sensor);
    Row3Run run;
    run.actions = log.actions();
    run.emptied = log.emptied;
    if (!log.steps.empty())
    {
        const Action& a = log.steps.front().action;
        run.first_primitive = a.p;
        double best = std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < scene.objects.size(); ++i)
        {
            const double d = std::hypot(scene.objects[i].x - a.pose.x, scene.objects[i].y - a.pose.y);
            if (d < best)
            {
                best = d;
                run.first_target = static_cast<int>(i);
            }
        }
    }
    run.steps = std::move(log.steps);
    return run;
}

Row3Report bench_plan_row3(const BenchmarkConfig& cfg, const Row3Config& row3, const PolicyConfig& policy,
                           const Models& models)
{
    if (row3.episodes < 0 || row3.depth < 2 || row3.step_cap < 1)
    {
        throw Error(ErrorCode::InvalidArgument, "row3 needs depth >= 2 and a positive step cap");
    }
    PolicyConfig planned = policy;
    planned.objective = Objective::min_steps_to_empty;
    planned.depth = row3.depth;
    planned.branching = row3.branching;
    planned.top_n = row3.top_n;
    planned.rotations = row3.rotations;
    planned.random_actions = false;
    PolicyConfig greedy = planned;
    greedy.depth = 1;

    ScenarioSpec spec;
    spec.kind = ScenarioKind::row3;
    spec.count = 3;

    Row3Report report;
    report.seed = cfg.seed;
    {
        Models exact = models;
        exact.gripper = models.gripper.noiseless();
        exact.transition = models.transition.noiseless();
        Rng rng(row3.layout_seed);
        const SceneState scene = spawn_scenario(spec, rng);
        report.planned_deterministic = run_row3(scene, planned, exact, row3.layout_seed, NoiseConfig{}, row3.step_cap);
        report.greedy_deterministic = run_row3(scene, greedy, exact, row3.layout_seed, NoiseConfig{}, row3.step_cap);
    }
    std::vector<Row3Run> planned_runs;
    std::vector<Row3Run> greedy_runs;
    for (int k = 0; k < row3.episodes; ++k)
    {
        const auto episode = static_cast<uint64_t>(k);
        Rng rng(derive_seed(cfg.seed, 3000 + episode));
        const SceneState scene = spawn_scenario(spec, rng);
        const uint64_t seed = derive_seed(cfg.seed, 4000 + episode);
        planned_runs.push_back(run_row3(scene, planned, models, seed, cfg.sensor, row3.step_cap));
        greedy_runs.push_back(run_row3(scene, greedy, models, seed, cfg.sensor, row3.step_cap));
    }
    report.planned = row3_stats(planned_runs);
    report.greedy = row3_stats(greedy_runs);
    return report;
}

nlohmann::json to_json(const QuadFit& f)
{
    return {{"c2", f.c2}, {"c1", f.c1}, {"c0", f.c0}, {"residual", f.residual}};
}

nlohmann::json to_json(const BenchReport& r)
{
    nlohmann::json conds = nlohmann::json::array();
    for (const ConditionResult& c : r.conditions)
    {
        conds.push_back({{"name", c.name},
                         {"episodes", c.episodes},
                         {"grasp_rate", {{"mean", c.grasp_rate_mean}, {"std", c.grasp_rate_std}}},
                         {"objects", {{"mean", c.objects_mean}, {"std", c.objects_std}}},
                         {"pph", {{"mean", c.pph_mean}, {"std", c.pph_std}}},
                         {"images_per_episode", c.images_mean},
                         {"measurements", c.measurements},
                         {"actions", c.actions},
                         {"per_step", steps_json(c.per_step)}});
    }
    return {{"benchmark", "bbt"},
            {"seed", r.seed},
            {"config",
             {{"t_grasp", r.config.t_grasp},
              {"t_image", r.config.t_image},
              {"episodes", r.config.episodes},
              {"time_limit", r.config.time_limit},
              {"cubes", r.config.cubes},
              {"sensor_sigma", r.config.sensor.sigma}}},
            {"conditions", conds}};
}

nlohmann::json to_json(const StepCurve& c)
{
    return {{"benchmark", "steps"},
            {"seed", c.seed},
            {"episodes", c.episodes},
            {"rows", steps_json(c.rows)},
            {"spearman", {{"rho", c.success_vs_t.rho}, {"p_value", c.success_vs_t.p_value}, {"n", c.success_vs_t.n}}},
            {"fit", to_json(c.fit)},
            {"t_opt", c.t_opt}};
}

nlohmann::json to_json(const Row3Report& r)
{
    return {{"benchmark", "row3"},
            {"seed", r.seed},
            {"deterministic", {{"planned", run_json(r.planned_deterministic)}, {"greedy", run_json(r.greedy_deterministic)}}},
            {"planned", stats_json(r.planned)},
            {"greedy", stats_json(r.greedy)}};
}

}  // namespace foresight
