#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "foresight/bench.hpp"
#include "foresight/config.hpp"
#include "foresight/report_io.hpp"
#include "test_support.hpp"

using namespace foresight;

namespace
{

const QuadFit kPaperFit{-0.00354, -0.0228, 0.987, 0.0};

// Dense grid at 1e-4 on [1, t_max], independent of the library search.
double grid_argmax(const QuadFit& f, const BenchmarkConfig& cfg, double t_max)
{
    double best_t = 1.0, best = -1.0;
    for (double t = 1.0; t <= t_max + 1e-12; t += 1e-4)
    {
        const double rate = std::clamp(f(t), 0.0, 1.0);
        const double v = 3600.0 * rate / (cfg.t_grasp + cfg.t_image / t);
        if (v > best)
        {
            best = v;
            best_t = t;
        }
    }
    return best_t;
}

}  // namespace

TEST_SUITE("bench")
{
    TEST_CASE("picks per hour")
    {
        const BenchmarkConfig cfg;
        CHECK(kPaperFit(1.0) == doctest::Approx(0.96066));
        CHECK(std::abs(pph(0.96066, 1.0, cfg) - 384.0) < 1.0);
        CHECK(pph(0.0, 3.0, cfg) == 0.0);
        CHECK(pph(0.9, 1e9, cfg) == doctest::Approx(3600.0 * 0.9 / 6.5));
        try
        {
            (void)pph(0.9, 0.5, cfg);
            FAIL("no throw");
        }
        catch (const Error& e)
        {
            CHECK(e.code() == ErrorCode::NonPositiveStep);
        }
        CHECK_THROWS_AS(pph(1.2, 2.0, cfg), Error);
    }

    TEST_CASE("optimal step for the published regression")
    {
        // The stated optimum of 3.2 is not the maximizer of the stated
        // expression; the expression peaks at 2.690.
        const BenchmarkConfig cfg;
        const double t = optimal_step(kPaperFit, cfg);
        CHECK(std::abs(t - 2.6903) < 1e-3);
        CHECK(std::abs(t - grid_argmax(kPaperFit, cfg, 100.0)) < 2e-3);
    }

    TEST_CASE("optimal step limits")
    {
        BenchmarkConfig free_images;
        free_images.t_image = 0.0;
        CHECK(optimal_step(kPaperFit, free_images) == doctest::Approx(1.0));
        const QuadFit flat{0.0, 0.0, 0.9, 0.0};
        CHECK(optimal_step(flat, BenchmarkConfig{}, 10.0) == doctest::Approx(10.0).epsilon(1e-6));
        CHECK(optimal_step(flat, BenchmarkConfig{}, 100.0) == doctest::Approx(100.0).epsilon(1e-6));
    }

    TEST_CASE("quadratic fit: interpolation, recovery, degenerate design")
    {
        const QuadFit exact = fit_quadratic({{0.0, 1.0}, {1.0, 2.0}, {2.0, 5.0}});
        CHECK(exact.c2 == doctest::Approx(1.0));
        CHECK(exact.c1 == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(exact.c0 == doctest::Approx(1.0));
        CHECK(exact.residual < 1e-20);

        std::vector<std::pair<double, double>> pts;
        for (int t = 0; t <= 10; ++t)
        {
            pts.emplace_back(t, kPaperFit(t));
        }
        const QuadFit f = fit_quadratic(pts);
        CHECK(std::abs(f.c2 - kPaperFit.c2) < 1e-10);
        CHECK(std::abs(f.c1 - kPaperFit.c1) < 1e-10);
        CHECK(std::abs(f.c0 - kPaperFit.c0) < 1e-10);

        try
        {
            (void)fit_quadratic({{2.0, 0.5}, {2.0, 0.7}, {2.0, 0.6}, {3.0, 0.1}});
            FAIL("no throw");
        }
        catch (const Error& e)
        {
            CHECK(e.code() == ErrorCode::RankDeficient);
        }
    }

    TEST_CASE("Spearman correlation against hand-computed values")
    {
        // Perfect monotone relation.
        const SpearmanResult up = spearman({1, 2, 3, 4, 5}, {2, 4, 6, 8, 100});
        CHECK(up.rho == doctest::Approx(1.0));
        CHECK(up.p_value < 1e-6);
        // Ties: ranks x = 1,2,3,4,5; y = 1.5,1.5,3,4.5,4.5 -> rho = 0.9486832980505138.
        const SpearmanResult tied = spearman({1, 2, 3, 4, 5}, {0, 0, 1, 2, 2});
        CHECK(tied.rho == doctest::Approx(0.9486832980505138).epsilon(1e-12));
        // t = rho * sqrt(3 / (1 - rho^2)) = 5.196..., two-sided p with 3 dof.
        CHECK(tied.p_value == doctest::Approx(0.013846).epsilon(1e-3));
        const SpearmanResult flat = spearman({1, 2, 3}, {1, 1, 1});
        CHECK(flat.rho == 0.0);
        CHECK(flat.p_value == 1.0);
        CHECK_THROWS_AS(spearman({1, 2}, {1, 2, 3}), Error);
    }

    TEST_CASE("step table CSV roundtrip is exact")
    {
        std::vector<StepRate> rows;
        for (int t = 0; t < 5; ++t)
        {
            rows.push_back({t, 10 + t, 7, 7.0 / (10 + t), 1.0 / 3.0 * 1e-4 * t});
        }
        std::ostringstream out;
        write_step_csv(out, rows);
        std::istringstream in(out.str());
        const auto back = read_step_csv(in);
        REQUIRE(back.size() == rows.size());
        for (size_t i = 0; i < rows.size(); ++i)
        {
            CHECK(back[i].t == rows[i].t);
            CHECK(back[i].attempts == rows[i].attempts);
            CHECK(back[i].successes == rows[i].successes);
            CHECK(back[i].rate == rows[i].rate);
            CHECK(back[i].sigma2_mean == rows[i].sigma2_mean);
        }
        std::istringstream bad("t,attempts\n1,2\n");
        CHECK_THROWS_AS(read_step_csv(bad), Error);
    }

    TEST_CASE("JSON files roundtrip")
    {
        const auto path = std::filesystem::temp_directory_path() / "foresight_json_test" / "sub" / "r.json";
        const nlohmann::json j = {{"a", 1.0 / 3.0}, {"b", {1, 2, 3}}};
        write_json_file(path, j);
        CHECK(read_json_file(path) == j);
        std::filesystem::remove_all(path.parent_path().parent_path());
    }

    TEST_CASE("config parsing: overrides, unknown keys, bad types")
    {
        const RunConfig cfg = parse_run_config(nlohmann::json::parse(
            R"({"policy": {"alpha": 0.5, "objective": "min_steps_to_empty"}, "scenario": {"kind": "row3"}, "bench": {"episodes": 3}})"));
        CHECK(cfg.policy.alpha == 0.5);
        CHECK(cfg.policy.objective == Objective::min_steps_to_empty);
        CHECK(cfg.scenario.kind == ScenarioKind::row3);
        CHECK(cfg.bench.episodes == 3);
        CHECK(cfg.policy.sigma2_image == 0.12);

        for (const char* bad : {R"({"policy": {"alfa": 1}})", R"({"polcy": {}})", R"({"policy": {"alpha": "x"}})",
                                R"({"policy": {"objective": "fast"}})", R"([1, 2])"})
        {
            try
            {
                (void)parse_run_config(nlohmann::json::parse(bad));
                FAIL("accepted " << bad);
            }
            catch (const Error& e)
            {
                CHECK(e.code() == ErrorCode::ConfigError);
            }
        }
    }

    TEST_CASE("config dump parses back to the same document")
    {
        RunConfig cfg;
        apply_seed(cfg, 99);
        const nlohmann::json j = to_json(cfg);
        CHECK(to_json(parse_run_config(j)) == j);
        CHECK(cfg.bench.seed == 99);
        CHECK(cfg.data.seed != cfg.train.seed);
    }

    TEST_CASE("short benchmark runs are reproducible and account time exactly")
    {
        const Models m = test::fixture_models();
        BenchmarkConfig cfg;
        cfg.episodes = 1;
        cfg.time_limit = 40.0;
        cfg.cubes = 10;
        PolicyConfig pc;
        pc.rotations = 8;
        const BenchReport a = bench_bbt(cfg, pc, m);
        const BenchReport b = bench_bbt(cfg, pc, m);
        CHECK(to_json(a).dump() == to_json(b).dump());
        REQUIRE(a.conditions.size() == 5);
        for (const ConditionResult& c : a.conditions)
        {
            for (const EpisodeLog& log : c.logs)
            {
                CHECK(log.clock == doctest::Approx(log.actions() * cfg.t_grasp + log.measurements * cfg.t_image));
                CHECK(log.clock <= cfg.time_limit + 1e-9);
            }
        }
        CHECK_THROWS_AS(a.at("nonexistent"), Error);

        cfg.episodes = 2;
        const StepCurve s1 = bench_step_curve(cfg, pc, m, 3);
        const StepCurve s2 = bench_step_curve(cfg, pc, m, 3);
        CHECK(to_json(s1).dump() == to_json(s2).dump());
        CHECK(s1.rows.front().sigma2_mean == 0.0);
    }
}
