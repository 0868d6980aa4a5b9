#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mippc/simulate.hpp"
#include "mippc/stats.hpp"
#include "test_util.hpp"

using namespace mippc;

TEST_CASE("quadratic-outcome generator moments") {
    RngStream rng(12);
    const Dataset data = gen_scenario1(1000000, rng);
    const auto& x = data.column("x").values;
    const auto& x2 = data.column("x2").values;
    const auto& y = data.column("y").values;

    // conditional mean at x near zero
    double sum = 0.0;
    std::size_t count = 0;
    std::vector<double> residuals(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(x[i] > -3.0);
        CHECK(x[i] < 3.0);
        CHECK(x2[i] == x[i] * x[i]);
        residuals[i] = y[i] - x[i] - x2[i];
        if (std::abs(x[i]) < 0.1) {
            sum += y[i];
            ++count;
        }
    }
    CHECK(std::abs(sum / static_cast<double>(count)) < 0.01);
    CHECK(variance(residuals) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("quadratic-covariate generator moments") {
    RngStream rng(13);
    const Dataset data = gen_scenario2(1000000, rng);
    const auto& x = data.column("x").values;
    const auto& x2 = data.column("x2").values;
    const auto& y = data.column("y").values;
    std::vector<double> residuals(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(x2[i] == x[i] * x[i]);
        residuals[i] = y[i] - x[i] - x2[i];
    }
    CHECK(std::abs(mean(x)) < 0.01);
    CHECK(variance(x) == doctest::Approx(1.0).epsilon(0.01));
    CHECK(variance(residuals) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("logistic-outcome generator matches its quadrature oracle") {
    RngStream rng(14);
    const Dataset data = gen_scenario3(1000000, rng);
    const auto& x = data.column("x").values;
    const auto& z = data.column("z").values;
    const auto& y = data.column("y").values;
    CHECK(data.column("y").kind == ColumnKind::Binary);
    CHECK(std::abs(mean(z) - 1.0) < 0.01);

    double near_zero_ones = 0.0, near_zero = 0.0, ones = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        ones += y[i];
        if (std::abs(x[i] + z[i]) < 0.05) {
            near_zero += 1.0;
            near_zero_ones += y[i];
        }
    }
    CHECK(std::abs(near_zero_ones / near_zero - 0.5) < 0.02);

    // P(y=1) by quadrature: x+z has density (1/6)(Phi(s+2) - Phi(s-4))
    double oracle = 0.0;
    const double lo = -12.0, hi = 14.0;
    const int steps = 20000;
    const double h = (hi - lo) / steps;
    for (int k = 0; k <= steps; ++k) {
        const double s = lo + k * h;
        const double fs = (normal_cdf(s + 2.0) - normal_cdf(s - 4.0)) / 6.0;
        const double w = (k == 0 || k == steps) ? 0.5 : 1.0;
        oracle += w * logistic(s) * fs * h;
    }
    CHECK(std::abs(ones / static_cast<double>(x.size()) - oracle) < 0.01);
}

TEST_CASE("rubin pooling formulas") {
    // identical estimates: between-variance is zero
    const std::vector<double> est_same = {2.0, 2.0, 2.0};
    const std::vector<double> var_same = {0.7, 0.7, 0.7};
    const PooledEstimate same = pool_rubin(est_same, var_same);
    CHECK(same.estimate == 2.0);
    CHECK(same.total_variance == doctest::Approx(0.7));

    // m = 2, estimates (0, 2), variances (1, 1): total = 1 + 1.5 * 2 = 4
    const std::vector<double> est = {0.0, 2.0};
    const std::vector<double> vars = {1.0, 1.0};
    const PooledEstimate pooled = pool_rubin(est, vars);
    CHECK(pooled.estimate == 1.0);
    CHECK(pooled.total_variance == doctest::Approx(4.0));

    CHECK_THROWS_AS(pool_rubin(std::vector<double>{1.0}, std::vector<double>{1.0}), ConfigError);
}

TEST_CASE("scenario tables are deterministic and internally consistent") {
    ScenarioSpec spec;
    spec.scenario = Scenario::QuadOutcome;
    spec.n = 400;
    spec.m = 25;
    spec.seed = 31;
    spec.proportions = {0.3, 0.5};
    const auto rows = run_scenario(spec);
    const auto rows2 = run_scenario(spec);
    REQUIRE(rows.size() == 2u * 2u * 2u * 2u);  // mech x prop x model x level
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].cov == rows2[i].cov);
        CHECK(rows[i].distance == rows2[i].distance);
        CHECK(rows[i].ciw == rows2[i].ciw);
    }
    // layout: per cell, (linear 75, linear 95, quadratic 75, quadratic 95)
    for (std::size_t i = 0; i < rows.size(); i += 4) {
        CHECK(rows[i].distance == rows[i + 1].distance);      // distance is level-free
        CHECK(rows[i + 2].distance == rows[i + 3].distance);
        CHECK(rows[i + 1].distance > rows[i + 3].distance);   // linear fits worse
        CHECK(rows[i].ciw < rows[i + 1].ciw);                 // level monotone
        CHECK(rows[i + 2].ciw < rows[i + 3].ciw);
    }
}

TEST_CASE("binary-outcome table orders the models by deviance") {
    ScenarioSpec spec;
    spec.scenario = Scenario::LogisticOutcome;
    spec.n = 600;
    spec.m = 25;
    spec.seed = 17;
    spec.proportions = {0.3, 0.5};
    spec.levels = {0.95};
    const auto rows = run_scenario(spec);
    REQUIRE(rows.size() == 2u * 2u * 2u);
    for (std::size_t i = 0; i < rows.size(); i += 2) {
        REQUIRE(rows[i].model == "with_x");
        REQUIRE(rows[i + 1].model == "without_x");
        CHECK(rows[i].deviance.value() < rows[i + 1].deviance.value());
    }
}

TEST_CASE("scenario csv writes NA for absent deviance and re-parses") {
    ScenarioSpec spec;
    spec.scenario = Scenario::QuadOutcome;
    spec.n = 200;
    spec.m = 20;
    spec.seed = 5;
    spec.proportions = {0.3};
    spec.mechanisms = {Mechanism::Mcar};
    const auto rows = run_scenario(spec);
    testutil::TempDir dir;
    write_scenario_csv(rows, dir.file("table.csv"));
    std::ifstream in(dir.file("table.csv"));
    std::string header;
    std::getline(in, header);
    CHECK(header == "mechanism,proportion,model,level,cov,distance,ciw,deviance");
    std::string line;
    std::size_t count = 0;
    while (std::getline(in, line)) {
        CHECK(line.substr(line.size() - 3) == ",NA");
        ++count;
    }
    CHECK(count == rows.size());
}

namespace {

// Two measured quantities, each with a strong self-report proxy; the shape of
// the application study.
Dataset proxy_data(int n, std::uint64_t seed) {
    RngStream rng(seed);
    std::vector<double> age(n), hr(n), wr(n), hm(n), wm(n);
    std::vector<std::uint8_t> hm_obs(n, 1), wm_obs(n, 1);
    for (int i = 0; i < n; ++i) {
        age[i] = rng.uniform(18.0, 70.0);
        hr[i] = 170.0 + 10.0 * rng.normal();
        wr[i] = 70.0 + 12.0 * rng.normal();
        hm[i] = hr[i] + 1.0 + 1.5 * rng.normal();
        wm[i] = wr[i] + 1.0 + 0.05 * (age[i] - 44.0) + 2.0 * rng.normal();
        if (rng.uniform() < 0.35) {
            hm_obs[i] = 0;
            hm[i] = std::nan("");
        }
        if (rng.uniform() < 0.35) {
            wm_obs[i] = 0;
            wm[i] = std::nan("");
        }
    }
    Column chm = testutil::make_column("hm", hm);
    chm.observed = hm_obs;
    Column cwm = testutil::make_column("wm", wm);
    cwm.observed = wm_obs;
    return Dataset({testutil::make_column("age", age), testutil::make_column("hr", hr),
                    testutil::make_column("wr", wr), chm, cwm});
}

ImputerSpec norm_spec(std::vector<std::string> predictors) {
    ImputerSpec spec;
    spec.method = Method::Norm;
    spec.predictors = std::move(predictors);
    return spec;
}

}  // namespace

TEST_CASE("strategy comparison rewards the proxy and stays stable across targets") {
    const Dataset data = proxy_data(800, 3);
    std::vector<Strategy> strategies(4);
    strategies[0] = {"case 1",
                     {{"hm", norm_spec({"age", "hr", "wr", "wm"})},
                      {"wm", norm_spec({"age", "hr", "wr", "hm"})}}};
    strategies[1] = {"case 2",
                     {{"hm", norm_spec({"age", "hr", "wr", "wm"})},
                      {"wm", norm_spec({"age", "hr", "hm"})}}};
    strategies[2] = {"case 3",
                     {{"hm", norm_spec({"age", "wr", "wm"})},
                      {"wm", norm_spec({"age", "hr", "wr", "hm"})}}};
    strategies[3] = {"case 4",
                     {{"hm", norm_spec({"age", "wr", "wm"})}, {"wm", norm_spec({"age", "hr", "hm"})}}};

    const auto rows = run_strategy_comparison(data, strategies, 0.95, 30, 11);
    REQUIRE(rows.size() == 8);
    auto metric = [&](const std::string& strategy, const std::string& variable) {
        for (const auto& row : rows) {
            if (row.strategy == strategy && row.variable == variable) return row;
        }
        FAIL("row not found");
        return rows.front();
    };

    // dropping a proxy inflates distance and width for its own target
    CHECK(metric("case 1", "wm").distance < metric("case 2", "wm").distance);
    CHECK(metric("case 1", "wm").ciw < metric("case 2", "wm").ciw);
    CHECK(metric("case 1", "hm").distance < metric("case 3", "hm").distance);
    CHECK(metric("case 1", "hm").ciw < metric("case 3", "hm").ciw);

    // a misspecified companion model perturbs the other target only mildly
    CHECK(metric("case 2", "hm").distance < 1.25 * metric("case 1", "hm").distance);
    CHECK(metric("case 3", "wm").distance < 1.25 * metric("case 1", "wm").distance);
    // hr-in beats hr-out for hm regardless of the wm model
    CHECK(metric("case 2", "hm").distance < metric("case 4", "hm").distance);
    CHECK(metric("case 1", "hm").distance < metric("case 4", "hm").distance);
}

TEST_CASE("identical strategies produce identical rows under a shared seed") {
    const Dataset data = proxy_data(300, 9);
    Strategy one{"a", {{"hm", norm_spec({"age", "hr", "wr"})}, {"wm", norm_spec({"age", "wr"})}}};
    Strategy two = one;
    two.name = "b";
    const auto rows = run_strategy_comparison(data, {one, two}, 0.95, 10, 21);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].cov == rows[2].cov);
    CHECK(rows[0].distance == rows[2].distance);
    CHECK(rows[0].ciw == rows[2].ciw);
    CHECK(rows[1].cov == rows[3].cov);
}

TEST_CASE("strategies must cover every incomplete variable") {
    const Dataset data = proxy_data(200, 13);
    Strategy partial{"partial", {{"hm", norm_spec({"age", "hr"})}}};
    CHECK_THROWS_AS(run_strategy_comparison(data, {partial}, 0.95, 5, 1), ConfigError);
    CHECK_THROWS_AS(run_strategy_comparison(data, {}, 0.95, 5, 1), ConfigError);
}

TEST_CASE("strategies parse from json") {
    const Dataset data = proxy_data(100, 17);
    const std::string text = R"([
        {"name": "case 1", "methods": {
            "hm": {"method": "norm", "predictors": ["age", "hr"]},
            "wm": {"method": "pmm", "donors": 3, "predictors": ["age", "wr"]}}},
        {"methods": {
            "hm": {"method": "norm", "predictors": ["age"]},
            "wm": {"method": "norm", "predictors": ["age"]}}}
    ])";
    const auto strategies = strategies_from_json(text, data);
    REQUIRE(strategies.size() == 2);
    CHECK(strategies[0].name == "case 1");
    CHECK(strategies[1].name == "strategy 2");
    CHECK(strategies[0].methods.at("wm").method == Method::Pmm);
    CHECK(strategies[0].methods.at("wm").donors == 3);
    CHECK_THROWS_AS(strategies_from_json("[]", data), ConfigError);
    CHECK_THROWS_AS(strategies_from_json("{}", data), ConfigError);
    CHECK_THROWS_AS(strategies_from_json(R"([{"methods":{"zz":{"method":"norm"}}}])", data),
                    ConfigError);
}

TEST_CASE("pooling study runs at small scale and reports coverage rates") {
    const PoolingStudyResult result = run_pooling_study(400, 0.3, 10, 5, 3);
    CHECK(result.repetitions == 5);
    CHECK(std::isfinite(result.beta1_mean));
    CHECK(std::isfinite(result.beta2_mean));
    CHECK(result.beta1_coverage >= 0.0);
    CHECK(result.beta1_coverage <= 1.0);
    CHECK(std::abs(result.beta1_mean - 1.0) < 0.3);
    CHECK(std::abs(result.beta2_mean - 1.0) < 0.3);
}

TEST_CASE("scenario spec validation") {
    ScenarioSpec spec;
    spec.n = 10;
    CHECK_THROWS_AS(run_scenario(spec), ConfigError);
    spec.n = 100;
    spec.m = 1;
    CHECK_THROWS_AS(run_scenario(spec), ConfigError);
}
