#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <vector>

#include "mippc/ppc.hpp"
#include "mippc/stats.hpp"
#include "test_util.hpp"

using namespace mippc;

namespace {

// A single-column dataset with MCAR missingness, imputed with the
// intercept-only normal model: the conjugate setting where the posterior
// predictive has a closed form.
struct Toy {
    Dataset data;
    EngineConfig config;
};

Toy make_toy(int n, double missing_rate, double mu, std::uint64_t seed) {
    RngStream rng(seed);
    std::vector<double> y(n);
    std::vector<std::uint8_t> obs(n, 1);
    for (int i = 0; i < n; ++i) {
        y[i] = mu + rng.normal();
        if (rng.uniform() < missing_rate) {
            obs[i] = 0;
            y[i] = std::nan("");
        }
    }
    Column col = testutil::make_column("y", y);
    col.observed = obs;
    Toy toy{Dataset({col}), {}};
    toy.config.m = 1;
    toy.config.maxit = 5;
    toy.config.seed = seed + 1;
    ImputerSpec spec;
    spec.method = Method::Norm;
    toy.config.specs["y"] = spec;
    toy.config.where = WhereMask::none(toy.data);
    for (int i = 0; i < n; ++i) {
        if (!obs[i]) toy.config.where.set(static_cast<std::size_t>(i), 0, true);
    }
    return toy;
}

double column_mean(const Dataset& d) {
    const auto& v = d.column("y").values;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Closed-form conjugate simulation of the completed-data discrepancy p-value:
// sigma2 ~ SSR/chisq(n_obs-1), mu ~ N(ybar, sigma2/n_obs), missing cells and a
// full replicate drawn per parameter draw, T = sample mean.
double oracle_p_b_com(const Dataset& data, int n_draws, std::uint64_t seed) {
    RngStream rng(seed);
    const Column& col = data.column("y");
    std::vector<double> y_obs = col.observed_values();
    const auto n = static_cast<double>(col.size());
    const auto n_obs = static_cast<double>(y_obs.size());
    const double ybar = mean(y_obs);
    double ssr = 0.0;
    for (double v : y_obs) ssr += (v - ybar) * (v - ybar);

    int count = 0;
    for (int j = 0; j < n_draws; ++j) {
        const double sigma2 = ssr / rng.chi_square(n_obs - 1.0);
        const double mu = ybar + std::sqrt(sigma2 / n_obs) * rng.normal();
        double completed_sum = n_obs * ybar;
        for (int k = 0; k < static_cast<int>(n - n_obs); ++k) {
            completed_sum += mu + std::sqrt(sigma2) * rng.normal();
        }
        double replicate_sum = 0.0;
        for (int k = 0; k < static_cast<int>(n); ++k) {
            replicate_sum += mu + std::sqrt(sigma2) * rng.normal();
        }
        if (replicate_sum / n >= completed_sum / n) ++count;
    }
    return count / static_cast<double>(n_draws);
}

}  // namespace

TEST_CASE("degenerate replicates give zero distance and width") {
    MultiplyImputed result;
    result.m = 4;
    result.original = Dataset({testutil::make_column("y", {1.5, 2.5})});
    result.where = where_all_observed(result.original);
    result.replicates["y"] = {{0, {1.5, 1.5, 1.5, 1.5}}, {1, {2.5, 2.5, 2.5, 2.5}}};
    const PpcReport report = cell_diagnostics(result, 0.95);
    for (const auto& cell : report.cells) {
        CHECK(cell.distance == 0.0);
        CHECK(cell.hi - cell.lo == 0.0);
        CHECK(cell.covered);
    }
    CHECK(report.variables[0].cov == 1.0);
    CHECK_FALSE(report.warnings.empty());  // m < 20
}

TEST_CASE("interval width grows with the nominal level, distance does not move") {
    MultiplyImputed result;
    result.m = 40;
    result.original = Dataset({testutil::make_column("y", {0.0, 1.0, -1.0})});
    result.where = where_all_observed(result.original);
    RngStream rng(5);
    for (std::size_t r = 0; r < 3; ++r) {
        MultiplyImputed::CellReplicates cell;
        cell.row = r;
        for (int k = 0; k < 40; ++k) cell.values.push_back(rng.normal());
        result.replicates["y"].push_back(std::move(cell));
    }
    const PpcReport lo = cell_diagnostics(result, 0.75);
    const PpcReport hi = cell_diagnostics(result, 0.95);
    for (std::size_t i = 0; i < lo.cells.size(); ++i) {
        CHECK(lo.cells[i].hi - lo.cells[i].lo < hi.cells[i].hi - hi.cells[i].lo);
        CHECK(lo.cells[i].distance == hi.cells[i].distance);  // exact equality
    }
    CHECK(lo.variables[0].cov <= hi.variables[0].cov);
    CHECK(lo.variables[0].distance == hi.variables[0].distance);

    CHECK_THROWS_AS(cell_diagnostics(result, 0.0), ConfigError);
    CHECK_THROWS_AS(cell_diagnostics(result, 1.0), ConfigError);
    MultiplyImputed empty;
    empty.m = 5;
    CHECK_THROWS_AS(cell_diagnostics(empty, 0.95), ConfigError);
}

TEST_CASE("deviance residuals follow the clamped binomial formula") {
    MultiplyImputed result;
    result.m = 50;
    result.original = Dataset({testutil::make_column("y", {1.0, 0.0, 1.0}, ColumnKind::Binary)});
    result.where = where_all_observed(result.original);
    auto& cells = result.replicates["y"];
    cells.resize(3);
    for (std::size_t r = 0; r < 3; ++r) cells[r].row = r;
    cells[0].values.assign(50, 1.0);  // p_hat clamps to 1 - 1/(2m)
    cells[1].values.assign(50, 0.0);  // p_hat clamps to 1/(2m)
    cells[2].values.assign(50, 0.0);
    cells[2].values[0] = 1.0;  // p_hat = 0.02

    const DevianceSummary summary = deviance_summary(result, "y");
    const double clamp = 1.0 / 100.0;
    CHECK(summary.cells[0].p_hat == 1.0 - clamp);
    CHECK(summary.cells[0].residual ==
          doctest::Approx(std::sqrt(-2.0 * std::log(1.0 - clamp))).epsilon(1e-12));
    CHECK(summary.cells[0].residual > 0.0);
    CHECK(summary.cells[1].residual < 0.0);
    // clamp bounds every residual
    const double bound = std::sqrt(-2.0 * std::log(clamp));
    for (const auto& cell : summary.cells) CHECK(std::abs(cell.residual) <= bound + 1e-12);
    // y = 1 with p_hat 0.02: a strong miss, residual near the bound
    CHECK(summary.cells[2].residual == doctest::Approx(std::sqrt(-2.0 * std::log(0.02))));
    const double expected = (summary.cells[0].residual * summary.cells[0].residual +
                             summary.cells[1].residual * summary.cells[1].residual +
                             summary.cells[2].residual * summary.cells[2].residual) /
                            3.0;
    CHECK(summary.mean_squared_deviance == doctest::Approx(expected));

    MultiplyImputed cont;
    cont.m = 5;
    cont.original = Dataset({testutil::make_column("y", {0.5})});
    CHECK_THROWS_AS(deviance_summary(cont, "y"), SchemaError);
}

TEST_CASE("p-value tie convention is inclusive") {
    const std::vector<double> obs(100, 1.0);
    CHECK(ppc_pvalue(obs, obs).p_value == 1.0);
    const std::vector<double> smaller(100, 0.5);
    CHECK(ppc_pvalue(obs, smaller).p_value == 0.0);
    const std::vector<double> one_obs = {1.0};
    std::vector<double> mixed = {0.5, 1.0, 2.0, 3.0};
    CHECK(ppc_pvalue(one_obs, mixed).p_value == 0.75);
    CHECK_THROWS_AS(ppc_pvalue(one_obs, {}), NumericError);
    CHECK_THROWS_AS(ppc_pvalue(std::vector<double>{1.0, 2.0}, mixed), NumericError);
}

TEST_CASE("symmetric replicate statistics give a central p-value") {
    RngStream rng(7);
    std::vector<double> obs(10000), rep(10000);
    for (int i = 0; i < 10000; ++i) {
        obs[i] = 0.0;
        rep[i] = rng.normal();
    }
    const double p = ppc_pvalue(obs, rep).p_value;
    CHECK(p > 0.47);
    CHECK(p < 0.53);
}

TEST_CASE("completed-data discrepancy agrees with the conjugate oracle") {
    const Toy toy = make_toy(200, 0.3, 0.5, 42);
    const double oracle = oracle_p_b_com(toy.data, 4000, 9);
    CHECK(oracle > 0.35);
    CHECK(oracle < 0.65);
    const DiscrepancyResult engine = p_b_com(toy.data, toy.config, column_mean, 500);
    CHECK(engine.p_value > 0.35);
    CHECK(engine.p_value < 0.65);
    CHECK(engine.n_outer == 500);
    // the two estimates target the same quantity
    CHECK(std::abs(engine.p_value - oracle) < 0.15);
}

TEST_CASE("nested discrepancy stays central on the congenial toy model") {
    const Toy toy = make_toy(200, 0.3, -1.0, 77);
    const DiscrepancyResult ecom = p_b_ecom(toy.data, toy.config, column_mean, 200, 20);
    CHECK(ecom.p_value > 0.35);
    CHECK(ecom.p_value < 0.65);
    CHECK(ecom.n_inner == 20);
}

TEST_CASE("single inner draw reduces to the plain discrepancy estimate") {
    const Toy toy = make_toy(150, 0.3, 0.0, 101);
    const DiscrepancyResult com = p_b_com(toy.data, toy.config, column_mean, 400);
    const DiscrepancyResult ecom = p_b_ecom(toy.data, toy.config, column_mean, 400, 1);
    CHECK(std::abs(com.p_value - ecom.p_value) < 0.1);
}

TEST_CASE("statistics blind to imputed cells collapse the two estimators") {
    const Toy toy = make_toy(120, 0.25, 0.2, 55);
    // capture the observed positions up front; the statistic ignores everything else
    std::vector<std::size_t> observed_rows;
    for (std::size_t r = 0; r < toy.data.rows(); ++r) {
        if (toy.data.column("y").observed[r]) observed_rows.push_back(r);
    }
    const Statistic observed_mean = [observed_rows](const Dataset& d) {
        double s = 0.0;
        for (std::size_t r : observed_rows) s += d.column("y").values[r];
        return s / static_cast<double>(observed_rows.size());
    };
    const DiscrepancyResult com = p_b_com(toy.data, toy.config, observed_mean, 200);
    const DiscrepancyResult ecom = p_b_ecom(toy.data, toy.config, observed_mean, 200, 1);
    CHECK(com.p_value == ecom.p_value);  // exact: shared streams, same indicators
}

TEST_CASE("constant statistics hit the inclusive tie") {
    const Toy toy = make_toy(100, 0.3, 0.0, 11);
    const Statistic constant = [](const Dataset&) { return 3.14; };
    CHECK(p_b_com(toy.data, toy.config, constant, 50).p_value == 1.0);
    CHECK(p_b_ecom(toy.data, toy.config, constant, 50, 2).p_value == 1.0);
}

TEST_CASE("draw fallbacks surface as report warnings") {
    MultiplyImputed result;
    result.m = 25;
    result.original = Dataset({testutil::make_column("y", {1.0, 2.0})});
    result.where = where_all_observed(result.original);
    result.replicates["y"] = {{0, std::vector<double>(25, 1.0)}, {1, std::vector<double>(25, 2.0)}};
    result.draw_fallbacks["y"] = 3;
    const PpcReport report = cell_diagnostics(result, 0.95);
    bool mentioned = false;
    for (const auto& w : report.warnings) mentioned = mentioned || w.find("fallback") != std::string::npos;
    CHECK(mentioned);
}

TEST_CASE("clean runs accumulate no fallbacks") {
    const Toy toy = make_toy(100, 0.3, 0.0, 19);
    EngineConfig cfg = toy.config;
    cfg.m = 5;
    const MultiplyImputed result = run_fcs(toy.data, cfg);
    CHECK(result.draw_fallbacks.empty());
}

TEST_CASE("report files round-trip") {
    const Toy toy = make_toy(80, 0.3, 0.0, 13);
    EngineConfig cfg = toy.config;
    cfg.m = 25;
    cfg.where = where_all_observed(toy.data);
    for (std::size_t r = 0; r < toy.data.rows(); ++r) {
        if (!toy.data.column("y").observed[r]) cfg.where.set(r, 0, true);
    }
    const MultiplyImputed result = run_fcs(toy.data, cfg);
    const PpcReport report = cell_diagnostics(result, 0.95);
    testutil::TempDir dir;
    write_report_cells_csv(report, dir.file("cells.csv"));
    write_report_summary_json(report, dir.file("summary.json"));

    std::ifstream in(dir.file("cells.csv"));
    std::string line;
    std::getline(in, line);
    CHECK(line == "row,column,observed,rep_mean,lo,hi,covered,distance");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        // field 3 is the observed value, printed to re-parse exactly
        std::size_t pos = 0;
        for (int f = 0; f < 2; ++f) pos = line.find(',', pos) + 1;
        const double observed = std::strtod(line.c_str() + pos, nullptr);
        CHECK(observed == report.cells[rows].observed);
        ++rows;
    }
    CHECK(rows == report.cells.size());
}
