#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mippc/amputation.hpp"
#include "mippc/simulate.hpp"
#include "mippc/stats.hpp"
#include "test_util.hpp"

using namespace mippc;

TEST_CASE("weighted sum score standardizes with the n-1 convention") {
    Dataset data({testutil::make_column("x", {0.0, 1.0, 2.0, 3.0})});
    const auto wss = compute_wss(data, {{"x", 1.0}});
    // hand-computed: mean 1.5, sample sd sqrt(5/3)
    const double sd = std::sqrt(5.0 / 3.0);
    CHECK(wss[0] == doctest::Approx((0.0 - 1.5) / sd).epsilon(1e-12));
    CHECK(wss[1] == doctest::Approx(-0.3872983346207417).epsilon(1e-9));
    CHECK(wss[2] == doctest::Approx(0.3872983346207417).epsilon(1e-9));
    CHECK(wss[3] == doctest::Approx(1.161895003862225).epsilon(1e-9));
}

TEST_CASE("wss is the weighted row sum before standardization") {
    Dataset data({testutil::make_column("x1", {2.0, 0.0, 1.0}),
                  testutil::make_column("x2", {3.0, 0.0, 1.0})});
    // raw scores (5, 0, 2); the standardized vector must preserve their order
    // and spacing ratio
    const auto wss = compute_wss(data, {{"x1", 1.0}, {"x2", 1.0}});
    CHECK(wss[0] > wss[2]);
    CHECK(wss[2] > wss[1]);
    CHECK((wss[0] - wss[2]) / (wss[2] - wss[1]) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("weights have relative influence only") {
    RngStream rng(1);
    std::vector<double> a(50), b(50);
    for (int i = 0; i < 50; ++i) {
        a[i] = rng.normal();
        b[i] = rng.normal();
    }
    Dataset data({testutil::make_column("x1", a), testutil::make_column("x2", b)});
    const auto one = compute_wss(data, {{"x1", 1.0}, {"x2", 1.0}});
    const auto two = compute_wss(data, {{"x1", 2.0}, {"x2", 2.0}});
    for (std::size_t i = 0; i < one.size(); ++i) CHECK(one[i] == doctest::Approx(two[i]).epsilon(1e-12));
}

TEST_CASE("wss error paths") {
    Dataset data({testutil::make_column("x", {1.0, std::nan(""), 3.0}),
                  testutil::make_column("c", {2.0, 2.0, 2.0})});
    CHECK_THROWS_AS(compute_wss(data, {{"x", 1.0}}), ConfigError);
    CHECK_THROWS_AS(compute_wss(data, {{"c", 1.0}}), NumericError);
    CHECK_THROWS_AS(compute_wss(data, {}), ConfigError);
}

namespace {

Dataset two_column_data(int n, std::uint64_t seed) {
    RngStream rng(seed);
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
        x[i] = rng.normal();
        y[i] = x[i] + rng.normal();
    }
    return Dataset({testutil::make_column("x", x), testutil::make_column("y", y)});
}

double missing_fraction(const Dataset& data, const std::string& col) {
    const auto& c = data.column(col);
    return 1.0 - static_cast<double>(c.observed_count()) / static_cast<double>(c.size());
}

}  // namespace

TEST_CASE("mcar hits the target proportion within the binomial band") {
    const Dataset data = two_column_data(1000, 7);
    AmputeSpec spec;
    spec.mechanism = Mechanism::Mcar;
    spec.proportion = 0.3;
    spec.pattern.targets = {"y"};
    const Dataset amputed = ampute(data, spec, RngStream(11));
    CHECK(std::abs(missing_fraction(amputed, "y") - 0.3) < 0.05);
    // untouched columns
    CHECK(amputed.column("x").observed_count() == 1000);
    for (std::size_t i = 0; i < 1000; ++i) CHECK(amputed.column("x").values[i] == data.column("x").values[i]);
}

TEST_CASE("realized proportion concentrates at large n") {
    const Dataset data = two_column_data(100000, 13);
    for (auto mech : {Mechanism::Mcar, Mechanism::Marr}) {
        AmputeSpec spec;
        spec.mechanism = mech;
        spec.proportion = 0.3;
        spec.pattern.targets = {"y"};
        spec.pattern.weights = {{"x", 1.0}};
        const Dataset amputed = ampute(data, spec, RngStream(17));
        const double band = 3.0 * std::sqrt(0.3 * 0.7 / 100000.0);
        CHECK(std::abs(missing_fraction(amputed, "y") - 0.3) < band);
    }
}

TEST_CASE("marr missingness increases with the weighted sum score") {
    const Dataset data = two_column_data(20000, 5);
    AmputeSpec spec;
    spec.mechanism = Mechanism::Marr;
    spec.proportion = 0.5;
    spec.pattern.targets = {"y"};
    spec.pattern.weights = {{"x", 1.0}};
    const Dataset amputed = ampute(data, spec, RngStream(3));

    const auto wss = compute_wss(data, spec.pattern.weights);
    std::vector<std::size_t> order(wss.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return wss[a] < wss[b]; });
    const std::size_t decile = wss.size() / 10;
    double bottom = 0, top = 0;
    for (std::size_t i = 0; i < decile; ++i) {
        bottom += !amputed.column("y").observed[order[i]];
        top += !amputed.column("y").observed[order[order.size() - 1 - i]];
    }
    CHECK(top > bottom);
    CHECK(top / decile > 0.8);   // logistic right tail
    CHECK(bottom / decile < 0.2);
}

TEST_CASE("near-zero proportion leaves the data almost intact") {
    const Dataset data = two_column_data(1000, 23);
    AmputeSpec spec;
    spec.mechanism = Mechanism::Mcar;
    spec.proportion = 1e-9;
    spec.pattern.targets = {"y"};
    const Dataset amputed = ampute(data, spec, RngStream(1));
    CHECK(amputed.column("y").observed_count() >= 999);
}

TEST_CASE("joint patterns hit every target column in an affected row") {
    const Dataset data =
        Dataset({testutil::make_column("a", std::vector<double>(500, 1.0)),
                 testutil::make_column("b", std::vector<double>(500, 2.0)),
                 testutil::make_column("w", [] {
                     std::vector<double> v(500);
                     for (int i = 0; i < 500; ++i) v[i] = i;
                     return v;
                 }())});
    AmputeSpec spec;
    spec.mechanism = Mechanism::Marr;
    spec.proportion = 0.4;
    spec.pattern.targets = {"a", "b"};
    spec.pattern.weights = {{"w", 1.0}};
    const Dataset amputed = ampute(data, spec, RngStream(9));
    for (std::size_t i = 0; i < 500; ++i) {
        CHECK(amputed.column("a").observed[i] == amputed.column("b").observed[i]);
    }
    CHECK(missing_fraction(amputed, "a") > 0.2);
}

TEST_CASE("amputation is deterministic given data, spec and seed") {
    const Dataset data = two_column_data(2000, 37);
    AmputeSpec spec;
    spec.mechanism = Mechanism::Marr;
    spec.proportion = 0.4;
    spec.pattern.targets = {"y"};
    spec.pattern.weights = {{"x", 1.0}};
    const Dataset first = ampute(data, spec, RngStream(77));
    const Dataset second = ampute(data, spec, RngStream(77));
    CHECK(first.column("y").observed == second.column("y").observed);
}

TEST_CASE("ampute validation errors") {
    const Dataset data = two_column_data(100, 3);
    AmputeSpec spec;
    spec.pattern.targets = {};
    CHECK_THROWS_AS(ampute(data, spec, RngStream(1)), ConfigError);
    spec.pattern.targets = {"y"};
    spec.proportion = 0.0;
    CHECK_THROWS_AS(ampute(data, spec, RngStream(1)), ConfigError);
    spec.proportion = 1.0;
    CHECK_THROWS_AS(ampute(data, spec, RngStream(1)), ConfigError);
    spec.proportion = 0.3;
    spec.mechanism = Mechanism::Marr;
    spec.pattern.weights = {{"x", 0.0}};
    CHECK_THROWS_AS(ampute(data, spec, RngStream(1)), ConfigError);
}
