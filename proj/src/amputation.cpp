#include "mippc/amputation.hpp"

#include <cmath>
#include <limits>

#include "mippc/stats.hpp"

namespace mippc {

std::vector<double> compute_wss(const Dataset& data, const std::map<std::string, double>& weights) {
    if (weights.empty()) throw ConfigError("weighted sum score needs at least one weight");
    const std::size_t n = data.rows();
    std::vector<double> wss(n, 0.0);
    for (const auto& [name, w] : weights) {
        const Column& col = data.column(name);
        if (col.observed_count() != n) {
            throw ConfigError("weight column " + name + " has missing cells");
        }
        for (std::size_t i = 0; i < n; ++i) wss[i] += w * col.values[i];
    }
    const double m = mean(wss);
    const double sd = sample_sd(wss);
    if (!(sd > 0.0)) throw NumericError("weighted sum score has zero variance");
    for (double& v : wss) v = (v - m) / sd;
    return wss;
}

namespace {

void validate_spec(const Dataset& data, const AmputeSpec& spec) {
    if (spec.pattern.targets.empty()) throw ConfigError("ampute pattern has no target columns");
    if (!(spec.proportion > 0.0 && spec.proportion < 1.0)) {
        throw ConfigError("ampute proportion must lie strictly inside (0, 1)");
    }
    for (const auto& name : spec.pattern.targets) {
        const Column& col = data.column(name);
        if (col.observed_count() != data.rows()) {
            throw ConfigError("ampute target column " + name + " already has missing cells");
        }
    }
    if (spec.mechanism == Mechanism::Marr) {
        bool any = false;
        for (const auto& [name, w] : spec.pattern.weights) {
            (void)name;
            any = any || w != 0.0;
        }
        if (!any) throw ConfigError("MARr amputation needs a nonzero weight vector");
    }
}

// Solves the logistic intercept so that mean(logistic(wss + c)) hits the
// target proportion to 1e-6.
double solve_intercept(const std::vector<double>& wss, double proportion) {
    auto expected = [&](double c) {
        double s = 0.0;
        for (double v : wss) s += logistic(v + c);
        return s / static_cast<double>(wss.size());
    };
    double lo = -50.0, hi = 50.0;
    if (expected(lo) > proportion || expected(hi) < proportion) {
        throw NumericError("logistic intercept bisection cannot bracket the target proportion");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double e = expected(mid);
        if (std::abs(e - proportion) <= 1e-6) return mid;
        if (e < proportion) lo = mid;
        else hi = mid;
    }
    throw NumericError("logistic intercept bisection did not converge");
}

}  // namespace

Dataset ampute(const Dataset& data, const AmputeSpec& spec, RngStream rng) {
    validate_spec(data, spec);
    const std::size_t n = data.rows();

    std::vector<double> prob(n, spec.proportion);
    if (spec.mechanism == Mechanism::Marr) {
        const auto wss = compute_wss(data, spec.pattern.weights);
        const double c = solve_intercept(wss, spec.proportion);
        for (std::size_t i = 0; i < n; ++i) prob[i] = logistic(wss[i] + c);
    }

    std::vector<Column> columns = data.columns();
    std::vector<std::size_t> target_idx;
    for (const auto& name : spec.pattern.targets) {
        target_idx.push_back(static_cast<std::size_t>(data.find_column(name)));
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!rng.bernoulli(prob[i])) continue;
        for (std::size_t j : target_idx) {
            columns[j].values[i] = std::numeric_limits<double>::quiet_NaN();
            columns[j].observed[i] = 0;
        }
    }
    return Dataset(std::move(columns));
}

}  // namespace mippc
