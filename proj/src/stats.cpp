#include "mippc/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "mippc/errors.hpp"

namespace mippc {

double mean(std::span<const double> v) {
    if (v.empty()) throw NumericError("mean of empty vector");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
    if (v.size() < 2) throw NumericError("variance needs at least 2 values");
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

double sample_sd(std::span<const double> v) { return std::sqrt(variance(v)); }

double quantile_type7(std::vector<double> v, double p) {
    if (v.empty()) throw NumericError("quantile of empty vector");
    if (!(p >= 0.0 && p <= 1.0)) throw NumericError("quantile probability outside [0, 1]");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw NumericError("normal quantile needs p in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<>(), p);
}

double normal_cdf(double x) {
    return boost::math::cdf(boost::math::normal_distribution<>(), x);
}

double logistic(double t) {
    if (t >= 0.0) {
        const double e = std::exp(-std::min(t, 700.0));
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(std::max(t, -700.0));
    return e / (1.0 + e);
}

}  // namespace mippc
