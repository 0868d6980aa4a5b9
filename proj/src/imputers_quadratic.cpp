#include <cmath>

#include "mippc/errors.hpp"
#include "mippc/imputers.hpp"
#include "mippc/stats.hpp"

namespace mippc {

namespace {

constexpr double kQuadDegenerate = 1e-12;

double normal_pdf(double x, double mean, double sd) {
    const double t = (x - mean) / sd;
    return std::exp(-0.5 * t * t) / (sd * 2.5066282746310002);
}

std::vector<int> observed_rows(const std::vector<std::uint8_t>& mask) {
    std::vector<int> rows;
    rows.reserve(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) rows.push_back(static_cast<int>(i));
    }
    return rows;
}

}  // namespace

QuadRoots polycomb_roots(double b1, double b2, double c) {
    QuadRoots roots;
    if (std::abs(b2) <= kQuadDegenerate * std::max(1.0, std::abs(b1))) {
        roots.linear_fallback = true;
        const double x = std::abs(b1) > kQuadDegenerate ? c / b1 : 0.0;
        roots.lower = roots.upper = x;
        return roots;
    }
    const double disc = b1 * b1 + 4.0 * b2 * c;
    const double vertex = -b1 / (2.0 * b2);
    if (disc < 0.0) {
        roots.vertex_fallback = true;
        roots.lower = roots.upper = vertex;
        return roots;
    }
    const double sq = std::sqrt(disc);
    const double r1 = (-b1 - sq) / (2.0 * b2);
    const double r2 = (-b1 + sq) / (2.0 * b2);
    roots.lower = std::min(r1, r2);
    roots.upper = std::max(r1, r2);
    return roots;
}

PolyCombDraw draw_polycomb(const std::vector<double>& y, const std::vector<std::uint8_t>& x_observed,
                           const std::vector<double>& x, RngStream& rng) {
    if (y.size() != x.size() || x_observed.size() != x.size()) {
        throw NumericError("polynomial combination inputs have mismatched lengths");
    }
    const auto rows = observed_rows(x_observed);
    const auto n_obs = static_cast<Eigen::Index>(rows.size());
    if (n_obs < 5) throw NumericError("too few observed rows for polynomial combination");

    Eigen::MatrixXd Xsub(n_obs, 3);
    Eigen::VectorXd ysub(n_obs);
    for (Eigen::Index i = 0; i < n_obs; ++i) {
        const double xi = x[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])];
        Xsub(i, 0) = 1.0;
        Xsub(i, 1) = xi;
        Xsub(i, 2) = xi * xi;
        ysub(i) = y[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])];
    }

    PolyCombDraw draw;
    {
        // Substantive least-squares fit y ~ x + x^2 on the observed rows.
        Eigen::MatrixXd gram = Xsub.transpose() * Xsub;
        const double ridge = 1e-8 * gram.trace() / 3.0;
        for (int j = 0; j < 3; ++j) gram(j, j) += ridge;
        const Eigen::Vector3d beta = gram.llt().solve(Xsub.transpose() * ysub);
        if (!beta.allFinite()) throw NumericError("degenerate substantive fit");
        draw.a0 = beta(0);
        draw.b1 = beta(1);
        draw.b2 = beta(2);
    }

    Eigen::VectorXd c_obs(n_obs);
    for (Eigen::Index i = 0; i < n_obs; ++i) {
        c_obs(i) = draw.b1 * Xsub(i, 1) + draw.b2 * Xsub(i, 2);
    }
    draw.donor_c.assign(c_obs.data(), c_obs.data() + c_obs.size());

    Eigen::MatrixXd Ydesign(n_obs, 2);
    Ydesign.col(0).setOnes();
    Ydesign.col(1) = ysub;
    draw.c_model = draw_bayes_linreg(Ydesign, c_obs, rng);
    const Eigen::VectorXd c_hat = Ydesign * draw.c_model.beta_hat;
    draw.donor_c_hat.assign(c_hat.data(), c_hat.data() + c_hat.size());

    if (std::abs(draw.b2) > kQuadDegenerate * std::max(1.0, std::abs(draw.b1))) {
        // Side-of-vertex model: logistic of the observed side on the response.
        const double vertex = -draw.b1 / (2.0 * draw.b2);
        Eigen::VectorXd side(n_obs);
        for (Eigen::Index i = 0; i < n_obs; ++i) side(i) = Xsub(i, 1) >= vertex ? 1.0 : 0.0;
        const LogRegDraw side_fit = draw_bayes_logreg(Ydesign, side, rng);
        draw.side_beta = side_fit.mle;
        draw.side_shrinkage = side_fit.shrinkage_applied;
    } else {
        draw.side_beta = Eigen::VectorXd::Zero(2);
    }
    return draw;
}

PolyCombResult impute_polycomb_values(const PolyCombDraw& draw, const std::vector<double>& y_targets,
                                      int donors, RngStream& rng) {
    std::vector<double> target_pred(y_targets.size());
    for (std::size_t i = 0; i < y_targets.size(); ++i) {
        target_pred[i] = draw.c_model.beta(0) + draw.c_model.beta(1) * y_targets[i];
    }
    const auto picks = pmm_match(draw.donor_c_hat, target_pred, donors, rng);

    PolyCombResult result;
    result.pairs.reserve(y_targets.size());
    for (std::size_t i = 0; i < y_targets.size(); ++i) {
        const double c = draw.donor_c[static_cast<std::size_t>(picks[i])];
        const QuadRoots roots = polycomb_roots(draw.b1, draw.b2, c);
        if (roots.vertex_fallback) ++result.vertex_fallbacks;
        double x;
        if (roots.linear_fallback || roots.vertex_fallback) {
            x = roots.upper;
        } else {
            const double p_upper =
                logistic(draw.side_beta(0) + draw.side_beta(1) * y_targets[i]);
            x = rng.bernoulli(p_upper) ? roots.upper : roots.lower;
        }
        result.pairs.push_back({x, x * x});
    }
    return result;
}

PolyCombResult impute_polycomb(const std::vector<double>& y, const std::vector<std::uint8_t>& x_observed,
                               const std::vector<double>& x, const std::vector<int>& rows_missing,
                               int donors, RngStream& rng) {
    const PolyCombDraw draw = draw_polycomb(y, x_observed, x, rng);
    std::vector<double> y_targets;
    y_targets.reserve(rows_missing.size());
    for (int r : rows_missing) y_targets.push_back(y[static_cast<std::size_t>(r)]);
    return impute_polycomb_values(draw, y_targets, donors, rng);
}

SmcFcsResult impute_smcfcs_quadratic(const std::vector<double>& y_targets,
                                     const LinRegDraw& substantive, const LinRegDraw& covariate,
                                     RngStream& rng, int max_proposals) {
    if (substantive.beta.size() != 3) throw NumericError("substantive draw must have 3 coefficients");
    if (covariate.beta.size() != 1) throw NumericError("covariate draw must be intercept-only");
    const double a0 = substantive.beta(0);
    const double b1 = substantive.beta(1);
    const double b2 = substantive.beta(2);
    const double sd = std::sqrt(substantive.sigma2);
    const double mu_x = covariate.beta(0);
    const double sd_x = std::sqrt(covariate.sigma2);

    auto conditional_mean = [&](double x) { return a0 + b1 * x + b2 * x * x; };

    SmcFcsResult result;
    result.pairs.reserve(y_targets.size());
    for (double y : y_targets) {
        // The conditional density of y given x peaks where the parabola comes
        // closest to y; bounding there keeps the acceptance ratio below 1.
        double closest_mean = y;
        if (std::abs(b2) > kQuadDegenerate) {
            const double vertex_mean = a0 - b1 * b1 / (4.0 * b2);
            if (b2 > 0.0 && y < vertex_mean) closest_mean = vertex_mean;
            if (b2 < 0.0 && y > vertex_mean) closest_mean = vertex_mean;
        }
        const double bound = 1.05 * normal_pdf(y, closest_mean, sd);

        double best_x = mu_x;
        double best_density = -1.0;
        bool accepted = false;
        for (int t = 0; t < max_proposals; ++t) {
            const double x = mu_x + sd_x * rng.normal();
            const double density = normal_pdf(y, conditional_mean(x), sd);
            if (density > best_density) {
                best_density = density;
                best_x = x;
            }
            if (rng.uniform() < density / bound) {
                result.pairs.push_back({x, x * x});
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            ++result.cap_fallbacks;
            result.pairs.push_back({best_x, best_x * best_x});
        }
    }
    return result;
}

}  // namespace mippc
