#include <algorithm>
#include <cmath>
#include <numeric>

#include "mippc/errors.hpp"
#include "mippc/imputers.hpp"

namespace mippc {

Method method_from_name(const std::string& name) {
    if (name == "norm") return Method::Norm;
    if (name == "pmm") return Method::Pmm;
    if (name == "polycomb") return Method::PolyComb;
    if (name == "smcfcs-quad") return Method::SmcFcsQuad;
    if (name == "logreg") return Method::LogReg;
    throw ConfigError("unknown imputation method: " + name);
}

std::string method_name(Method m) {
    switch (m) {
        case Method::Norm: return "norm";
        case Method::Pmm: return "pmm";
        case Method::PolyComb: return "polycomb";
        case Method::SmcFcsQuad: return "smcfcs-quad";
        case Method::LogReg: return "logreg";
    }
    return "?";
}

LinRegDraw draw_bayes_linreg(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, RngStream& rng) {
    const auto n = X.rows();
    const auto p = X.cols();
    if (y.size() != n) throw NumericError("design and response lengths differ");
    if (n < p + 1) throw NumericError("too few rows for a Bayesian regression draw");

    Eigen::MatrixXd gram = X.transpose() * X;
    const double tr = gram.trace();
    if (!(tr > 0.0) || !std::isfinite(tr)) {
        throw NumericError("rank-deficient design beyond ridge rescue");
    }
    const double ridge = 1e-8 * tr / static_cast<double>(p);
    for (Eigen::Index j = 0; j < p; ++j) gram(j, j) += ridge;

    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) {
        throw NumericError("rank-deficient design beyond ridge rescue");
    }

    LinRegDraw draw;
    draw.beta_hat = llt.solve(X.transpose() * y);
    if (!draw.beta_hat.allFinite()) throw NumericError("non-finite least-squares solution");

    const Eigen::VectorXd resid = y - X * draw.beta_hat;
    const double ssr = std::max(resid.squaredNorm(), 1e-30);
    const double df = static_cast<double>(n - p);
    draw.sigma2 = ssr / rng.chi_square(df);

    Eigen::VectorXd z(p);
    for (Eigen::Index j = 0; j < p; ++j) z(j) = rng.normal();
    // cov(beta) = sigma2 * gram^-1 = sigma2 * L^-T L^-1, so L^-T z has the
    // right covariance.
    draw.beta = draw.beta_hat +
                std::sqrt(draw.sigma2) *
                    llt.matrixU().solve(z);
    if (!draw.beta.allFinite()) throw NumericError("non-finite coefficient draw");
    return draw;
}

std::vector<double> impute_norm(const LinRegDraw& draw, const Eigen::MatrixXd& X_target,
                                RngStream& rng) {
    if (X_target.cols() != draw.beta.size()) throw NumericError("design width does not match draw");
    const Eigen::VectorXd mu = X_target * draw.beta;
    const double sd = std::sqrt(draw.sigma2);
    std::vector<double> out(static_cast<std::size_t>(mu.size()));
    for (Eigen::Index i = 0; i < mu.size(); ++i) out[static_cast<std::size_t>(i)] = mu(i) + sd * rng.normal();
    return out;
}

std::vector<int> pmm_match(const std::vector<double>& donor_pred,
                           const std::vector<double>& target_pred, int donors, RngStream& rng) {
    if (donors < 1) throw ConfigError("donor count must be at least 1");
    if (static_cast<std::size_t>(donors) > donor_pred.size()) {
        throw NumericError("donor count exceeds number of observed rows");
    }
    const std::size_t d = static_cast<std::size_t>(donors);
    std::vector<std::pair<double, int>> ranked(donor_pred.size());
    std::vector<int> out;
    out.reserve(target_pred.size());
    for (double tp : target_pred) {
        for (std::size_t j = 0; j < donor_pred.size(); ++j) {
            ranked[j] = {std::abs(tp - donor_pred[j]), static_cast<int>(j)};
        }
        std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(d),
                          ranked.end());
        out.push_back(ranked[rng.uniform_index(d)].second);
    }
    return out;
}

std::vector<double> impute_pmm(const LinRegDraw& draw, const Eigen::MatrixXd& X_obs,
                               const std::vector<double>& y_obs, const Eigen::MatrixXd& X_target,
                               int donors, RngStream& rng) {
    if (static_cast<std::size_t>(X_obs.rows()) != y_obs.size()) {
        throw NumericError("observed design and response lengths differ");
    }
    const Eigen::VectorXd donor_mu = X_obs * draw.beta_hat;
    const Eigen::VectorXd target_mu = X_target * draw.beta;
    const std::vector<double> donor_pred(donor_mu.data(), donor_mu.data() + donor_mu.size());
    const std::vector<double> target_pred(target_mu.data(), target_mu.data() + target_mu.size());
    const auto picks = pmm_match(donor_pred, target_pred, donors, rng);
    std::vector<double> out(picks.size());
    for (std::size_t i = 0; i < picks.size(); ++i) out[i] = y_obs[static_cast<std::size_t>(picks[i])];
    return out;
}

}  // namespace mippc
