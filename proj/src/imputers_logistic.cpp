#include <cmath>

#include "mippc/errors.hpp"
#include "mippc/imputers.hpp"
#include "mippc/stats.hpp"

namespace mippc {

namespace {

constexpr double kIrlsTolerance = 1e-8;
constexpr int kIrlsMaxIterations = 50;
constexpr double kSeparationBound = 25.0;

struct IrlsFit {
    Eigen::VectorXd beta;
    Eigen::MatrixXd information;
    bool converged = false;
    bool bounded = true;  // stayed under the separation bound
};

IrlsFit irls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    const auto p = X.cols();
    IrlsFit fit;
    fit.beta = Eigen::VectorXd::Zero(p);
    for (int it = 0; it < kIrlsMaxIterations; ++it) {
        const Eigen::VectorXd eta = X * fit.beta;
        Eigen::VectorXd prob(eta.size());
        Eigen::VectorXd w(eta.size());
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            double pi = logistic(eta(i));
            pi = std::min(1.0 - 1e-10, std::max(1e-10, pi));
            prob(i) = pi;
            w(i) = pi * (1.0 - pi);
        }
        fit.information = X.transpose() * w.asDiagonal() * X;
        const Eigen::VectorXd grad = X.transpose() * (y - prob);
        const Eigen::VectorXd step = fit.information.ldlt().solve(grad);
        if (!step.allFinite()) return fit;
        fit.beta += step;
        if (fit.beta.cwiseAbs().maxCoeff() > kSeparationBound) {
            fit.bounded = false;
            return fit;
        }
        if (step.cwiseAbs().maxCoeff() < kIrlsTolerance) {
            fit.converged = true;
            return fit;
        }
    }
    return fit;
}

}  // namespace

LogRegDraw draw_bayes_logreg(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, RngStream& rng) {
    const auto n = X.rows();
    const auto p = X.cols();
    if (y.size() != n) throw NumericError("design and response lengths differ");
    if (n < p + 1) throw NumericError("too few rows for a logistic regression draw");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (y(i) != 0.0 && y(i) != 1.0) throw SchemaError("logistic response must be 0/1");
    }

    LogRegDraw draw;
    IrlsFit fit = irls(X, y);
    if (!fit.converged) {
        // Separation or divergence: add one pseudo-observation of each class
        // at the predictor mean and refit.
        const Eigen::RowVectorXd xbar = X.colwise().mean();
        Eigen::MatrixXd Xa(n + 2, p);
        Eigen::VectorXd ya(n + 2);
        Xa.topRows(n) = X;
        ya.head(n) = y;
        Xa.row(n) = xbar;
        Xa.row(n + 1) = xbar;
        ya(n) = 0.0;
        ya(n + 1) = 1.0;
        fit = irls(Xa, ya);
        draw.shrinkage_applied = true;
        if (!fit.converged) throw NumericError("logistic regression did not converge");
    }

    draw.mle = fit.beta;
    Eigen::LLT<Eigen::MatrixXd> llt(fit.information);
    if (llt.info() != Eigen::Success) throw NumericError("singular logistic information matrix");
    draw.cov = llt.solve(Eigen::MatrixXd::Identity(p, p));

    Eigen::VectorXd z(p);
    for (Eigen::Index j = 0; j < p; ++j) z(j) = rng.normal();
    draw.beta = draw.mle + llt.matrixU().solve(z);
    if (!draw.beta.allFinite()) throw NumericError("non-finite logistic coefficient draw");
    return draw;
}

std::vector<double> impute_logreg(const LogRegDraw& draw, const Eigen::MatrixXd& X_target,
                                  RngStream& rng) {
    if (X_target.cols() != draw.beta.size()) throw NumericError("design width does not match draw");
    const Eigen::VectorXd eta = X_target * draw.beta;
    std::vector<double> out(static_cast<std::size_t>(eta.size()));
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        out[static_cast<std::size_t>(i)] = rng.bernoulli(logistic(eta(i))) ? 1.0 : 0.0;
    }
    return out;
}

}  // namespace mippc
