#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mippc/rng.hpp"

namespace mippc {

// One posterior draw from a Bayesian linear regression under the standard
// noninformative prior.  beta_hat (the least-squares fit) is kept because
// type-1 predictive mean matching predicts donors with it.
struct LinRegDraw {
    Eigen::VectorXd beta;      // posterior draw, intercept first
    double sigma2 = 0.0;       // residual variance draw, > 0
    Eigen::VectorXd beta_hat;  // least-squares estimate
};

// One posterior draw from a logistic regression via the large-sample normal
// approximation around the MLE.
struct LogRegDraw {
    Eigen::VectorXd beta;           // posterior draw
    Eigen::VectorXd mle;            // IRLS maximum-likelihood estimate
    Eigen::MatrixXd cov;            // inverse observed information at the MLE
    bool shrinkage_applied = false; // separation was detected and pseudo-rows added
};

enum class Method { Norm, Pmm, PolyComb, SmcFcsQuad, LogReg };

Method method_from_name(const std::string& name);
std::string method_name(Method m);

// Per-variable imputation model.  `square_column` names the companion column
// holding the squared value for the pair methods (PolyComb, SmcFcsQuad, and
// pair-mode Pmm), which impute (x, x^2) jointly.  An empty predictor list means
// an intercept-only model.
struct ImputerSpec {
    Method method = Method::Pmm;
    std::vector<std::string> predictors;
    int donors = 5;
    std::string square_column;
};

// sigma2 is drawn as SSR/chisq(n - p); beta as N(beta_hat, sigma2 (X'X+kI)^-1)
// with ridge k = 1e-8 tr(X'X)/p so collinear designs stay solvable.
LinRegDraw draw_bayes_linreg(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, RngStream& rng);

// x.beta + N(0, sigma2), independently per row.
std::vector<double> impute_norm(const LinRegDraw& draw, const Eigen::MatrixXd& X_target,
                                RngStream& rng);

// Donor choice for predictive mean matching: for each target prediction, the
// `donors` observed rows with the smallest |target_pred - donor_pred|, ties
// broken by smaller row index, then one picked uniformly at random.
std::vector<int> pmm_match(const std::vector<double>& donor_pred,
                           const std::vector<double>& target_pred, int donors, RngStream& rng);

// Type-1 matching: donors predicted with beta_hat, targets with the beta draw;
// imputed values are the matched donors' observed y.
std::vector<double> impute_pmm(const LinRegDraw& draw, const Eigen::MatrixXd& X_obs,
                               const std::vector<double>& y_obs, const Eigen::MatrixXd& X_target,
                               int donors, RngStream& rng);

// IRLS fit (tolerance 1e-8, max 50 iterations).  Separation (divergence or
// |beta| > 25) triggers one retry with two pseudo-rows at the predictor mean,
// reported through `shrinkage_applied`.
LogRegDraw draw_bayes_logreg(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, RngStream& rng);

// Bernoulli(logistic(x.beta)) per row; returns 0/1 values.
std::vector<double> impute_logreg(const LogRegDraw& draw, const Eigen::MatrixXd& X_target,
                                  RngStream& rng);

// ---------------------------------------------------------------------------
// Imputers for a covariate and its square under the substantive model
// y = a + b1 x + b2 x^2 + e, with y complete and (x, x^2) jointly missing.
// ---------------------------------------------------------------------------

struct QuadPair {
    double x = 0.0;
    double x_sq = 0.0;
};

struct QuadRoots {
    double lower = 0.0;  // root on the left side of the vertex
    double upper = 0.0;  // root on the right side
    bool vertex_fallback = false;  // negative discriminant; both roots at the vertex
    bool linear_fallback = false;  // |b2| degenerate; solved linearly
};

// Real roots of b2 x^2 + b1 x - c = 0.  A negative discriminant returns the
// vertex point -b1/(2 b2) on both sides and flags it.
QuadRoots polycomb_roots(double b1, double b2, double c);

// Parameters of the polynomial-combination imputer, drawn once per sweep.
struct PolyCombDraw {
    double a0 = 0.0, b1 = 0.0, b2 = 0.0;  // substantive least-squares fit
    LinRegDraw c_model;                   // Bayesian draw for C = b1 x + b2 x^2 ~ y
    std::vector<double> donor_c;          // observed-row combinations (hot-deck pool)
    std::vector<double> donor_c_hat;      // type-1 donor predictions
    Eigen::VectorXd side_beta;            // logistic model for side-of-vertex given y
    bool side_shrinkage = false;
};

PolyCombDraw draw_polycomb(const std::vector<double>& y, const std::vector<std::uint8_t>& x_observed,
                           const std::vector<double>& x, RngStream& rng);

struct PolyCombResult {
    std::vector<QuadPair> pairs;
    int vertex_fallbacks = 0;
};

// PMM on the combination C with y as sole predictor, then root solving with a
// Bernoulli side draw from the logistic side model.
PolyCombResult impute_polycomb_values(const PolyCombDraw& draw, const std::vector<double>& y_targets,
                                      int donors, RngStream& rng);

// Convenience one-shot: parameter draw plus value draw.
PolyCombResult impute_polycomb(const std::vector<double>& y, const std::vector<std::uint8_t>& x_observed,
                               const std::vector<double>& x, const std::vector<int>& rows_missing,
                               int donors, RngStream& rng);

struct SmcFcsResult {
    std::vector<QuadPair> pairs;
    int cap_fallbacks = 0;  // rows that exhausted the proposal cap
};

// Rejection sampler for f(x | y) under the substantive draw, proposing from
// the covariate model (normal with drawn mean/variance).  The per-row bound is
// the conditional density at the parabola's closest attainable mean times a
// 1.05 safety factor; after `max_proposals` failures the best proposal seen is
// used and counted in `cap_fallbacks`.
SmcFcsResult impute_smcfcs_quadratic(const std::vector<double>& y_targets,
                                     const LinRegDraw& substantive, const LinRegDraw& covariate,
                                     RngStream& rng, int max_proposals = 10000);

}  // namespace mippc
