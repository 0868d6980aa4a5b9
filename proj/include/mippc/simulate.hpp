#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mippc/amputation.hpp"
#include "mippc/dataset.hpp"
#include "mippc/engine.hpp"
#include "mippc/ppc.hpp"

namespace mippc {

// The three benchmark designs: a quadratic outcome with incomplete response, a
// quadratic model with jointly missing covariate and square, and a logistic
// outcome with two complete covariates.
enum class Scenario { QuadOutcome = 1, QuadCovariate = 2, LogisticOutcome = 3 };

struct ScenarioSpec {
    Scenario scenario = Scenario::QuadOutcome;
    int n = 1000;
    std::vector<double> proportions = {0.3, 0.5, 0.8};
    std::vector<Mechanism> mechanisms = {Mechanism::Mcar, Mechanism::Marr};
    std::vector<double> levels = {0.75, 0.95};
    int m = 50;
    std::uint64_t seed = 1;
    int repetitions = 0;  // > 0 enables the pooled-coefficient study (scenario 2)
};

// x ~ U(-3,3), x2 = x^2, y = x + x^2 + N(0,1).
Dataset gen_scenario1(int n, RngStream& rng);
// x ~ N(0,1), x2 = x^2, y = x + x^2 + N(0,1).
Dataset gen_scenario2(int n, RngStream& rng);
// x ~ U(-3,3), z ~ N(1,1), y ~ Bernoulli(logistic(x + z)).
Dataset gen_scenario3(int n, RngStream& rng);

struct ScenarioRow {
    std::string mechanism;
    double proportion = 0.0;
    std::string model;
    double level = 0.0;
    double cov = 0.0;
    double distance = 0.0;
    double ciw = 0.0;
    std::optional<double> deviance;
};

// One incomplete dataset per factor combination, imputed m times under every
// candidate model, summarised into coverage/distance/width (plus deviance for
// the binary scenario) per nominal level.
std::vector<ScenarioRow> run_scenario(const ScenarioSpec& spec);

void write_scenario_csv(const std::vector<ScenarioRow>& rows, const std::filesystem::path& path);

// Per-factor-cell diagnostics bundle for the figure-style checks: the full
// report plus the multiply-imputed result for one model.
struct ScenarioCellRun {
    Dataset amputed;
    MultiplyImputed result;
};

// Runs one factor cell of a scenario under one named model; used by the
// plot emitters and the acceptance checks.
ScenarioCellRun run_scenario_cell(Scenario scenario, int n, Mechanism mechanism, double proportion,
                                  const std::string& model, int m, std::uint64_t seed);

struct PoolingStudyResult {
    double beta1_mean = 0.0;  // average pooled linear coefficient
    double beta2_mean = 0.0;  // average pooled quadratic coefficient
    double beta1_coverage = 0.0;
    double beta2_coverage = 0.0;
    int repetitions = 0;
};

// Repeated-design check of the pair imputer: scenario-2 data under MCAR at the
// given proportion, PMM pair imputation, substantive fit y ~ x + x^2 pooled
// across the m completed datasets per repetition.
PoolingStudyResult run_pooling_study(int n, double proportion, int m, int repetitions,
                                     std::uint64_t seed);

void write_pooling_csv(const PoolingStudyResult& result, const std::filesystem::path& path);

struct Strategy {
    std::string name;
    std::map<std::string, ImputerSpec> methods;
};

std::vector<Strategy> strategies_from_json(const std::string& json_text, const Dataset& data);

struct StrategyRow {
    std::string strategy;
    std::string variable;
    double cov = 0.0;
    double distance = 0.0;
    double ciw = 0.0;
};

// Evaluates each strategy on the user-supplied data: every incomplete column
// must be covered by every strategy; observed cells of the imputed columns are
// replicated and summarised per variable.
std::vector<StrategyRow> run_strategy_comparison(const Dataset& data,
                                                 const std::vector<Strategy>& strategies,
                                                 double level, int m, std::uint64_t seed,
                                                 int maxit = 10);

void write_strategy_csv(const std::vector<StrategyRow>& rows, const std::filesystem::path& path);

// Rubin's rules: pooled estimate is the mean; total variance adds the
// between-imputation spread with the (1 + 1/m) correction.
struct PooledEstimate {
    double estimate = 0.0;
    double total_variance = 0.0;
    double df = 0.0;  // Rubin degrees of freedom for the t interval
};

PooledEstimate pool_rubin(std::span<const double> estimates, std::span<const double> variances);

}  // namespace mippc
