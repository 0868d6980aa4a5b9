#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mippc/engine.hpp"

namespace mippc {

// Diagnostics for one observed cell against its m replicates.
struct ObsCellDiag {
    std::size_t row = 0;
    std::string column;
    double observed = 0.0;
    double rep_mean = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    bool covered = false;
    double distance = 0.0;  // |observed - rep_mean|
};

struct VariableSummary {
    std::string column;
    std::size_t n_cells = 0;
    double cov = 0.0;       // fraction of observed cells inside their interval
    double distance = 0.0;  // mean |observed - rep_mean|
    double ciw = 0.0;       // mean interval width
    std::optional<double> deviance;  // mean squared deviance, binary columns only
};

struct PpcReport {
    double level = 0.95;
    std::vector<ObsCellDiag> cells;
    std::vector<VariableSummary> variables;
    std::vector<std::string> warnings;
    // Optional per-variable discrepancy p-values, filled by callers that run
    // the p_b estimators alongside the cell diagnostics.
    std::map<std::string, double> p_values;
};

// Per-cell intervals at the nominal level are rep_mean +/- z sd over the m
// replicates; coverage, distance and width aggregate per variable.  Binary
// variables additionally get their deviance summary.
PpcReport cell_diagnostics(const MultiplyImputed& result, double level);

void write_report_cells_csv(const PpcReport& report, const std::filesystem::path& path);
void write_report_summary_json(const PpcReport& report, const std::filesystem::path& path);

struct DevianceCell {
    std::size_t row = 0;
    double observed = 0.0;
    double p_hat = 0.0;     // replicate success fraction, clamped to [1/(2m), 1-1/(2m)]
    double residual = 0.0;  // signed deviance residual
};

struct DevianceSummary {
    std::string column;
    std::vector<DevianceCell> cells;
    double mean_squared_deviance = 0.0;  // sum of squared residuals / n_obs
};

DevianceSummary deviance_summary(const MultiplyImputed& result, const std::string& target);

struct DiscrepancyResult {
    double p_value = 0.0;
    int n_outer = 0;
    int n_inner = 0;  // 0 unless the nested estimator produced it
    std::string statistic;
};

// p = #{ T_j(rep) >= T_j(obs) } / N, ties counted (inclusive >=).
// observed_stats has either one entry (theta-free statistic) or one per draw.
DiscrepancyResult ppc_pvalue(std::span<const double> observed_stats,
                             std::span<const double> replicate_stats,
                             const std::string& statistic = "T");

using Statistic = std::function<double(const Dataset&)>;

// Completed-data discrepancy p-value: N chain steps; each step imputes the
// missing cells, branches an all-cells replicate under the same parameter
// draw, and compares T(replicate) against T(completed).
DiscrepancyResult p_b_com(const Dataset& data, const EngineConfig& config, const Statistic& stat,
                          int n_draws);

// Expected completed-data discrepancy: N1 outer parameter draws, N2 inner
// over-imputations each.  Inner draw k redraws all cells of the spec'd
// columns; its missing-position values are shared by both sides of the
// difference, so only the observed-position replicates move it.
DiscrepancyResult p_b_ecom(const Dataset& data, const EngineConfig& config, const Statistic& stat,
                           int n_outer, int n_inner);

}  // namespace mippc
