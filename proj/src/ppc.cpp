#include "mippc/ppc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "mippc/stats.hpp"

namespace mippc {

PpcReport cell_diagnostics(const MultiplyImputed& result, double level) {
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("nominal level must lie in (0, 1)");
    if (result.replicates.empty()) throw ConfigError("no replicated observed cells to diagnose");
    PpcReport report;
    report.level = level;
    if (result.m < 20) {
        report.warnings.push_back("fewer than 20 replicates per cell; interval estimates are rough");
    }
    for (const auto& [name, count] : result.draw_fallbacks) {
        report.warnings.push_back("column " + name + ": " + std::to_string(count) +
                                  " draw fallbacks (vertex point or proposal cap)");
    }

    const double z = normal_quantile(0.5 * (1.0 + level));
    for (const auto& [name, cells] : result.replicates) {
        VariableSummary summary;
        summary.column = name;
        const Column& col = result.original.column(name);
        std::size_t covered_count = 0;
        double distance_sum = 0.0;
        double width_sum = 0.0;
        for (const auto& cell : cells) {
            ObsCellDiag diag;
            diag.row = cell.row;
            diag.column = name;
            diag.observed = col.values[cell.row];
            diag.rep_mean = mean(cell.values);
            const double sd = cell.values.size() > 1 ? sample_sd(cell.values) : 0.0;
            diag.lo = diag.rep_mean - z * sd;
            diag.hi = diag.rep_mean + z * sd;
            diag.covered = diag.lo <= diag.observed && diag.observed <= diag.hi;
            diag.distance = std::abs(diag.observed - diag.rep_mean);
            covered_count += diag.covered ? 1 : 0;
            distance_sum += diag.distance;
            width_sum += diag.hi - diag.lo;
            report.cells.push_back(std::move(diag));
        }
        summary.n_cells = cells.size();
        if (!cells.empty()) {
            const double n = static_cast<double>(cells.size());
            summary.cov = static_cast<double>(covered_count) / n;
            summary.distance = distance_sum / n;
            summary.ciw = width_sum / n;
        }
        if (col.kind == ColumnKind::Binary) {
            summary.deviance = deviance_summary(result, name).mean_squared_deviance;
        }
        report.variables.push_back(std::move(summary));
    }
    return report;
}

void write_report_cells_csv(const PpcReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "row,column,observed,rep_mean,lo,hi,covered,distance\n";
    for (const auto& cell : report.cells) {
        out << cell.row << ',' << cell.column << ',' << format_numeric(cell.observed) << ','
            << format_numeric(cell.rep_mean) << ',' << format_numeric(cell.lo) << ','
            << format_numeric(cell.hi) << ',' << (cell.covered ? 1 : 0) << ','
            << format_numeric(cell.distance) << '\n';
    }
}

void write_report_summary_json(const PpcReport& report, const std::filesystem::path& path) {
    nlohmann::json j;
    j["level"] = report.level;
    auto& vars = j["variables"];
    for (const auto& v : report.variables) {
        nlohmann::json item;
        item["n_cells"] = v.n_cells;
        item["cov"] = v.cov;
        item["distance"] = v.distance;
        item["ciw"] = v.ciw;
        if (v.deviance) item["deviance"] = *v.deviance;
        const auto pit = report.p_values.find(v.column);
        if (pit != report.p_values.end()) item["p_com"] = pit->second;
        vars[v.column] = std::move(item);
    }
    j["warnings"] = report.warnings;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

DevianceSummary deviance_summary(const MultiplyImputed& result, const std::string& target) {
    const Column& col = result.original.column(target);
    if (col.kind != ColumnKind::Binary) throw SchemaError("deviance needs a binary column: " + target);
    const auto it = result.replicates.find(target);
    if (it == result.replicates.end() || it->second.empty()) {
        throw ConfigError("no replicates for column " + target);
    }

    DevianceSummary summary;
    summary.column = target;
    const double m = static_cast<double>(result.m);
    const double clamp = 1.0 / (2.0 * m);
    double squared_sum = 0.0;
    for (const auto& cell : it->second) {
        DevianceCell d;
        d.row = cell.row;
        d.observed = col.values[cell.row];
        double ones = 0.0;
        for (double v : cell.values) ones += (v == 1.0) ? 1.0 : 0.0;
        d.p_hat = std::min(1.0 - clamp, std::max(clamp, ones / m));
        const double loglik = d.observed * std::log(d.p_hat) + (1.0 - d.observed) * std::log(1.0 - d.p_hat);
        const double magnitude = std::sqrt(-2.0 * loglik);
        d.residual = d.observed >= d.p_hat ? magnitude : -magnitude;
        squared_sum += magnitude * magnitude;
        summary.cells.push_back(std::move(d));
    }
    summary.mean_squared_deviance = squared_sum / static_cast<double>(summary.cells.size());
    return summary;
}

DiscrepancyResult ppc_pvalue(std::span<const double> observed_stats,
                             std::span<const double> replicate_stats, const std::string& statistic) {
    if (replicate_stats.empty()) throw NumericError("p-value estimator needs at least one draw");
    if (observed_stats.size() != 1 && observed_stats.size() != replicate_stats.size()) {
        throw NumericError("observed statistics must have length 1 or match the replicate draws");
    }
    std::size_t count = 0;
    for (std::size_t j = 0; j < replicate_stats.size(); ++j) {
        const double obs = observed_stats.size() == 1 ? observed_stats[0] : observed_stats[j];
        if (replicate_stats[j] >= obs) ++count;
    }
    DiscrepancyResult result;
    result.p_value = static_cast<double>(count) / static_cast<double>(replicate_stats.size());
    result.n_outer = static_cast<int>(replicate_stats.size());
    result.statistic = statistic;
    return result;
}

namespace {

// Streams shared by the two discrepancy estimators so that, under a common
// seed, outer draw j and inner replicate k coincide between them.
struct DiscrepancyStreams {
    RngStream chain;
    RngStream replicates;
};

DiscrepancyStreams discrepancy_streams(const EngineConfig& config) {
    const RngStream root(config.seed);
    return {root.split(0x5ce9), root.split(0x4e9c)};
}

}  // namespace

DiscrepancyResult p_b_com(const Dataset& data, const EngineConfig& config, const Statistic& stat,
                          int n_draws) {
    if (n_draws < 1) throw ConfigError("p_b_com needs at least one draw");
    // The chain must condition on the genuinely observed data throughout.
    EngineConfig chain_config = config;
    chain_config.ppc_mode = PpcMode::Retain;
    auto streams = discrepancy_streams(chain_config);
    FcsChain chain(data, chain_config, streams.chain);
    chain.initialize();
    for (int t = 0; t < chain_config.maxit; ++t) chain.iterate();

    std::vector<double> observed_stats;
    std::vector<double> replicate_stats;
    observed_stats.reserve(static_cast<std::size_t>(n_draws));
    replicate_stats.reserve(static_cast<std::size_t>(n_draws));
    for (int j = 0; j < n_draws; ++j) {
        chain.iterate();
        const Dataset completed = chain.completed();
        const Dataset replicate =
            chain.replicate_all(streams.replicates.split(static_cast<std::uint64_t>(j)).split(0));
        observed_stats.push_back(stat(completed));
        replicate_stats.push_back(stat(replicate));
    }

    auto result = ppc_pvalue(observed_stats, replicate_stats, "completed-data discrepancy");
    return result;
}

DiscrepancyResult p_b_ecom(const Dataset& data, const EngineConfig& config, const Statistic& stat,
                           int n_outer, int n_inner) {
    if (n_outer < 1) throw ConfigError("p_b_ecom needs at least one outer draw");
    if (n_inner < 1) throw ConfigError("p_b_ecom needs at least one inner draw");
    EngineConfig chain_config = config;
    chain_config.ppc_mode = PpcMode::Retain;
    auto streams = discrepancy_streams(chain_config);
    FcsChain chain(data, chain_config, streams.chain);
    chain.initialize();
    for (int t = 0; t < chain_config.maxit; ++t) chain.iterate();

    // Columns whose missing cells get refreshed per inner draw.
    std::vector<std::pair<std::size_t, std::vector<std::size_t>>> missing_cells;
    for (std::size_t c = 0; c < data.cols(); ++c) {
        const auto& col = data.column(c);
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < data.rows(); ++r) {
            if (!col.observed[r]) rows.push_back(r);
        }
        if (!rows.empty()) missing_cells.emplace_back(c, std::move(rows));
    }

    std::size_t positive = 0;
    for (int j = 0; j < n_outer; ++j) {
        chain.iterate();
        const Dataset completed = chain.completed();
        const RngStream outer = streams.replicates.split(static_cast<std::uint64_t>(j));
        double diff_sum = 0.0;
        for (int k = 0; k < n_inner; ++k) {
            const Dataset replicate = chain.replicate_all(outer.split(static_cast<std::uint64_t>(k)));
            // Both sides share the replicate's fresh missing-cell draws; only
            // the observed positions differ.
            Dataset with_observed = completed;
            for (const auto& [c, rows] : missing_cells) {
                for (std::size_t r : rows) {
                    with_observed.column(c).values[r] = replicate.column(c).values[r];
                }
            }
            diff_sum += stat(replicate) - stat(with_observed);
        }
        if (diff_sum / static_cast<double>(n_inner) >= 0.0) ++positive;
    }

    DiscrepancyResult result;
    result.p_value = static_cast<double>(positive) / static_cast<double>(n_outer);
    result.n_outer = n_outer;
    result.n_inner = n_inner;
    result.statistic = "expected completed-data discrepancy";
    return result;
}

}  // namespace mippc
