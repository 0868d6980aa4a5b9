#include "mippc/plots.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "mippc/stats.hpp"

namespace mippc {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

// Values the engine drew for `variable` in chain `k`: replicate-store entries
// at observed where-cells, completed-dataset entries at missing where-cells.
std::vector<double> drawn_values(const MultiplyImputed& result, const std::string& variable,
                                 std::size_t chain) {
    const std::size_t j = static_cast<std::size_t>(result.original.find_column(variable));
    const auto& observed = result.original.column(j).observed;
    const auto it = result.replicates.find(variable);
    std::vector<double> out;
    std::size_t cell_idx = 0;
    for (std::size_t r = 0; r < result.original.rows(); ++r) {
        if (!result.where.at(r, j)) continue;
        if (observed[r]) {
            out.push_back(it->second[cell_idx].values[chain]);
            ++cell_idx;
        } else {
            out.push_back(result.completed[chain].column(j).values[r]);
        }
    }
    return out;
}


double silverman_bandwidth(const std::vector<double>& v) {
    const double sd = sample_sd(v);
    const double iqr = quantile_type7(v, 0.75) - quantile_type7(v, 0.25);
    double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    if (!(spread > 0.0)) throw NumericError("degenerate series for density estimation");
    return 0.9 * spread * std::pow(static_cast<double>(v.size()), -0.2);
}

}  // namespace

void emit_distribution_plot(const PpcReport& report, const std::string& variable,
                            const std::filesystem::path& path) {
    std::vector<const ObsCellDiag*> cells;
    for (const auto& cell : report.cells) {
        if (cell.column == variable) cells.push_back(&cell);
    }
    if (cells.empty()) throw ConfigError("no diagnosed cells for variable " + variable);
    std::stable_sort(cells.begin(), cells.end(),
                     [](const ObsCellDiag* a, const ObsCellDiag* b) { return a->rep_mean < b->rep_mean; });

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "rank,mean,lo,hi,obs,covered\n";
    std::size_t rank = 1;
    for (const auto* cell : cells) {
        out << rank++ << ',' << format_numeric(cell->rep_mean) << ',' << format_numeric(cell->lo)
            << ',' << format_numeric(cell->hi) << ',' << format_numeric(cell->observed) << ','
            << (cell->covered ? 1 : 0) << '\n';
    }
}

void emit_density_data(const MultiplyImputed& result, const std::string& variable,
                       const std::filesystem::path& path, int grid_points) {
    const int j = result.original.find_column(variable);
    if (j < 0) throw ConfigError("unknown variable " + variable);
    if (result.original.column(variable).kind != ColumnKind::Continuous) {
        throw SchemaError("density plot needs a continuous variable");
    }
    if (grid_points < 2) throw ConfigError("density grid needs at least 2 points");

    std::vector<std::vector<double>> series;
    series.push_back(result.original.column(variable).observed_values());
    for (std::size_t c = 0; c < result.completed.size(); ++c) {
        series.push_back(drawn_values(result, variable, c));
    }

    std::vector<double> bandwidths;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    double bw_max = 0.0;
    for (const auto& s : series) {
        if (s.size() < 2) throw NumericError("density series needs at least 2 values");
        bandwidths.push_back(silverman_bandwidth(s));
        bw_max = std::max(bw_max, bandwidths.back());
        lo = std::min(lo, *std::min_element(s.begin(), s.end()));
        hi = std::max(hi, *std::max_element(s.begin(), s.end()));
    }
    lo -= 3.0 * bw_max;
    hi += 3.0 * bw_max;

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "series,grid_x,density\n";
    const double step = (hi - lo) / static_cast<double>(grid_points - 1);
    for (std::size_t s = 0; s < series.size(); ++s) {
        const double bw = bandwidths[s];
        const double norm = kInvSqrt2Pi / (bw * static_cast<double>(series[s].size()));
        for (int g = 0; g < grid_points; ++g) {
            const double x = lo + step * g;
            double density = 0.0;
            for (double v : series[s]) {
                const double t = (x - v) / bw;
                density += std::exp(-0.5 * t * t);
            }
            out << s << ',' << format_numeric(x) << ',' << format_numeric(density * norm) << '\n';
        }
    }
}

void emit_scatter_data(const MultiplyImputed& result, const std::string& x_var,
                       const std::string& y_var, const std::filesystem::path& path) {
    const int xj = result.original.find_column(x_var);
    const int yj = result.original.find_column(y_var);
    if (xj < 0) throw ConfigError("unknown variable " + x_var);
    if (yj < 0) throw ConfigError("unknown variable " + y_var);
    const auto& x_col = result.original.column(static_cast<std::size_t>(xj));
    const auto& y_col = result.original.column(static_cast<std::size_t>(yj));

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "panel,origin,x,y\n";
    for (std::size_t r = 0; r < result.original.rows(); ++r) {
        if (!y_col.observed[r] || !x_col.observed[r]) continue;
        out << 0 << ',' << 0 << ',' << format_numeric(x_col.values[r]) << ','
            << format_numeric(y_col.values[r]) << '\n';
    }
    for (std::size_t c = 0; c < result.completed.size(); ++c) {
        const auto& completed = result.completed[c];
        const auto& xc = completed.column(static_cast<std::size_t>(xj));
        const auto& yc = completed.column(static_cast<std::size_t>(yj));
        for (std::size_t r = 0; r < completed.rows(); ++r) {
            const bool drawn = result.where.at(r, static_cast<std::size_t>(yj)) &&
                               (result.ppc_mode == PpcMode::Overwrite || !y_col.observed[r]);
            out << (c + 1) << ',' << (drawn ? 1 : 0) << ',' << format_numeric(xc.values[r]) << ','
                << format_numeric(yc.values[r]) << '\n';
        }
    }
}

void emit_deviance_plot(const DevianceSummary& summary, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "index,p_hat,residual\n";
    for (const auto& cell : summary.cells) {
        out << cell.row << ',' << format_numeric(cell.p_hat) << ',' << format_numeric(cell.residual)
            << '\n';
    }
}

}  // namespace mippc
