#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mippc/amputation.hpp"
#include "mippc/dataset.hpp"
#include "mippc/engine.hpp"
#include "mippc/plots.hpp"
#include "mippc/ppc.hpp"
#include "mippc/simulate.hpp"

namespace {

using namespace mippc;

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::map<std::string, ColumnKind> schema_from_binary_list(const std::string& binary_cols) {
    std::map<std::string, ColumnKind> schema;
    for (const auto& name : split_list(binary_cols)) schema[name] = ColumnKind::Binary;
    return schema;
}

std::map<std::string, double> parse_weights(const std::string& text) {
    std::map<std::string, double> weights;
    for (const auto& item : split_list(text)) {
        const auto pos = item.find('=');
        if (pos == std::string::npos) {
            throw CLI::ValidationError("--weights expects name=value pairs, got '" + item + "'");
        }
        weights[item.substr(0, pos)] = std::stod(item.substr(pos + 1));
    }
    return weights;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_ampute(const std::string& in_path, const std::string& out_path, const std::string& mechanism,
               double proportion, const std::string& pattern, const std::string& weights,
               std::uint64_t seed, const std::string& binary_cols) {
    const Dataset data = load_csv(in_path, schema_from_binary_list(binary_cols));
    AmputeSpec spec;
    spec.mechanism = mechanism == "marr" ? Mechanism::Marr : Mechanism::Mcar;
    spec.proportion = proportion;
    spec.pattern.targets = split_list(pattern);
    spec.pattern.weights = parse_weights(weights);
    const Dataset amputed = ampute(data, spec, RngStream(seed));
    write_csv(amputed, out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int run_simulate(int scenario, int n, int m, const std::string& props, const std::string& mechs,
                 const std::string& levels, std::uint64_t seed, const std::string& out_dir,
                 int repetitions) {
    ScenarioSpec spec;
    spec.scenario = static_cast<Scenario>(scenario);
    spec.n = n;
    spec.m = m;
    spec.seed = seed;
    spec.repetitions = repetitions;
    spec.proportions.clear();
    for (const auto& p : split_list(props)) spec.proportions.push_back(std::stod(p) / 100.0);
    spec.mechanisms.clear();
    for (const auto& mech : split_list(mechs)) {
        spec.mechanisms.push_back(mech == "marr" ? Mechanism::Marr : Mechanism::Mcar);
    }
    spec.levels.clear();
    for (const auto& l : split_list(levels)) spec.levels.push_back(std::stod(l) / 100.0);

    std::filesystem::create_directories(out_dir);
    const auto rows = run_scenario(spec);
    const std::string names[] = {"", "outcome_quadratic", "covariate_quadratic", "outcome_logistic"};
    const auto table_path = std::filesystem::path(out_dir) / (names[scenario] + ".csv");
    write_scenario_csv(rows, table_path);
    std::cout << "wrote " << table_path.string() << "\n";

    if (scenario == 2 && repetitions > 0) {
        const auto pooled = run_pooling_study(n, spec.proportions.front(), m, repetitions, seed);
        const auto pooled_path = std::filesystem::path(out_dir) / "pooled_coefficients.csv";
        write_pooling_csv(pooled, pooled_path);
        std::cout << "wrote " << pooled_path.string() << "\n";
    }
    return 0;
}

int run_compare(const std::string& in_path, const std::string& strategies_path, double level, int m,
                std::uint64_t seed, const std::string& out_path, const std::string& binary_cols,
                int maxit) {
    const Dataset data = load_csv(in_path, schema_from_binary_list(binary_cols));
    const auto strategies = strategies_from_json(read_file(strategies_path), data);
    const auto rows = run_strategy_comparison(data, strategies, level / 100.0, m, seed, maxit);
    write_strategy_csv(rows, out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int run_diagnose(const std::string& in_path, const std::string& config_path, double level,
                 const std::string& out_dir, const std::string& binary_cols, int p_draws) {
    const Dataset data = load_csv(in_path, schema_from_binary_list(binary_cols));
    EngineConfig cfg = engine_config_from_json(read_file(config_path), data);

    // Replicate the observed cells of every modelled column on top of
    // imputing its missing cells.
    for (const auto& [target, spec] : cfg.specs) {
        cfg.where.set_column(static_cast<std::size_t>(data.find_column(target)), true);
        if (!spec.square_column.empty()) {
            cfg.where.set_column(static_cast<std::size_t>(data.find_column(spec.square_column)), true);
        }
    }

    const MultiplyImputed result = run_fcs(data, cfg);
    PpcReport report = cell_diagnostics(result, level / 100.0);
    if (p_draws > 0) {
        // default discrepancy check: T = completed-data mean of the variable
        for (const auto& [target, spec] : cfg.specs) {
            (void)spec;
            const Statistic stat = [target](const Dataset& d) {
                const auto& values = d.column(target).values;
                double s = 0.0;
                for (double v : values) s += v;
                return s / static_cast<double>(values.size());
            };
            report.p_values[target] = p_b_com(data, cfg, stat, p_draws).p_value;
        }
    }

    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    write_report_cells_csv(report, dir / "report_cells.csv");
    write_report_summary_json(report, dir / "report_summary.json");
    if (cfg.maxit >= 2) write_trace_csv(chain_trace_summary(result), dir / "trace.csv");

    for (const auto& [target, spec] : cfg.specs) {
        const auto& col = data.column(target);
        if (col.kind == ColumnKind::Binary) {
            emit_deviance_plot(deviance_summary(result, target), dir / ("deviance_" + target + ".csv"));
        } else {
            emit_distribution_plot(report, target, dir / ("distribution_" + target + ".csv"));
            emit_density_data(result, target, dir / ("density_" + target + ".csv"));
        }
        if (!spec.predictors.empty()) {
            emit_scatter_data(result, spec.predictors.front(), target,
                              dir / ("scatter_" + target + ".csv"));
        }
    }
    std::cout << "wrote diagnostics to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiple imputation with posterior predictive model checking"};
    app.require_subcommand(1);

    std::string in_path, out_path, out_dir = "out";
    std::string mechanism = "mcar", pattern, weights, binary_cols;
    std::string props = "30,50,80", mechs = "mcar,marr", levels = "75,95";
    std::string strategies_path, config_path;
    double proportion = 0.3, level = 95.0;
    int scenario = 1, n = 1000, m = 50, repetitions = 0, maxit = 10, p_draws = 200;
    std::uint64_t seed = 1;

    auto* ampute_cmd = app.add_subcommand("ampute", "Generate missingness in a complete dataset");
    ampute_cmd->add_option("--in", in_path, "input CSV")->required();
    ampute_cmd->add_option("--out", out_path, "output CSV")->required();
    ampute_cmd->add_option("--mechanism", mechanism, "mcar or marr")
        ->check(CLI::IsMember({"mcar", "marr"}));
    ampute_cmd->add_option("--prop", proportion, "missingness proportion in (0,1)")->required();
    ampute_cmd->add_option("--pattern", pattern, "comma-separated target columns")->required();
    ampute_cmd->add_option("--weights", weights, "wss weights, e.g. x=1,z=0.5");
    ampute_cmd->add_option("--seed", seed, "rng seed");
    ampute_cmd->add_option("--binary", binary_cols, "comma-separated binary columns");

    auto* sim_cmd = app.add_subcommand("simulate", "Run a benchmark scenario and emit its tables");
    sim_cmd->add_option("--scenario", scenario, "1, 2 or 3")->check(CLI::Range(1, 3))->required();
    sim_cmd->add_option("--n", n, "sample size");
    sim_cmd->add_option("--m", m, "number of imputations");
    sim_cmd->add_option("--props", props, "missingness percentages, e.g. 30,50,80");
    sim_cmd->add_option("--mech", mechs, "mechanisms, e.g. mcar,marr");
    sim_cmd->add_option("--levels", levels, "nominal levels in percent, e.g. 75,95");
    sim_cmd->add_option("--seed", seed, "rng seed");
    sim_cmd->add_option("--out", out_dir, "output directory");
    sim_cmd->add_option("--repetitions", repetitions,
                        "repetitions for the pooled-coefficient study (scenario 2)");

    auto* cmp_cmd = app.add_subcommand("compare", "Score imputation strategies on your data");
    cmp_cmd->add_option("--in", in_path, "input CSV")->required();
    cmp_cmd->add_option("--strategies", strategies_path, "strategies JSON")->required();
    cmp_cmd->add_option("--level", level, "nominal level in percent");
    cmp_cmd->add_option("--m", m, "number of imputations");
    cmp_cmd->add_option("--seed", seed, "rng seed");
    cmp_cmd->add_option("--maxit", maxit, "sweeps per chain");
    cmp_cmd->add_option("--out", out_path, "output CSV")->required();
    cmp_cmd->add_option("--binary", binary_cols, "comma-separated binary columns");

    auto* diag_cmd = app.add_subcommand("diagnose", "Replicate observed cells and report model fit");
    diag_cmd->add_option("--in", in_path, "input CSV")->required();
    diag_cmd->add_option("--config", config_path, "engine config JSON")->required();
    diag_cmd->add_option("--level", level, "nominal level in percent");
    diag_cmd->add_option("--out", out_dir, "output directory");
    diag_cmd->add_option("--binary", binary_cols, "comma-separated binary columns");
    diag_cmd->add_option("--p-draws", p_draws,
                         "draws for the per-variable discrepancy p-value (0 disables)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (ampute_cmd->parsed()) {
            return run_ampute(in_path, out_path, mechanism, proportion, pattern, weights, seed,
                              binary_cols);
        }
        if (sim_cmd->parsed()) {
            return run_simulate(scenario, n, m, props, mechs, levels, seed, out_dir, repetitions);
        }
        if (cmp_cmd->parsed()) {
            return run_compare(in_path, strategies_path, level, m, seed, out_path, binary_cols,
                               maxit);
        }
        if (diag_cmd->parsed()) {
            return run_diagnose(in_path, config_path, level, out_dir, binary_cols, p_draws);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
