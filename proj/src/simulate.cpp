#include "mippc/simulate.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "json_util.hpp"
#include "mippc/stats.hpp"

namespace mippc {

namespace {

Column continuous(std::string name, std::vector<double> values) {
    Column col;
    col.name = std::move(name);
    col.kind = ColumnKind::Continuous;
    col.observed.assign(values.size(), 1);
    col.values = std::move(values);
    return col;
}

Column binary(std::string name, std::vector<double> values) {
    Column col = continuous(std::move(name), std::move(values));
    col.kind = ColumnKind::Binary;
    return col;
}

}  // namespace

Dataset gen_scenario1(int n, RngStream& rng) {
    if (n < 1) throw ConfigError("sample size must be positive");
    std::vector<double> x(static_cast<std::size_t>(n));
    std::vector<double> x2(static_cast<std::size_t>(n));
    std::vector<double> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double xi = rng.uniform(-3.0, 3.0);
        x[static_cast<std::size_t>(i)] = xi;
        x2[static_cast<std::size_t>(i)] = xi * xi;
        y[static_cast<std::size_t>(i)] = xi + xi * xi + rng.normal();
    }
    return Dataset({continuous("x", std::move(x)), continuous("x2", std::move(x2)),
                    continuous("y", std::move(y))});
}

Dataset gen_scenario2(int n, RngStream& rng) {
    if (n < 1) throw ConfigError("sample size must be positive");
    std::vector<double> x(static_cast<std::size_t>(n));
    std::vector<double> x2(static_cast<std::size_t>(n));
    std::vector<double> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double xi = rng.normal();
        x[static_cast<std::size_t>(i)] = xi;
        x2[static_cast<std::size_t>(i)] = xi * xi;
        y[static_cast<std::size_t>(i)] = xi + xi * xi + rng.normal();
    }
    return Dataset({continuous("x", std::move(x)), continuous("x2", std::move(x2)),
                    continuous("y", std::move(y))});
}

Dataset gen_scenario3(int n, RngStream& rng) {
    if (n < 1) throw ConfigError("sample size must be positive");
    std::vector<double> x(static_cast<std::size_t>(n));
    std::vector<double> z(static_cast<std::size_t>(n));
    std::vector<double> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double xi = rng.uniform(-3.0, 3.0);
        const double zi = 1.0 + rng.normal();
        x[static_cast<std::size_t>(i)] = xi;
        z[static_cast<std::size_t>(i)] = zi;
        y[static_cast<std::size_t>(i)] = rng.bernoulli(logistic(xi + zi)) ? 1.0 : 0.0;
    }
    return Dataset({continuous("x", std::move(x)), continuous("z", std::move(z)),
                    binary("y", std::move(y))});
}

namespace {

struct ScenarioModels {
    std::vector<std::string> names;
    std::string diagnosed;  // variable the report summarises
};

ScenarioModels scenario_models(Scenario scenario) {
    switch (scenario) {
        case Scenario::QuadOutcome: return {{"linear", "quadratic"}, "y"};
        case Scenario::QuadCovariate: return {{"pc", "smcfcs", "pmm"}, "x"};
        case Scenario::LogisticOutcome: return {{"with_x", "without_x"}, "y"};
    }
    throw ConfigError("unknown scenario");
}

AmputeSpec scenario_ampute_spec(Scenario scenario, Mechanism mechanism, double proportion) {
    AmputeSpec spec;
    spec.mechanism = mechanism;
    spec.proportion = proportion;
    switch (scenario) {
        case Scenario::QuadOutcome:
            spec.pattern.targets = {"y"};
            spec.pattern.weights = {{"x", 1.0}};
            break;
        case Scenario::QuadCovariate:
            spec.pattern.targets = {"x", "x2"};
            spec.pattern.weights = {{"y", 1.0}};
            break;
        case Scenario::LogisticOutcome:
            spec.pattern.targets = {"y"};
            spec.pattern.weights = {{"x", 1.0}, {"z", 1.0}};
            break;
    }
    return spec;
}

struct ModelSetup {
    std::map<std::string, ImputerSpec> specs;
    int maxit = 1;
};

ModelSetup scenario_model_setup(Scenario scenario, const std::string& model) {
    ModelSetup setup;
    ImputerSpec spec;
    switch (scenario) {
        case Scenario::QuadOutcome:
            spec.method = Method::Norm;
            spec.predictors = model == "quadratic" ? std::vector<std::string>{"x", "x2"}
                                                   : std::vector<std::string>{"x"};
            setup.specs["y"] = spec;
            return setup;
        case Scenario::QuadCovariate:
            // All three impute the (x, x2) pair jointly, so x2 = x^2 holds in
            // every completed dataset; pmm takes the matched donor's pair.
            if (model == "pc") spec.method = Method::PolyComb;
            else if (model == "smcfcs") spec.method = Method::SmcFcsQuad;
            else spec.method = Method::Pmm;
            spec.predictors = {"y"};
            spec.square_column = "x2";
            spec.donors = 5;
            setup.specs["x"] = spec;
            return setup;
        case Scenario::LogisticOutcome:
            spec.method = Method::LogReg;
            spec.predictors = model == "with_x" ? std::vector<std::string>{"x", "z"}
                                                : std::vector<std::string>{"z"};
            setup.specs["y"] = spec;
            return setup;
    }
    throw ConfigError("unknown scenario");
}

int model_index(const ScenarioModels& models, const std::string& model) {
    for (std::size_t i = 0; i < models.names.size(); ++i) {
        if (models.names[i] == model) return static_cast<int>(i);
    }
    throw ConfigError("unknown model " + model);
}

std::string mechanism_name(Mechanism mech) { return mech == Mechanism::Mcar ? "MCAR" : "MARr"; }

}  // namespace

ScenarioCellRun run_scenario_cell(Scenario scenario, int n, Mechanism mechanism, double proportion,
                                  const std::string& model, int m, std::uint64_t seed) {
    const ScenarioModels models = scenario_models(scenario);
    const int midx = model_index(models, model);

    const RngStream root(seed);
    const RngStream cell = root.split(static_cast<std::uint64_t>(scenario))
                               .split(mechanism == Mechanism::Mcar ? 0 : 1)
                               .split(static_cast<std::uint64_t>(std::llround(proportion * 1000.0)));
    RngStream gen = cell.split(1);

    Dataset data;
    switch (scenario) {
        case Scenario::QuadOutcome: data = gen_scenario1(n, gen); break;
        case Scenario::QuadCovariate: data = gen_scenario2(n, gen); break;
        case Scenario::LogisticOutcome: data = gen_scenario3(n, gen); break;
    }

    ScenarioCellRun run;
    run.amputed = ampute(data, scenario_ampute_spec(scenario, mechanism, proportion), cell.split(2));

    const ModelSetup setup = scenario_model_setup(scenario, model);
    EngineConfig cfg;
    cfg.m = m;
    cfg.maxit = setup.maxit;
    cfg.seed = cell.derive_seed(static_cast<std::uint64_t>(3 + midx));
    cfg.ppc_mode = PpcMode::Retain;
    cfg.specs = setup.specs;
    cfg.where = WhereMask::none(run.amputed);
    for (const auto& [target, spec] : cfg.specs) {
        cfg.where.set_column(static_cast<std::size_t>(run.amputed.find_column(target)), true);
        if (!spec.square_column.empty()) {
            cfg.where.set_column(
                static_cast<std::size_t>(run.amputed.find_column(spec.square_column)), true);
        }
    }

    run.result = run_fcs(run.amputed, cfg);
    return run;
}

std::vector<ScenarioRow> run_scenario(const ScenarioSpec& spec) {
    if (spec.n < 50) throw ConfigError("scenario sample size must be at least 50");
    if (spec.m < 2) throw ConfigError("scenario needs m >= 2");
    const ScenarioModels models = scenario_models(spec.scenario);

    std::vector<ScenarioRow> rows;
    for (Mechanism mech : spec.mechanisms) {
        for (double prop : spec.proportions) {
            for (const auto& model : models.names) {
                const ScenarioCellRun run =
                    run_scenario_cell(spec.scenario, spec.n, mech, prop, model, spec.m, spec.seed);
                std::optional<double> deviance;
                if (spec.scenario == Scenario::LogisticOutcome) {
                    deviance = deviance_summary(run.result, models.diagnosed).mean_squared_deviance;
                }
                for (double level : spec.levels) {
                    const PpcReport report = cell_diagnostics(run.result, level);
                    for (const auto& v : report.variables) {
                        if (v.column != models.diagnosed) continue;
                        ScenarioRow row;
                        row.mechanism = mechanism_name(mech);
                        row.proportion = prop;
                        row.model = model;
                        row.level = level;
                        row.cov = v.cov;
                        row.distance = v.distance;
                        row.ciw = v.ciw;
                        row.deviance = deviance;
                        rows.push_back(std::move(row));
                    }
                }
            }
        }
    }
    return rows;
}

void write_scenario_csv(const std::vector<ScenarioRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "mechanism,proportion,model,level,cov,distance,ciw,deviance\n";
    for (const auto& row : rows) {
        out << row.mechanism << ',' << format_numeric(row.proportion) << ',' << row.model << ','
            << format_numeric(row.level) << ',' << format_numeric(row.cov) << ','
            << format_numeric(row.distance) << ',' << format_numeric(row.ciw) << ','
            << (row.deviance ? format_numeric(*row.deviance) : "NA") << '\n';
    }
}

PooledEstimate pool_rubin(std::span<const double> estimates, std::span<const double> variances) {
    if (estimates.size() < 2) throw ConfigError("pooling needs at least 2 estimates");
    if (estimates.size() != variances.size()) throw ConfigError("estimates and variances differ in length");
    const double m = static_cast<double>(estimates.size());
    PooledEstimate pooled;
    pooled.estimate = mean(estimates);
    const double within = mean(variances);
    const double between = variance(estimates);
    pooled.total_variance = within + (1.0 + 1.0 / m) * between;
    if (between > 0.0) {
        const double r = (1.0 + 1.0 / m) * between / within;
        pooled.df = (m - 1.0) * (1.0 + 1.0 / r) * (1.0 + 1.0 / r);
    } else {
        pooled.df = 1e9;
    }
    return pooled;
}

namespace {

struct OlsQuadFit {
    double beta1 = 0.0, beta2 = 0.0;
    double var1 = 0.0, var2 = 0.0;
};

OlsQuadFit fit_quadratic(const Dataset& data) {
    const auto& x = data.column("x").values;
    const auto& x2 = data.column("x2").values;
    const auto& y = data.column("y").values;
    const auto n = static_cast<Eigen::Index>(data.rows());
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd Y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = x[static_cast<std::size_t>(i)];
        X(i, 2) = x2[static_cast<std::size_t>(i)];
        Y(i) = y[static_cast<std::size_t>(i)];
    }
    const Eigen::MatrixXd gram = X.transpose() * X;
    const Eigen::LLT<Eigen::MatrixXd> llt(gram);
    const Eigen::Vector3d beta = llt.solve(X.transpose() * Y);
    const double ssr = (Y - X * beta).squaredNorm();
    const double sigma2 = ssr / static_cast<double>(n - 3);
    const Eigen::Matrix3d cov = sigma2 * llt.solve(Eigen::Matrix3d::Identity());
    return {beta(1), beta(2), cov(1, 1), cov(2, 2)};
}

}  // namespace

PoolingStudyResult run_pooling_study(int n, double proportion, int m, int repetitions,
                                     std::uint64_t seed) {
    if (repetitions < 1) throw ConfigError("pooling study needs at least one repetition");
    PoolingStudyResult result;
    result.repetitions = repetitions;

    const RngStream root(seed);
    double beta1_sum = 0.0, beta2_sum = 0.0;
    int cover1 = 0, cover2 = 0;
    for (int rep = 0; rep < repetitions; ++rep) {
        const RngStream sub = root.split(0xA000 + static_cast<std::uint64_t>(rep));
        RngStream gen = sub.split(1);
        const Dataset data = gen_scenario2(n, gen);
        AmputeSpec aspec;
        aspec.mechanism = Mechanism::Mcar;
        aspec.proportion = proportion;
        aspec.pattern.targets = {"x", "x2"};
        aspec.pattern.weights = {{"y", 1.0}};
        const Dataset amputed = ampute(data, aspec, sub.split(2));

        EngineConfig cfg;
        cfg.m = m;
        cfg.maxit = 1;
        cfg.seed = sub.derive_seed(3);
        ImputerSpec spec;
        spec.method = Method::Pmm;
        spec.predictors = {"y"};
        spec.square_column = "x2";
        spec.donors = 5;
        cfg.specs["x"] = spec;
        cfg.where = WhereMask::none(amputed);
        const auto xj = static_cast<std::size_t>(amputed.find_column("x"));
        const auto x2j = static_cast<std::size_t>(amputed.find_column("x2"));
        const auto& observed = amputed.column(xj).observed;
        for (std::size_t r = 0; r < amputed.rows(); ++r) {
            if (!observed[r]) {
                cfg.where.set(r, xj, true);
                cfg.where.set(r, x2j, true);
            }
        }

        const MultiplyImputed imputed = run_fcs(amputed, cfg);
        std::vector<double> b1, b2, v1, v2;
        for (const auto& completed : imputed.completed) {
            const OlsQuadFit fit = fit_quadratic(completed);
            b1.push_back(fit.beta1);
            b2.push_back(fit.beta2);
            v1.push_back(fit.var1);
            v2.push_back(fit.var2);
        }
        const PooledEstimate p1 = pool_rubin(b1, v1);
        const PooledEstimate p2 = pool_rubin(b2, v2);
        beta1_sum += p1.estimate;
        beta2_sum += p2.estimate;

        const boost::math::students_t t1(p1.df);
        const boost::math::students_t t2(p2.df);
        const double h1 = boost::math::quantile(t1, 0.975) * std::sqrt(p1.total_variance);
        const double h2 = boost::math::quantile(t2, 0.975) * std::sqrt(p2.total_variance);
        cover1 += (p1.estimate - h1 <= 1.0 && 1.0 <= p1.estimate + h1) ? 1 : 0;
        cover2 += (p2.estimate - h2 <= 1.0 && 1.0 <= p2.estimate + h2) ? 1 : 0;
    }

    const double reps = static_cast<double>(repetitions);
    result.beta1_mean = beta1_sum / reps;
    result.beta2_mean = beta2_sum / reps;
    result.beta1_coverage = static_cast<double>(cover1) / reps;
    result.beta2_coverage = static_cast<double>(cover2) / reps;
    return result;
}

void write_pooling_csv(const PoolingStudyResult& result, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "coefficient,true_value,estimate,coverage\n";
    out << "beta1,1," << format_numeric(result.beta1_mean) << ','
        << format_numeric(result.beta1_coverage) << '\n';
    out << "beta2,1," << format_numeric(result.beta2_mean) << ','
        << format_numeric(result.beta2_coverage) << '\n';
}

std::vector<Strategy> strategies_from_json(const std::string& json_text, const Dataset& data) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("strategies: ") + e.what());
    }
    if (!j.is_array() || j.empty()) throw ConfigError("strategies file must hold a non-empty array");
    std::vector<Strategy> strategies;
    int index = 1;
    for (const auto& item : j) {
        Strategy s;
        s.name = item.value("name", "strategy " + std::to_string(index));
        if (!item.contains("methods")) throw ConfigError("strategy " + s.name + " has no methods");
        for (const auto& [name, spec] : item.at("methods").items()) {
            if (data.find_column(name) < 0) {
                throw ConfigError("strategy " + s.name + " targets unknown column " + name);
            }
            s.methods[name] = detail::imputer_spec_from_json(spec);
        }
        strategies.push_back(std::move(s));
        ++index;
    }
    return strategies;
}

std::vector<StrategyRow> run_strategy_comparison(const Dataset& data,
                                                 const std::vector<Strategy>& strategies,
                                                 double level, int m, std::uint64_t seed,
                                                 int maxit) {
    if (strategies.empty()) throw ConfigError("no strategies to compare");

    std::vector<std::string> incomplete;
    for (const auto& col : data.columns()) {
        if (col.observed_count() != data.rows()) incomplete.push_back(col.name);
    }
    if (incomplete.empty()) throw ConfigError("data has no incomplete variables to impute");

    std::vector<StrategyRow> rows;
    for (const auto& strategy : strategies) {
        for (const auto& name : incomplete) {
            bool covered = strategy.methods.count(name) > 0;
            for (const auto& [target, spec] : strategy.methods) {
                (void)target;
                covered = covered || spec.square_column == name;
            }
            if (!covered) {
                throw ConfigError("strategy " + strategy.name + " omits incomplete variable " + name);
            }
        }

        EngineConfig cfg;
        cfg.m = m;
        cfg.maxit = maxit;
        cfg.seed = seed;
        cfg.ppc_mode = PpcMode::Retain;
        cfg.specs = strategy.methods;
        cfg.where = WhereMask::none(data);
        for (const auto& [target, spec] : cfg.specs) {
            cfg.where.set_column(static_cast<std::size_t>(data.find_column(target)), true);
            if (!spec.square_column.empty()) {
                cfg.where.set_column(static_cast<std::size_t>(data.find_column(spec.square_column)),
                                     true);
            }
        }

        const MultiplyImputed result = run_fcs(data, cfg);
        const PpcReport report = cell_diagnostics(result, level);
        for (const auto& name : incomplete) {
            for (const auto& v : report.variables) {
                if (v.column != name) continue;
                StrategyRow row;
                row.strategy = strategy.name;
                row.variable = name;
                row.cov = v.cov;
                row.distance = v.distance;
                row.ciw = v.ciw;
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

void write_strategy_csv(const std::vector<StrategyRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "strategy,variable,cov,distance,ciw\n";
    for (const auto& row : rows) {
        out << row.strategy << ',' << row.variable << ',' << format_numeric(row.cov) << ','
            << format_numeric(row.distance) << ',' << format_numeric(row.ciw) << '\n';
    }
}

}  // namespace mippc
