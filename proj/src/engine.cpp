#include "mippc/engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <variant>

#include "json_util.hpp"
#include "mippc/stats.hpp"

namespace mippc {

namespace detail {

ImputerSpec imputer_spec_from_json(const nlohmann::json& j) {
    ImputerSpec spec;
    if (!j.contains("method")) throw ConfigError("imputer spec without a method");
    spec.method = method_from_name(j.at("method").get<std::string>());
    if (j.contains("predictors")) {
        spec.predictors = j.at("predictors").get<std::vector<std::string>>();
    }
    if (j.contains("donors")) spec.donors = j.at("donors").get<int>();
    if (j.contains("square")) spec.square_column = j.at("square").get<std::string>();
    return spec;
}

}  // namespace detail

void EngineConfig::validate(const Dataset& data) const {
    if (m < 1) throw ConfigError("m must be at least 1");
    if (maxit < 1) throw ConfigError("maxit must be at least 1");
    if (!where.matches(data)) throw ConfigError("where mask does not match the dataset shape");

    std::set<std::string> squares;
    for (const auto& [target, spec] : specs) {
        if (!spec.square_column.empty()) {
            if (!squares.insert(spec.square_column).second) {
                throw ConfigError("square column " + spec.square_column + " used by two specs");
            }
        }
    }

    for (const auto& [target, spec] : specs) {
        const int t = data.find_column(target);
        if (t < 0) throw ConfigError("spec targets unknown column " + target);
        const Column& target_col = data.column(static_cast<std::size_t>(t));

        const bool binary_target = target_col.kind == ColumnKind::Binary;
        if (binary_target != (spec.method == Method::LogReg)) {
            throw ConfigError("column " + target + ": binary targets take logreg and vice versa");
        }

        std::set<std::string> seen;
        for (const auto& p : spec.predictors) {
            if (p == target) throw ConfigError("column " + target + " predicts itself");
            // pmm may match on its own square column (the pair moves jointly);
            // the parametric pair methods would be circular.
            if (p == spec.square_column && spec.method != Method::Pmm) {
                throw ConfigError("column " + target + " uses its own square as predictor");
            }
            if (!seen.insert(p).second) throw ConfigError("duplicate predictor " + p);
            const int pi = data.find_column(p);
            if (pi < 0) throw ConfigError("unknown predictor column " + p);
            const Column& pcol = data.column(static_cast<std::size_t>(pi));
            const bool imputed = specs.count(p) > 0 || squares.count(p) > 0;
            if (!imputed && pcol.observed_count() != data.rows()) {
                throw ConfigError("predictor " + p + " has missing cells and no spec");
            }
        }

        if (spec.method == Method::Pmm || spec.method == Method::PolyComb) {
            if (spec.donors < 1) throw ConfigError("donor count must be at least 1");
        }
        if (spec.method == Method::PolyComb || spec.method == Method::SmcFcsQuad) {
            if (spec.square_column.empty()) {
                throw ConfigError(method_name(spec.method) + " needs a square column");
            }
            if (spec.predictors.size() != 1) {
                throw ConfigError(method_name(spec.method) + " takes exactly one predictor");
            }
            const Column& resp = data.column(spec.predictors.front());
            if (resp.observed_count() != data.rows()) {
                throw ConfigError(method_name(spec.method) + " needs a fully observed response");
            }
        }

        if (!spec.square_column.empty()) {
            const int s = data.find_column(spec.square_column);
            if (s < 0) throw ConfigError("unknown square column " + spec.square_column);
            if (spec.square_column == target) throw ConfigError("square column equals target");
            if (specs.count(spec.square_column)) {
                throw ConfigError("square column " + spec.square_column + " has its own spec");
            }
            const Column& sq = data.column(static_cast<std::size_t>(s));
            if (sq.kind != ColumnKind::Continuous) throw ConfigError("square column must be continuous");
            if (sq.observed != target_col.observed) {
                throw ConfigError("square column " + spec.square_column +
                                  " must be missing exactly where " + target + " is");
            }
            for (std::size_t r = 0; r < data.rows(); ++r) {
                if (where.at(r, static_cast<std::size_t>(s)) !=
                    where.at(r, static_cast<std::size_t>(t))) {
                    throw ConfigError("where mask differs between " + target + " and its square");
                }
            }
        }

        // Enough observed rows to fit on: intercept + predictors, plus one.
        const std::size_t needed = spec.predictors.size() + 2;
        if (target_col.observed_count() < needed) {
            throw ConfigError("column " + target + " has too few observed rows to fit");
        }

        for (std::size_t r = 0; r < data.rows(); ++r) {
            if (!target_col.observed[r] && !where.at(r, static_cast<std::size_t>(t))) {
                throw ConfigError("missing cell of " + target + " not covered by the where mask");
            }
        }
    }

    for (std::size_t j = 0; j < data.cols(); ++j) {
        const std::string& name = data.column(j).name;
        bool flagged = false;
        for (std::size_t r = 0; r < data.rows() && !flagged; ++r) flagged = where.at(r, j);
        if (flagged && specs.count(name) == 0 && squares.count(name) == 0) {
            throw ConfigError("column " + name + " is where-flagged but has no spec");
        }
    }

    if (!visit.empty()) {
        std::set<std::string> v(visit.begin(), visit.end());
        if (v.size() != visit.size()) throw ConfigError("visit order repeats a column");
        for (const auto& [target, spec] : specs) {
            (void)spec;
            if (!v.count(target)) throw ConfigError("visit order omits " + target);
        }
        if (v.size() != specs.size()) throw ConfigError("visit order names a column without spec");
    }
}

EngineConfig engine_config_from_json(const std::string& json_text, const Dataset& data) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("engine config: ") + e.what());
    }
    EngineConfig cfg;
    cfg.m = j.value("m", 5);
    cfg.maxit = j.value("maxit", 10);
    cfg.seed = j.value("seed", std::uint64_t{1});
    const std::string mode = j.value("ppc_mode", std::string("retain"));
    if (mode == "retain") cfg.ppc_mode = PpcMode::Retain;
    else if (mode == "overwrite") cfg.ppc_mode = PpcMode::Overwrite;
    else throw ConfigError("unknown ppc_mode: " + mode);
    if (j.contains("visit")) cfg.visit = j.at("visit").get<std::vector<std::string>>();

    if (j.contains("methods")) {
        for (const auto& [name, item] : j.at("methods").items()) {
            cfg.specs[name] = detail::imputer_spec_from_json(item);
        }
    }

    // Default mask: impute exactly what is missing in the spec'd columns.
    cfg.where = WhereMask::none(data);
    for (const auto& [target, spec] : cfg.specs) {
        std::vector<std::string> cols{target};
        if (!spec.square_column.empty()) cols.push_back(spec.square_column);
        for (const auto& cname : cols) {
            const int idx = data.find_column(cname);
            if (idx < 0) throw ConfigError("spec references unknown column " + cname);
            const Column& col = data.column(static_cast<std::size_t>(idx));
            for (std::size_t r = 0; r < data.rows(); ++r) {
                if (!col.observed[r]) cfg.where.set(r, static_cast<std::size_t>(idx), true);
            }
        }
    }
    return cfg;
}

namespace {

struct NormTheta {
    LinRegDraw draw;
};
struct PmmTheta {
    LinRegDraw draw;
    std::vector<double> donor_pred;  // type-1 predictions for the fit rows
    std::vector<double> donor_y;
    std::vector<double> donor_sq;  // pair companion values, empty without pair
    int donors = 5;
};
struct LogitTheta {
    LogRegDraw draw;
};
struct PolyTheta {
    PolyCombDraw draw;
    int donors = 5;
};
struct SmcTheta {
    LinRegDraw substantive;
    LinRegDraw covariate;
};
using Theta = std::variant<NormTheta, PmmTheta, LogitTheta, PolyTheta, SmcTheta>;

struct Plan {
    std::size_t target = 0;
    int square = -1;
    std::vector<std::size_t> predictors;
    ImputerSpec spec;
    std::vector<std::size_t> fit_rows;   // originally observed rows of the target
    std::vector<std::size_t> draw_rows;  // where-flagged rows of the target
};

Eigen::MatrixXd build_design(const Dataset& data, const std::vector<std::size_t>& predictors,
                             const std::vector<std::size_t>& rows, const std::string& context) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(predictors.size() + 1));
    X.col(0).setOnes();
    for (std::size_t k = 0; k < predictors.size(); ++k) {
        const auto& col = data.column(predictors[k]);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const double v = col.values[rows[i]];
            if (!std::isfinite(v)) {
                throw NumericError(context + ": predictor " + col.name +
                                   " is not available at row " + std::to_string(rows[i]));
            }
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k + 1)) = v;
        }
    }
    return X;
}

}  // namespace

struct FcsChain::Impl {
    Dataset original;
    Dataset working;
    EngineConfig cfg;
    RngStream stream;
    std::vector<Plan> plans;
    std::vector<Theta> thetas;
    bool has_thetas = false;
    std::map<std::string, std::vector<double>> last_drawn;
    std::map<std::string, int> fallbacks;
    std::vector<std::string> targets;

    Impl(const Dataset& data, const EngineConfig& config, RngStream s)
        : original(data), working(data), cfg(config), stream(s) {
        cfg.validate(data);
        build_plans();
    }

    void build_plans() {
        std::vector<std::string> order = cfg.visit;
        if (order.empty()) {
            for (const auto& col : original.columns()) {
                if (cfg.specs.count(col.name)) order.push_back(col.name);
            }
        }
        for (const auto& name : order) {
            Plan plan;
            plan.spec = cfg.specs.at(name);
            plan.target = static_cast<std::size_t>(original.find_column(name));
            if (!plan.spec.square_column.empty()) {
                plan.square = original.find_column(plan.spec.square_column);
            }
            for (const auto& p : plan.spec.predictors) {
                plan.predictors.push_back(static_cast<std::size_t>(original.find_column(p)));
            }
            const Column& col = original.column(plan.target);
            for (std::size_t r = 0; r < original.rows(); ++r) {
                if (col.observed[r]) plan.fit_rows.push_back(r);
                if (cfg.where.at(r, plan.target)) plan.draw_rows.push_back(r);
            }
            plans.push_back(std::move(plan));
            targets.push_back(name);
        }
        thetas.resize(plans.size());
    }

    void initialize() {
        for (const auto& plan : plans) {
            init_column(plan.target, plan.draw_rows);
            if (plan.square >= 0) init_column(static_cast<std::size_t>(plan.square), plan.draw_rows);
        }
    }

    void init_column(std::size_t col_idx, const std::vector<std::size_t>& rows) {
        const auto pool = original.column(col_idx).observed_values();
        if (pool.empty() && !rows.empty()) {
            throw NumericError("column " + original.column(col_idx).name +
                               " has no observed values to initialize from");
        }
        auto& col = working.column(col_idx);
        const auto& observed = original.column(col_idx).observed;
        for (std::size_t r : rows) {
            if (observed[r] && cfg.ppc_mode == PpcMode::Retain) continue;
            col.values[r] = pool[stream.uniform_index(pool.size())];
        }
    }

    Theta fit(const Plan& plan) {
        const std::string& name = original.column(plan.target).name;
        const Eigen::MatrixXd X = build_design(working, plan.predictors, plan.fit_rows, name);
        Eigen::VectorXd y(static_cast<Eigen::Index>(plan.fit_rows.size()));
        const auto& target_values = original.column(plan.target).values;
        for (std::size_t i = 0; i < plan.fit_rows.size(); ++i) {
            y(static_cast<Eigen::Index>(i)) = target_values[plan.fit_rows[i]];
        }

        switch (plan.spec.method) {
            case Method::Norm: {
                return NormTheta{draw_bayes_linreg(X, y, stream)};
            }
            case Method::Pmm: {
                PmmTheta theta;
                theta.draw = draw_bayes_linreg(X, y, stream);
                const Eigen::VectorXd pred = X * theta.draw.beta_hat;
                theta.donor_pred.assign(pred.data(), pred.data() + pred.size());
                theta.donor_y.assign(y.data(), y.data() + y.size());
                theta.donors = plan.spec.donors;
                if (plan.square >= 0) {
                    const auto& sq = original.column(static_cast<std::size_t>(plan.square)).values;
                    for (std::size_t r : plan.fit_rows) theta.donor_sq.push_back(sq[r]);
                }
                return theta;
            }
            case Method::LogReg: {
                return LogitTheta{draw_bayes_logreg(X, y, stream)};
            }
            case Method::PolyComb: {
                const auto& resp = working.column(plan.predictors.front()).values;
                PolyTheta theta;
                theta.draw = draw_polycomb(resp, original.column(plan.target).observed,
                                           original.column(plan.target).values, stream);
                theta.donors = plan.spec.donors;
                return theta;
            }
            case Method::SmcFcsQuad: {
                // Substantive model: response ~ x + x^2 on the observed rows;
                // covariate model: x ~ 1.
                Eigen::MatrixXd Xsub(static_cast<Eigen::Index>(plan.fit_rows.size()), 3);
                Eigen::VectorXd ysub(static_cast<Eigen::Index>(plan.fit_rows.size()));
                const auto& resp = working.column(plan.predictors.front()).values;
                for (std::size_t i = 0; i < plan.fit_rows.size(); ++i) {
                    const double xi = target_values[plan.fit_rows[i]];
                    Xsub(static_cast<Eigen::Index>(i), 0) = 1.0;
                    Xsub(static_cast<Eigen::Index>(i), 1) = xi;
                    Xsub(static_cast<Eigen::Index>(i), 2) = xi * xi;
                    ysub(static_cast<Eigen::Index>(i)) = resp[plan.fit_rows[i]];
                }
                SmcTheta theta;
                theta.substantive = draw_bayes_linreg(Xsub, ysub, stream);
                theta.covariate = draw_bayes_linreg(
                    Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(plan.fit_rows.size()), 1), y,
                    stream);
                return theta;
            }
        }
        throw ConfigError("unhandled method");
    }

    // Draws values for `rows` of the plan's target (and square) from theta,
    // reading predictors from `dst`.  write_all forces every drawn value into
    // dst; otherwise the ppc mode decides what happens at observed cells.
    int draw_into(const Plan& plan, const Theta& theta, const std::vector<std::size_t>& rows,
                  Dataset& dst, bool write_all, RngStream& rng,
                  std::vector<double>* drawn_target, std::vector<double>* drawn_square) const {
        if (rows.empty()) return 0;
        const std::string& name = original.column(plan.target).name;
        std::vector<double> values;
        std::vector<double> squares;
        int fallbacks = 0;

        if (const auto* t = std::get_if<NormTheta>(&theta)) {
            const Eigen::MatrixXd X = build_design(dst, plan.predictors, rows, name);
            values = impute_norm(t->draw, X, rng);
        } else if (const auto* t = std::get_if<PmmTheta>(&theta)) {
            const Eigen::MatrixXd X = build_design(dst, plan.predictors, rows, name);
            const Eigen::VectorXd mu = X * t->draw.beta;
            const std::vector<double> target_pred(mu.data(), mu.data() + mu.size());
            const auto picks = pmm_match(t->donor_pred, target_pred, t->donors, rng);
            values.resize(picks.size());
            for (std::size_t i = 0; i < picks.size(); ++i) {
                values[i] = t->donor_y[static_cast<std::size_t>(picks[i])];
            }
            if (plan.square >= 0) {
                squares.resize(picks.size());
                for (std::size_t i = 0; i < picks.size(); ++i) {
                    squares[i] = t->donor_sq[static_cast<std::size_t>(picks[i])];
                }
            }
        } else if (const auto* t = std::get_if<LogitTheta>(&theta)) {
            const Eigen::MatrixXd X = build_design(dst, plan.predictors, rows, name);
            values = impute_logreg(t->draw, X, rng);
        } else if (const auto* t = std::get_if<PolyTheta>(&theta)) {
            const auto& resp = dst.column(plan.predictors.front()).values;
            std::vector<double> y_targets;
            y_targets.reserve(rows.size());
            for (std::size_t r : rows) y_targets.push_back(resp[r]);
            const auto result = impute_polycomb_values(t->draw, y_targets, t->donors, rng);
            fallbacks = result.vertex_fallbacks;
            values.reserve(result.pairs.size());
            squares.reserve(result.pairs.size());
            for (const auto& pair : result.pairs) {
                values.push_back(pair.x);
                squares.push_back(pair.x_sq);
            }
        } else if (const auto* t = std::get_if<SmcTheta>(&theta)) {
            const auto& resp = dst.column(plan.predictors.front()).values;
            std::vector<double> y_targets;
            y_targets.reserve(rows.size());
            for (std::size_t r : rows) y_targets.push_back(resp[r]);
            const auto result = impute_smcfcs_quadratic(y_targets, t->substantive, t->covariate, rng);
            fallbacks = result.cap_fallbacks;
            values.reserve(result.pairs.size());
            squares.reserve(result.pairs.size());
            for (const auto& pair : result.pairs) {
                values.push_back(pair.x);
                squares.push_back(pair.x_sq);
            }
        }

        auto& target_col = dst.column(plan.target);
        const auto& observed = original.column(plan.target).observed;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const std::size_t r = rows[i];
            const bool apply = write_all || !observed[r] || cfg.ppc_mode == PpcMode::Overwrite;
            if (apply) target_col.values[r] = values[i];
            if (plan.square >= 0) {
                auto& sq_col = dst.column(static_cast<std::size_t>(plan.square));
                if (apply) sq_col.values[r] = squares[i];
            }
        }
        if (drawn_target) *drawn_target = std::move(values);
        if (drawn_square && plan.square >= 0) *drawn_square = std::move(squares);
        return fallbacks;
    }

    void iterate() {
        for (std::size_t k = 0; k < plans.size(); ++k) {
            const Plan& plan = plans[k];
            const std::string& name = original.column(plan.target).name;
            try {
                thetas[k] = fit(plan);
                std::vector<double> drawn_target;
                std::vector<double> drawn_square;
                fallbacks[name] += draw_into(plan, thetas[k], plan.draw_rows, working, false, stream,
                                             &drawn_target, &drawn_square);
                last_drawn[name] = std::move(drawn_target);
                if (plan.square >= 0) {
                    last_drawn[original.column(static_cast<std::size_t>(plan.square)).name] =
                        std::move(drawn_square);
                }
            } catch (const std::runtime_error& e) {
                throw NumericError("column " + name + ": " + e.what());
            }
        }
        has_thetas = true;
    }

    Dataset replicate_all(RngStream rng) const {
        if (!has_thetas) throw ConfigError("replicate requested before any sweep");
        Dataset rep = working;
        std::vector<std::size_t> all_rows(original.rows());
        for (std::size_t r = 0; r < all_rows.size(); ++r) all_rows[r] = r;
        for (std::size_t k = 0; k < plans.size(); ++k) {
            draw_into(plans[k], thetas[k], all_rows, rep, true, rng, nullptr, nullptr);
        }
        return rep;
    }
};

FcsChain::FcsChain(const Dataset& data, const EngineConfig& config, RngStream stream)
    : impl_(std::make_unique<Impl>(data, config, stream)) {}
FcsChain::~FcsChain() = default;
FcsChain::FcsChain(FcsChain&&) noexcept = default;
FcsChain& FcsChain::operator=(FcsChain&&) noexcept = default;

void FcsChain::initialize() { impl_->initialize(); }
void FcsChain::iterate() { impl_->iterate(); }
const Dataset& FcsChain::working() const { return impl_->working; }
Dataset FcsChain::completed() const { return impl_->working; }

const std::vector<double>& FcsChain::last_drawn(const std::string& column) const {
    const auto it = impl_->last_drawn.find(column);
    if (it == impl_->last_drawn.end()) throw ConfigError("no draws recorded for column " + column);
    return it->second;
}

Dataset FcsChain::replicate_all(RngStream stream) const { return impl_->replicate_all(stream); }

const std::map<std::string, int>& FcsChain::draw_fallbacks() const { return impl_->fallbacks; }

const std::vector<std::string>& FcsChain::target_columns() const { return impl_->targets; }

MultiplyImputed run_fcs(const Dataset& data, const EngineConfig& config) {
    config.validate(data);

    MultiplyImputed out;
    out.original = data;
    out.where = config.where;
    out.ppc_mode = config.ppc_mode;
    out.m = config.m;
    out.maxit = config.maxit;

    // Columns that receive draws, with their observed where-rows.
    std::vector<std::pair<std::string, std::vector<std::size_t>>> replicate_cells;
    for (std::size_t j = 0; j < data.cols(); ++j) {
        const auto& col = data.column(j);
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < data.rows(); ++r) {
            if (config.where.at(r, j) && col.observed[r]) rows.push_back(r);
        }
        if (!rows.empty()) replicate_cells.emplace_back(col.name, rows);
    }
    for (const auto& [name, rows] : replicate_cells) {
        auto& cells = out.replicates[name];
        cells.reserve(rows.size());
        for (std::size_t r : rows) {
            MultiplyImputed::CellReplicates cell;
            cell.row = r;
            cell.values.reserve(static_cast<std::size_t>(config.m));
            cells.push_back(std::move(cell));
        }
    }

    const RngStream root(config.seed);
    for (int c = 0; c < config.m; ++c) {
        FcsChain chain(data, config, root.split(static_cast<std::uint64_t>(c) + 1));
        chain.initialize();
        for (int t = 1; t <= config.maxit; ++t) {
            chain.iterate();
            for (const auto& name : chain.target_columns()) {
                const auto& drawn = chain.last_drawn(name);
                if (drawn.empty()) continue;
                TraceRow row;
                row.chain = c;
                row.iteration = t;
                row.column = name;
                row.mean = mean(drawn);
                row.sd = drawn.size() > 1 ? sample_sd(drawn) : 0.0;
                out.traces.push_back(std::move(row));
            }
        }
        out.completed.push_back(chain.completed());
        for (const auto& [name, count] : chain.draw_fallbacks()) {
            if (count > 0) out.draw_fallbacks[name] += count;
        }

        // Final-sweep draws at observed where-cells feed the replicate store.
        for (const auto& [name, rows] : replicate_cells) {
            const auto& col = data.column(name);
            const auto& drawn = chain.last_drawn(name);
            const std::size_t j = static_cast<std::size_t>(data.find_column(name));
            std::size_t drawn_idx = 0;
            std::size_t cell_idx = 0;
            auto& cells = out.replicates[name];
            for (std::size_t r = 0; r < data.rows(); ++r) {
                if (!config.where.at(r, j)) continue;
                if (col.observed[r]) {
                    cells[cell_idx].values.push_back(drawn[drawn_idx]);
                    ++cell_idx;
                }
                ++drawn_idx;
            }
        }
    }
    return out;
}

WhereMask where_all_observed(const Dataset& data) {
    WhereMask mask = WhereMask::none(data);
    for (std::size_t j = 0; j < data.cols(); ++j) {
        const auto& col = data.column(j);
        for (std::size_t r = 0; r < data.rows(); ++r) {
            if (col.observed[r]) mask.set(r, j, true);
        }
    }
    return mask;
}

std::vector<TraceRow> chain_trace_summary(const MultiplyImputed& result) {
    if (result.maxit < 2) throw ConfigError("trace summary needs maxit >= 2");
    std::vector<TraceRow> rows = result.traces;
    std::sort(rows.begin(), rows.end(), [](const TraceRow& a, const TraceRow& b) {
        if (a.column != b.column) return a.column < b.column;
        if (a.chain != b.chain) return a.chain < b.chain;
        return a.iteration < b.iteration;
    });
    return rows;
}

void write_trace_csv(const std::vector<TraceRow>& traces, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "column,chain,iteration,mean,sd\n";
    for (const auto& row : traces) {
        out << row.column << ',' << row.chain << ',' << row.iteration << ','
            << format_numeric(row.mean) << ',' << format_numeric(row.sd) << '\n';
    }
}

}  // namespace mippc
