#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mippc/dataset.hpp"
#include "mippc/imputers.hpp"
#include "mippc/rng.hpp"

namespace mippc {

// What happens when the engine draws a replicate for a cell that is observed
// in the source data.  Retain keeps the observed value in the working data and
// only records the draw, so every fit keeps conditioning on genuine data.
// Overwrite pushes the draw into the working data, which is what the classic
// chained-equations `where` mechanism does: later fits of *other* columns see
// the replicates through their predictors.  Each column's own fit always uses
// its originally observed target values.
enum class PpcMode { Retain, Overwrite };

struct EngineConfig {
    int m = 5;
    int maxit = 10;
    std::map<std::string, ImputerSpec> specs;  // target column -> model
    WhereMask where;                           // cells to (re)draw
    PpcMode ppc_mode = PpcMode::Retain;
    std::uint64_t seed = 1;
    std::vector<std::string> visit;  // visit order; empty = dataset column order

    // Checks the config against a dataset and throws ConfigError on violation:
    // every where-flagged column needs a spec (or must be a pair companion),
    // predictors must exist, be distinct from the target, and be either fully
    // observed or imputed themselves; missing cells of spec'd columns must be
    // where-flagged so completed datasets come out complete.
    void validate(const Dataset& data) const;
};

// Parse the engine-config JSON document:
//   {"m":50,"maxit":10,"seed":1,"ppc_mode":"retain",
//    "methods":{"y":{"method":"pmm","donors":5,"predictors":["x","z"],"square":"x2"}}}
// The where mask defaults to the missing cells of the spec'd columns.
EngineConfig engine_config_from_json(const std::string& json_text, const Dataset& data);

struct TraceRow {
    int chain = 0;
    int iteration = 0;  // 1-based
    std::string column;
    double mean = 0.0;
    double sd = 0.0;
};

// Result of a multiple-imputation run: the m completed datasets, the replicate
// values drawn for observed where-cells, and per-sweep chain traces.
struct MultiplyImputed {
    struct CellReplicates {
        std::size_t row = 0;
        std::vector<double> values;  // one per chain, chain order
    };

    std::vector<Dataset> completed;
    std::map<std::string, std::vector<CellReplicates>> replicates;  // column -> cells, row-ascending
    std::vector<TraceRow> traces;
    // Draw-time fallbacks (vertex points from the polynomial-combination root
    // solve, proposal-cap exits from the accept/reject sampler), per column.
    std::map<std::string, int> draw_fallbacks;

    // Run context kept for the diagnostics layer.
    Dataset original;
    WhereMask where;
    PpcMode ppc_mode = PpcMode::Retain;
    int m = 0;
    int maxit = 0;
};

// One chained-equations Gibbs chain.  Exposed so the posterior-predictive
// p-value estimators can advance a chain draw by draw and branch replicates
// off the current parameter state.
class FcsChain {
  public:
    FcsChain(const Dataset& data, const EngineConfig& config, RngStream stream);
    ~FcsChain();
    FcsChain(FcsChain&&) noexcept;
    FcsChain& operator=(FcsChain&&) noexcept;

    // Fill missing where-cells (and, under Overwrite, observed where-cells)
    // with uniform draws from each column's observed values.
    void initialize();

    // One sweep over the spec'd columns: fit/draw parameters on the originally
    // observed rows, then draw values for every where-cell.
    void iterate();

    const Dataset& working() const;
    Dataset completed() const;

    // Values drawn for `column`'s where-rows in the most recent sweep, in
    // row-ascending order.
    const std::vector<double>& last_drawn(const std::string& column) const;

    // Accumulated draw-time fallbacks per target column.
    const std::map<std::string, int>& draw_fallbacks() const;

    // Redraws every row of every spec'd column from the parameter draws of the
    // most recent sweep, feeding each redrawn column into the next one's
    // predictors.  This is the all-cells replicate used by the discrepancy
    // p-values.
    Dataset replicate_all(RngStream stream) const;

    const std::vector<std::string>& target_columns() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// The chained-equations driver: m independent chains, maxit sweeps each.
MultiplyImputed run_fcs(const Dataset& data, const EngineConfig& config);

// Mask that is true exactly at observed cells: the replication mask for
// posterior predictive checking.
WhereMask where_all_observed(const Dataset& data);

// The trace table in canonical (column, chain, iteration) order; requires
// maxit >= 2 so there is a trajectory to look at.
std::vector<TraceRow> chain_trace_summary(const MultiplyImputed& result);

void write_trace_csv(const std::vector<TraceRow>& traces, const std::filesystem::path& path);

}  // namespace mippc
