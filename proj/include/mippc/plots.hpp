#pragma once

#include <filesystem>
#include <string>

#include "mippc/engine.hpp"
#include "mippc/ppc.hpp"

namespace mippc {

// Plot-ready data emitters.  Each writes a small CSV with a fixed header;
// rendering is left to whatever plotting tool the caller prefers.

// distribution plot: one row per observed cell of `variable`, sorted ascending
// by replicate mean.  Header: rank,mean,lo,hi,obs,covered
void emit_distribution_plot(const PpcReport& report, const std::string& variable,
                            const std::filesystem::path& path);

// density plot: Gaussian KDE with Silverman's-rule bandwidth on a shared grid
// spanning the pooled range +/- 3 bandwidths.  Series 0 is the observed data;
// series 1..m are each chain's drawn values.  Header: series,grid_x,density
void emit_density_data(const MultiplyImputed& result, const std::string& variable,
                       const std::filesystem::path& path, int grid_points = 512);

// scatter plot: panel 0 holds the observed rows only; panels 1..m hold each
// completed dataset with origin 1 marking cells the engine drew.
// Header: panel,origin,x,y
void emit_scatter_data(const MultiplyImputed& result, const std::string& x_var,
                       const std::string& y_var, const std::filesystem::path& path);

// deviance-residual plot for a binary target.  Header: index,p_hat,residual
void emit_deviance_plot(const DevianceSummary& summary, const std::filesystem::path& path);

}  // namespace mippc
