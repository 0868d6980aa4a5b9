#pragma once

#include <map>
#include <string>
#include <vector>

#include "mippc/dataset.hpp"
#include "mippc/rng.hpp"

namespace mippc {

enum class Mechanism { Mcar, Marr };

// A single missingness pattern: the named columns become jointly missing in
// every affected row.  Weights feed the weighted sum score that drives the
// right-tailed MAR mechanism; they are ignored under MCAR.
struct AmputePattern {
    std::vector<std::string> targets;
    std::map<std::string, double> weights;
};

struct AmputeSpec {
    AmputePattern pattern;
    Mechanism mechanism = Mechanism::Mcar;
    double proportion = 0.5;  // strictly inside (0, 1)
};

// Weighted sum score wss_i = sum_j w_j * x_ji, standardized to mean 0 and
// sample sd 1 (n-1 convention).  Weight columns must be fully observed.
std::vector<double> compute_wss(const Dataset& data, const std::map<std::string, double>& weights);

// Make rows incomplete.  MCAR: each row independently with probability
// `proportion`.  MARr: row i with probability logistic(wss_i + c) where the
// intercept c is solved by bisection so the expected missing fraction matches
// `proportion` to 1e-6.  Affected rows lose every target column of the
// pattern; everything else is untouched.
Dataset ampute(const Dataset& data, const AmputeSpec& spec, RngStream rng);

}  // namespace mippc
