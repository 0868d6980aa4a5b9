#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "mippc/dataset.hpp"

namespace testutil {

inline mippc::Column make_column(std::string name, std::vector<double> values,
                                 mippc::ColumnKind kind = mippc::ColumnKind::Continuous) {
    mippc::Column col;
    col.name = std::move(name);
    col.kind = kind;
    col.observed.assign(values.size(), 1);
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (std::isnan(values[i])) col.observed[i] = 0;
    }
    col.values = std::move(values);
    return col;
}

// Two-sample Kolmogorov-Smirnov p-value (asymptotic).
inline double ks_two_sample_pvalue(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j]) ++i;
        else ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double lambda = (std::sqrt(na * nb / (na + nb)) + 0.12 + 0.11 / std::sqrt(na * nb / (na + nb))) * d;
    double p = 0.0;
    for (int k = 1; k <= 100; ++k) {
        p += 2.0 * (k % 2 == 1 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    }
    return std::min(1.0, std::max(0.0, p));
}

class TempDir {
  public:
    TempDir() {
        path_ = std::filesystem::temp_directory_path() /
                ("mippc_test_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::filesystem::path file(const std::string& name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

}  // namespace testutil
