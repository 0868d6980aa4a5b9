#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mippc/errors.hpp"

namespace mippc {

enum class ColumnKind { Continuous, Binary };

// One typed column: values plus an observedness mask.  Unobserved entries hold
// NaN; observed entries are always finite, and in {0,1} for Binary columns.
struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::Continuous;
    std::vector<double> values;
    std::vector<std::uint8_t> observed;  // 1 = observed

    std::size_t size() const { return values.size(); }
    bool is_observed(std::size_t row) const { return observed[row] != 0; }
    std::size_t observed_count() const;
    std::vector<double> observed_values() const;
};

// Rectangular table of columns of equal length.  Immutable by convention once
// handed to the engine; internal working copies are plain value copies, so the
// type is freely shareable across threads.
class Dataset {
  public:
    Dataset() = default;
    explicit Dataset(std::vector<Column> columns);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return columns_.size(); }

    const std::vector<Column>& columns() const { return columns_; }
    std::vector<Column>& columns() { return columns_; }

    const Column& column(std::size_t idx) const { return columns_.at(idx); }
    Column& column(std::size_t idx) { return columns_.at(idx); }
    const Column& column(const std::string& name) const;
    Column& column(const std::string& name);

    // Index of a named column, -1 when absent.
    int find_column(const std::string& name) const;

  private:
    void validate() const;

    std::vector<Column> columns_;
    std::size_t rows_ = 0;
};

// Boolean cell mask over a dataset; true marks a cell the engine must (re)draw.
struct WhereMask {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> cells;  // row-major

    static WhereMask none(const Dataset& data);

    bool at(std::size_t row, std::size_t col) const { return cells[row * cols + col] != 0; }
    void set(std::size_t row, std::size_t col, bool value) {
        cells[row * cols + col] = value ? 1 : 0;
    }
    void set_column(std::size_t col, bool value);
    bool matches(const Dataset& data) const { return rows == data.rows() && cols == data.cols(); }
    std::size_t count() const;
};

// CSV ingestion/egress.  RFC-4180-style quoting, header row required, missing
// cells encoded as "NA" (empty fields also read as missing).  Numbers are
// written with 17 significant digits so a round trip reproduces every double
// bit for bit.
Dataset load_csv(const std::filesystem::path& path,
                 const std::map<std::string, ColumnKind>& schema = {});
void write_csv(const Dataset& data, const std::filesystem::path& path);

// Formats one double the way every emitter in this project does.
std::string format_numeric(double v);

}  // namespace mippc
