#include "mippc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>

namespace mippc {

std::size_t Column::observed_count() const {
    std::size_t k = 0;
    for (auto o : observed) k += (o != 0);
    return k;
}

std::vector<double> Column::observed_values() const {
    std::vector<double> out;
    out.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (observed[i]) out.push_back(values[i]);
    }
    return out;
}

Dataset::Dataset(std::vector<Column> columns) : columns_(std::move(columns)) {
    rows_ = columns_.empty() ? 0 : columns_.front().size();
    validate();
}

void Dataset::validate() const {
    std::set<std::string> names;
    for (const auto& col : columns_) {
        if (col.name.empty()) throw SchemaError("column with empty name");
        if (!names.insert(col.name).second) throw SchemaError("duplicate column name: " + col.name);
        if (col.values.size() != rows_ || col.observed.size() != rows_) {
            throw SchemaError("column " + col.name + " has mismatched length");
        }
        for (std::size_t i = 0; i < rows_; ++i) {
            if (!col.observed[i]) continue;
            const double v = col.values[i];
            if (!std::isfinite(v)) {
                throw SchemaError("column " + col.name + " has non-finite observed value at row " +
                                  std::to_string(i));
            }
            if (col.kind == ColumnKind::Binary && v != 0.0 && v != 1.0) {
                throw SchemaError("binary column " + col.name + " has value " + std::to_string(v) +
                                  " at row " + std::to_string(i));
            }
        }
    }
}

const Column& Dataset::column(const std::string& name) const {
    const int idx = find_column(name);
    if (idx < 0) throw SchemaError("no such column: " + name);
    return columns_[static_cast<std::size_t>(idx)];
}

Column& Dataset::column(const std::string& name) {
    const int idx = find_column(name);
    if (idx < 0) throw SchemaError("no such column: " + name);
    return columns_[static_cast<std::size_t>(idx)];
}

int Dataset::find_column(const std::string& name) const {
    for (std::size_t j = 0; j < columns_.size(); ++j) {
        if (columns_[j].name == name) return static_cast<int>(j);
    }
    return -1;
}

WhereMask WhereMask::none(const Dataset& data) {
    WhereMask mask;
    mask.rows = data.rows();
    mask.cols = data.cols();
    mask.cells.assign(mask.rows * mask.cols, 0);
    return mask;
}

void WhereMask::set_column(std::size_t col, bool value) {
    for (std::size_t r = 0; r < rows; ++r) set(r, col, value);
}

std::size_t WhereMask::count() const {
    std::size_t k = 0;
    for (auto c : cells) k += (c != 0);
    return k;
}

namespace {

// Splits one physical CSV record honoring double-quote escaping.  The caller
// feeds complete records (quotes cannot span records in this format: values
// are numeric or NA).
std::vector<std::string> split_record(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    if (quoted) throw ParseError("unterminated quote on line " + std::to_string(line_no));
    fields.push_back(field);
    return fields;
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return s.substr(b, e - b);
}

bool needs_quoting(const std::string& s) {
    return s.find_first_of(",\"\n") != std::string::npos;
}

std::string quote_field(const std::string& s) {
    if (!needs_quoting(s)) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

}  // namespace

std::string format_numeric(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Dataset load_csv(const std::filesystem::path& path, const std::map<std::string, ColumnKind>& schema) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty file: " + path.string());

    const auto header = split_record(line, 1);
    std::vector<Column> columns;
    columns.reserve(header.size());
    for (const auto& raw : header) {
        Column col;
        col.name = trim(raw);
        if (col.name.empty()) throw ParseError("empty column name in header of " + path.string());
        const auto it = schema.find(col.name);
        col.kind = (it != schema.end()) ? it->second : ColumnKind::Continuous;
        columns.push_back(std::move(col));
    }
    for (const auto& [name, kind] : schema) {
        (void)kind;
        bool found = false;
        for (const auto& col : columns) found = found || col.name == name;
        if (!found) throw SchemaError("schema names unknown column: " + name);
    }

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        const auto fields = split_record(line, line_no);
        if (fields.size() != columns.size()) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(columns.size()) + " fields, got " +
                             std::to_string(fields.size()));
        }
        for (std::size_t j = 0; j < fields.size(); ++j) {
            const std::string tok = trim(fields[j]);
            auto& col = columns[j];
            if (tok.empty() || tok == "NA") {
                col.values.push_back(std::numeric_limits<double>::quiet_NaN());
                col.observed.push_back(0);
                continue;
            }
            char* end = nullptr;
            const double v = std::strtod(tok.c_str(), &end);
            if (end != tok.c_str() + tok.size()) {
                throw ParseError("line " + std::to_string(line_no) + ", column " + col.name +
                                 ": cannot parse '" + tok + "'");
            }
            if (!std::isfinite(v)) {
                throw ParseError("line " + std::to_string(line_no) + ", column " + col.name +
                                 ": non-finite value");
            }
            if (col.kind == ColumnKind::Binary && v != 0.0 && v != 1.0) {
                throw SchemaError("line " + std::to_string(line_no) + ", binary column " + col.name +
                                  ": value '" + tok + "' is not 0 or 1");
            }
            col.values.push_back(v);
            col.observed.push_back(1);
        }
    }
    return Dataset(std::move(columns));
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (std::size_t j = 0; j < data.cols(); ++j) {
        if (j) out << ',';
        out << quote_field(data.column(j).name);
    }
    out << '\n';
    for (std::size_t r = 0; r < data.rows(); ++r) {
        for (std::size_t j = 0; j < data.cols(); ++j) {
            if (j) out << ',';
            const auto& col = data.column(j);
            if (col.observed[r]) out << format_numeric(col.values[r]);
            else out << "NA";
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace mippc
