#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace causalfair::tabular {

enum class ColumnKind { numeric, nominal };

std::string_view to_string(ColumnKind kind) noexcept;

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    /// Distinct category labels; a nominal cell stores an index into this list.
    std::vector<std::string> levels;
    /// Only meaningful on the label column.
    std::optional<std::string> favorable_level;

    bool nominal() const noexcept { return kind == ColumnKind::nominal; }
    /// Index of `label` in `levels`, or -1.
    int level_index(std::string_view label) const noexcept;

    bool operator==(const ColumnSpec&) const = default;
};

/// Immutable column-major table. Numeric cells hold finite reals, nominal
/// cells hold the level index as an exact small integer.
class Dataset {
public:
    Dataset(std::string name, std::vector<ColumnSpec> schema, std::vector<std::vector<double>> columns,
            std::optional<std::string> label = std::nullopt);

    const std::string& name() const noexcept { return name_; }
    std::size_t rows() const noexcept { return columns_.empty() ? 0 : columns_.front().size(); }
    std::size_t cols() const noexcept { return schema_.size(); }

    const std::vector<ColumnSpec>& schema() const noexcept { return schema_; }
    const ColumnSpec& spec(std::size_t col) const { return schema_.at(col); }
    std::vector<std::string> column_names() const;

    /// Throws DataError naming the column when absent.
    std::size_t index_of(std::string_view column) const;
    std::optional<std::size_t> find(std::string_view column) const noexcept;

    std::span<const double> column(std::size_t col) const { return columns_.at(col); }
    double at(std::size_t row, std::size_t col) const { return columns_[col][row]; }
    int code(std::size_t row, std::size_t col) const { return static_cast<int>(columns_[col][row]); }
    std::vector<double> row(std::size_t row) const;

    /// Label column declared by the schema file, if any.
    const std::optional<std::string>& label() const noexcept { return label_; }

    /// Copy with one column's cells replaced.
    Dataset with_column(std::size_t col, std::vector<double> values) const;
    /// Copy restricted to the given rows, in the given order.
    Dataset select_rows(std::span<const std::size_t> rows) const;
    Dataset renamed(std::string name) const;

    /// Schema and cells equal; the dataset name is ignored.
    bool same_content(const Dataset& other) const noexcept;

private:
    std::string name_;
    std::vector<ColumnSpec> schema_;
    std::vector<std::vector<double>> columns_;
    std::optional<std::string> label_;
};

// ---------------------------------------------------------------------------
// CSV and schema files

struct SchemaHint {
    std::map<std::string, ColumnKind> kinds;
    std::optional<std::string> label;
    std::optional<std::string> favorable;
    /// Fixed level lists for nominal columns; cells outside the list are
    /// rejected and unobserved levels are kept.
    std::map<std::string, std::vector<std::string>> levels;
};

/// Hint that reproduces `data`'s kinds, levels and label exactly.
SchemaHint hint_of(const Dataset& data);

struct LoadResult {
    Dataset data;
    std::size_t dropped_rows = 0;
};

SchemaHint read_schema(const std::string& path);
SchemaHint parse_schema(std::string_view json_text);

LoadResult load_csv(const std::string& path, const std::optional<SchemaHint>& hint = std::nullopt);
LoadResult parse_csv(std::string_view text, std::string name, const std::optional<SchemaHint>& hint = std::nullopt);

/// Header plus rows; nominal cells as labels, numbers in shortest round-trip form.
void write_csv(const Dataset& data, std::ostream& out);
std::string to_csv(const Dataset& data);
void save_csv(const Dataset& data, const std::string& path);

/// Shortest representation that parses back to the same double.
std::string format_number(double value);

// ---------------------------------------------------------------------------
// Design-matrix encoding

struct EncodedColumn {
    std::size_t source = 0;       // index into the encoded source list
    std::string source_name;
    std::optional<int> level;     // dummy for this level; nullopt for numeric
};

struct Standardization {
    double mean = 0.0;
    double std = 1.0;
};

struct EncodedSource {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    int reference_level = -1;     // nominal only
    std::size_t level_count = 0;  // nominal only
    std::optional<Standardization> standardization;
};

struct EncodedMatrix {
    Eigen::MatrixXd values;
    std::vector<EncodedColumn> column_map;
    std::vector<EncodedSource> sources;
    std::vector<std::string> warnings;
};

/// Learns the encoding (reference levels, standardization) from one dataset
/// and applies it to any dataset carrying the same columns.
class Encoder {
public:
    static Encoder fit(const Dataset& data, std::span<const std::string> targets, bool standardize_numeric);

    EncodedMatrix transform(const Dataset& data) const;
    /// Encoded values of a single row, in column_map order.
    void transform_row(const Dataset& data, std::size_t row, std::span<double> out) const;

    const std::vector<EncodedSource>& sources() const noexcept { return sources_; }
    const std::vector<EncodedColumn>& columns() const noexcept { return columns_; }
    std::size_t width() const noexcept { return columns_.size(); }

private:
    std::vector<EncodedSource> sources_;
    std::vector<EncodedColumn> columns_;
    std::vector<std::string> warnings_;
};

EncodedMatrix encode(const Dataset& data, std::span<const std::string> targets, bool standardize_numeric);

/// Inverse of encode: raw cell values per source column, keyed by name.
std::map<std::string, std::vector<double>> decode(const EncodedMatrix& encoded);

/// Reference level for dummy coding: modal level, ties to the
/// lexicographically smallest label.
int modal_level(std::span<const double> codes, const ColumnSpec& spec);

// ---------------------------------------------------------------------------
// Gower distance

/// max - min per numeric column; 0 for nominal columns.
std::vector<double> numeric_ranges(const Dataset& data);

double gower_row_distance(std::span<const double> a, std::span<const double> b,
                          std::span<const ColumnSpec> schema, std::span<const double> ranges);

}  // namespace causalfair::tabular
