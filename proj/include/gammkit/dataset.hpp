#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gammkit::data {

enum class ColumnKind { numeric, factor, ordered_factor, boolean };

[[nodiscard]] std::string_view to_string(ColumnKind kind);

// A typed column. Numeric columns use `numeric`; factor-like and boolean columns use
// `codes` into `levels` (booleans have levels {FALSE, TRUE}).
struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    std::vector<double> numeric;
    std::vector<int> codes;
    std::vector<std::string> levels;

    [[nodiscard]] std::size_t size() const { return kind == ColumnKind::numeric ? numeric.size() : codes.size(); }
    [[nodiscard]] bool is_factor() const {
        return kind == ColumnKind::factor || kind == ColumnKind::ordered_factor;
    }

    static Column make_numeric(std::string name, std::vector<double> values);
    static Column make_factor(std::string name, std::vector<int> codes, std::vector<std::string> levels,
                              bool ordered = false);
    // Levels ordered by first appearance.
    static Column make_factor(std::string name, const std::vector<std::string>& values, bool ordered = false);
    static Column make_boolean(std::string name, const std::vector<bool>& values);
};

// Immutable after construction. Column names are unique and all columns have equal length.
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::vector<Column> columns);

    [[nodiscard]] std::size_t n_rows() const noexcept { return n_rows_; }
    [[nodiscard]] std::size_t n_cols() const noexcept { return columns_.size(); }
    [[nodiscard]] const std::vector<Column>& columns() const noexcept { return columns_; }
    [[nodiscard]] bool has(std::string_view name) const;
    [[nodiscard]] std::optional<std::size_t> index_of(std::string_view name) const;
    // Throws DataError naming the column when absent.
    [[nodiscard]] const Column& column(std::string_view name) const;

    // Rows where keep[i] is true, in order.
    [[nodiscard]] Dataset filter_rows(const std::vector<bool>& keep) const;
    [[nodiscard]] Dataset with_column(Column column) const;

private:
    std::vector<Column> columns_;
    std::size_t n_rows_ = 0;
};

struct ColumnOverride {
    std::optional<ColumnKind> kind;
    // Explicit level order; also marks the column as an ordered factor.
    std::optional<std::vector<std::string>> levels;
    // Rows whose value lies outside [lo, hi] are dropped at ingestion.
    std::optional<std::pair<double, double>> range;
    bool standardize = false;
};

using SchemaOverrides = std::map<std::string, ColumnOverride>;

// Reads a schema override JSON file: {column: {"kind": ..., "levels": [...], "range": [lo, hi],
// "standardize": bool}}.
[[nodiscard]] SchemaOverrides load_schema(const std::filesystem::path& path);
[[nodiscard]] SchemaOverrides parse_schema(std::string_view json_text);

// RFC-4180 CSV with a header row. Kinds are inferred (all numeric -> numeric, all TRUE/FALSE ->
// boolean, otherwise factor) unless overridden.
[[nodiscard]] Dataset load_csv(const std::filesystem::path& path, const SchemaOverrides& overrides = {});
[[nodiscard]] Dataset parse_csv(std::string_view text, const SchemaOverrides& overrides = {});

// Writes RFC-4180 CSV, numbers in shortest round-trip form, booleans as TRUE/FALSE.
[[nodiscard]] std::string to_csv(const Dataset& data);
void write_csv(const Dataset& data, const std::filesystem::path& path);

struct SeriesIndex {
    std::vector<bool> start_flags;
    std::vector<int> series_id;
    std::vector<std::size_t> series_lengths;

    [[nodiscard]] std::size_t n_series() const noexcept { return series_lengths.size(); }
    [[nodiscard]] std::size_t n_rows() const noexcept { return start_flags.size(); }
    // First row of each series.
    [[nodiscard]] std::vector<std::size_t> series_starts() const;
};

[[nodiscard]] SeriesIndex build_series_index(const Dataset& data, std::string_view start_col);
[[nodiscard]] SeriesIndex build_series_index(const std::vector<bool>& flags);
[[nodiscard]] SeriesIndex single_series(std::size_t n);

}  // namespace gammkit::data
