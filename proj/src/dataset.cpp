#include "gammkit/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "gammkit/error.hpp"

namespace gammkit::data {

std::string_view to_string(ColumnKind kind) {
    switch (kind) {
        case ColumnKind::numeric: return "numeric";
        case ColumnKind::factor: return "factor";
        case ColumnKind::ordered_factor: return "ordered_factor";
        case ColumnKind::boolean: return "boolean";
    }
    return "unknown";
}

Column Column::make_numeric(std::string name, std::vector<double> values) {
    for (double v : values) {
        if (!std::isfinite(v)) throw DataError(fmt::format("column '{}' has a non-finite value", name));
    }
    Column c;
    c.name = std::move(name);
    c.kind = ColumnKind::numeric;
    c.numeric = std::move(values);
    return c;
}

Column Column::make_factor(std::string name, std::vector<int> codes, std::vector<std::string> levels,
                           bool ordered) {
    for (int code : codes) {
        if (code < 0 || static_cast<std::size_t>(code) >= levels.size()) {
            throw DataError(fmt::format("column '{}' has a code outside its level set", name));
        }
    }
    Column c;
    c.name = std::move(name);
    c.kind = ordered ? ColumnKind::ordered_factor : ColumnKind::factor;
    c.codes = std::move(codes);
    c.levels = std::move(levels);
    return c;
}

Column Column::make_factor(std::string name, const std::vector<std::string>& values, bool ordered) {
    std::vector<std::string> levels;
    std::unordered_map<std::string, int> lookup;
    std::vector<int> codes;
    codes.reserve(values.size());
    for (const auto& v : values) {
        auto [it, inserted] = lookup.emplace(v, static_cast<int>(levels.size()));
        if (inserted) levels.push_back(v);
        codes.push_back(it->second);
    }
    return make_factor(std::move(name), std::move(codes), std::move(levels), ordered);
}

Column Column::make_boolean(std::string name, const std::vector<bool>& values) {
    Column c;
    c.name = std::move(name);
    c.kind = ColumnKind::boolean;
    c.levels = {"FALSE", "TRUE"};
    c.codes.reserve(values.size());
    for (bool v : values) c.codes.push_back(v ? 1 : 0);
    return c;
}

Dataset::Dataset(std::vector<Column> columns) : columns_(std::move(columns)) {
    std::set<std::string> names;
    for (const auto& c : columns_) {
        if (!names.insert(c.name).second) throw DataError(fmt::format("duplicate column name '{}'", c.name));
    }
    if (!columns_.empty()) n_rows_ = columns_.front().size();
    for (const auto& c : columns_) {
        if (c.size() != n_rows_) {
            throw DataError(fmt::format("column '{}' has {} rows, expected {}", c.name, c.size(), n_rows_));
        }
    }
}

bool Dataset::has(std::string_view name) const { return index_of(name).has_value(); }

std::optional<std::size_t> Dataset::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        if (columns_[i].name == name) return i;
    }
    return std::nullopt;
}

const Column& Dataset::column(std::string_view name) const {
    auto idx = index_of(name);
    if (!idx) throw DataError(fmt::format("column '{}' not found in data", name));
    return columns_[*idx];
}

Dataset Dataset::filter_rows(const std::vector<bool>& keep) const {
    if (keep.size() != n_rows_) throw DataError("row mask length does not match data");
    std::vector<Column> out;
    out.reserve(columns_.size());
    for (const auto& c : columns_) {
        Column f = c;
        f.numeric.clear();
        f.codes.clear();
        for (std::size_t i = 0; i < n_rows_; ++i) {
            if (!keep[i]) continue;
            if (c.kind == ColumnKind::numeric) {
                f.numeric.push_back(c.numeric[i]);
            } else {
                f.codes.push_back(c.codes[i]);
            }
        }
        out.push_back(std::move(f));
    }
    return Dataset(std::move(out));
}

Dataset Dataset::with_column(Column column) const {
    std::vector<Column> cols = columns_;
    cols.push_back(std::move(column));
    return Dataset(std::move(cols));
}

namespace {

ColumnKind parse_kind(const std::string& s) {
    if (s == "numeric") return ColumnKind::numeric;
    if (s == "factor") return ColumnKind::factor;
    if (s == "ordered_factor" || s == "ordered") return ColumnKind::ordered_factor;
    if (s == "boolean") return ColumnKind::boolean;
    throw DataError(fmt::format("unknown column kind '{}'", s));
}

std::vector<std::vector<std::string>> split_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool any = false;
    std::size_t i = 0;
    // Skip a UTF-8 byte order mark.
    if (text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
    for (; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        any = true;
        if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (c == '\r' || c == '\n') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
            any = false;
        } else {
            field += c;
        }
    }
    if (in_quotes) throw DataError("unterminated quoted field in CSV");
    if (any || !field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;
    double v = 0.0;
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || p != last) return std::nullopt;
    return v;
}

std::optional<bool> parse_bool(const std::string& s) {
    if (s == "TRUE" || s == "true" || s == "True") return true;
    if (s == "FALSE" || s == "false" || s == "False") return false;
    return std::nullopt;
}

}  // namespace

SchemaOverrides parse_schema(std::string_view json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("malformed schema JSON: {}", e.what()));
    }
    if (!j.is_object()) throw DataError("schema JSON must be an object keyed by column name");
    SchemaOverrides out;
    try {
        for (const auto& [name, spec] : j.items()) {
            ColumnOverride o;
            if (spec.contains("kind")) o.kind = parse_kind(spec.at("kind").get<std::string>());
            if (spec.contains("levels")) o.levels = spec.at("levels").get<std::vector<std::string>>();
            if (spec.contains("range")) {
                auto r = spec.at("range").get<std::vector<double>>();
                if (r.size() != 2 || !(r[0] <= r[1])) {
                    throw DataError(fmt::format("range for '{}' must be [lo, hi] with lo <= hi", name));
                }
                o.range = std::pair{r[0], r[1]};
            }
            if (spec.contains("standardize")) o.standardize = spec.at("standardize").get<bool>();
            out.emplace(name, std::move(o));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("malformed schema JSON: {}", e.what()));
    }
    return out;
}

SchemaOverrides load_schema(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open schema file '{}'", path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_schema(ss.str());
}

Dataset parse_csv(std::string_view text, const SchemaOverrides& overrides) {
    auto rows = split_csv(text);
    if (rows.empty()) throw DataError("CSV input is empty");
    const auto& header = rows.front();
    const std::size_t ncol = header.size();
    const std::size_t nrow = rows.size() - 1;
    if (nrow == 0) throw DataError("CSV input has a header but no data rows");
    for (const auto& [name, o] : overrides) {
        bool found = false;
        for (const auto& h : header) found = found || h == name;
        if (!found) throw DataError(fmt::format("schema override names absent column '{}'", name));
    }
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != ncol) {
            throw DataError(fmt::format("ragged CSV: line {} has {} fields, header has {}", r + 1,
                                        rows[r].size(), ncol));
        }
        for (std::size_t c = 0; c < ncol; ++c) {
            if (rows[r][c].empty()) {
                throw DataError(fmt::format("missing value in column '{}' at line {}", header[c], r + 1));
            }
        }
    }

    std::vector<Column> columns;
    std::vector<bool> keep(nrow, true);
    for (std::size_t c = 0; c < ncol; ++c) {
        const std::string& name = header[c];
        auto ov_it = overrides.find(name);
        const ColumnOverride* ov = ov_it == overrides.end() ? nullptr : &ov_it->second;

        std::optional<ColumnKind> kind = ov ? ov->kind : std::nullopt;
        if (!kind && ov && ov->levels) kind = ColumnKind::ordered_factor;
        std::vector<double> nums(nrow);
        bool all_numeric = true;
        bool all_bool = true;
        for (std::size_t r = 0; r < nrow; ++r) {
            const auto& cell = rows[r + 1][c];
            auto v = parse_double(cell);
            if (v) {
                nums[r] = *v;
            } else {
                all_numeric = false;
            }
            all_bool = all_bool && parse_bool(cell).has_value();
        }
        if (!kind) kind = all_numeric ? ColumnKind::numeric : all_bool ? ColumnKind::boolean : ColumnKind::factor;

        if (*kind == ColumnKind::numeric) {
            for (std::size_t r = 0; r < nrow; ++r) {
                if (!parse_double(rows[r + 1][c])) {
                    throw DataError(fmt::format("non-numeric cell '{}' in numeric column '{}' at line {}",
                                                rows[r + 1][c], name, r + 2));
                }
                if (!std::isfinite(nums[r])) {
                    throw DataError(fmt::format("non-finite value in column '{}' at line {}", name, r + 2));
                }
            }
            if (ov && ov->range) {
                for (std::size_t r = 0; r < nrow; ++r) {
                    if (nums[r] < ov->range->first || nums[r] > ov->range->second) keep[r] = false;
                }
            }
            Column col;
            col.name = name;
            col.kind = ColumnKind::numeric;
            col.numeric = std::move(nums);
            columns.push_back(std::move(col));
        } else if (*kind == ColumnKind::boolean) {
            std::vector<bool> flags(nrow);
            for (std::size_t r = 0; r < nrow; ++r) {
                auto b = parse_bool(rows[r + 1][c]);
                if (!b) {
                    throw DataError(fmt::format("non-boolean cell '{}' in boolean column '{}' at line {}",
                                                rows[r + 1][c], name, r + 2));
                }
                flags[r] = *b;
            }
            columns.push_back(Column::make_boolean(name, flags));
        } else {
            std::vector<std::string> values(nrow);
            for (std::size_t r = 0; r < nrow; ++r) values[r] = rows[r + 1][c];
            if (ov && ov->levels) {
                std::unordered_map<std::string, int> lookup;
                for (std::size_t l = 0; l < ov->levels->size(); ++l) {
                    lookup.emplace((*ov->levels)[l], static_cast<int>(l));
                }
                std::vector<int> codes(nrow);
                for (std::size_t r = 0; r < nrow; ++r) {
                    auto it = lookup.find(values[r]);
                    if (it == lookup.end()) {
                        throw DataError(fmt::format("value '{}' in column '{}' is not among the declared levels",
                                                    values[r], name));
                    }
                    codes[r] = it->second;
                }
                columns.push_back(Column::make_factor(name, std::move(codes), *ov->levels,
                                                      *kind == ColumnKind::ordered_factor));
            } else {
                columns.push_back(Column::make_factor(name, values, *kind == ColumnKind::ordered_factor));
            }
        }
    }

    Dataset out(std::move(columns));
    bool all_kept = true;
    for (bool k : keep) all_kept = all_kept && k;
    if (!all_kept) out = out.filter_rows(keep);
    if (out.n_rows() == 0) throw DataError("range filters removed every row");

    bool any_standardize = false;
    for (const auto& [name, o] : overrides) any_standardize = any_standardize || o.standardize;
    if (!any_standardize) return out;
    std::vector<Column> cols = out.columns();
    for (auto& col : cols) {
        auto it = overrides.find(col.name);
        if (it == overrides.end() || !it->second.standardize) continue;
        if (col.kind != ColumnKind::numeric) {
            throw DataError(fmt::format("cannot standardize non-numeric column '{}'", col.name));
        }
        const double n = static_cast<double>(col.numeric.size());
        double mean = 0.0;
        for (double v : col.numeric) mean += v;
        mean /= n;
        double ss = 0.0;
        for (double v : col.numeric) ss += (v - mean) * (v - mean);
        const double sd = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
        if (sd == 0.0) throw DataError(fmt::format("cannot standardize constant column '{}'", col.name));
        for (double& v : col.numeric) v = (v - mean) / sd;
    }
    return Dataset(std::move(cols));
}

Dataset load_csv(const std::filesystem::path& path, const SchemaOverrides& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open data file '{}'", path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str(), overrides);
}

namespace {

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace

std::string to_csv(const Dataset& data) {
    std::string out;
    const auto& cols = data.columns();
    for (std::size_t c = 0; c < cols.size(); ++c) {
        if (c > 0) out += ',';
        out += quote_if_needed(cols[c].name);
    }
    out += '\n';
    char buf[64];
    for (std::size_t r = 0; r < data.n_rows(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (c > 0) out += ',';
            const auto& col = cols[c];
            if (col.kind == ColumnKind::numeric) {
                auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), col.numeric[r]);
                out.append(buf, p);
            } else {
                out += quote_if_needed(col.levels[static_cast<std::size_t>(col.codes[r])]);
            }
        }
        out += '\n';
    }
    return out;
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    out << to_csv(data);
}

std::vector<std::size_t> SeriesIndex::series_starts() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < start_flags.size(); ++i) {
        if (start_flags[i]) out.push_back(i);
    }
    return out;
}

SeriesIndex build_series_index(const std::vector<bool>& flags) {
    if (flags.empty()) throw DataError("series start flags are empty");
    if (!flags.front()) throw DataError("first row must start a series (start flag is FALSE)");
    SeriesIndex idx;
    idx.start_flags = flags;
    idx.series_id.resize(flags.size());
    int id = -1;
    for (std::size_t i = 0; i < flags.size(); ++i) {
        if (flags[i]) {
            ++id;
            idx.series_lengths.push_back(0);
        }
        idx.series_id[i] = id;
        ++idx.series_lengths.back();
    }
    return idx;
}

SeriesIndex build_series_index(const Dataset& data, std::string_view start_col) {
    const Column& col = data.column(start_col);
    if (col.kind != ColumnKind::boolean) {
        throw DataError(fmt::format("AR start column '{}' must be boolean, found {}", start_col,
                                    to_string(col.kind)));
    }
    std::vector<bool> flags(col.codes.size());
    for (std::size_t i = 0; i < flags.size(); ++i) flags[i] = col.codes[i] != 0;
    return build_series_index(flags);
}

SeriesIndex single_series(std::size_t n) {
    std::vector<bool> flags(n, false);
    if (n > 0) flags[0] = true;
    return build_series_index(flags);
}

}  // namespace gammkit::data
