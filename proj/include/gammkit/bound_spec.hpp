#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gammkit/dataset.hpp"
#include "gammkit/formula.hpp"

namespace gammkit::formula {

struct BoundParametric {
    std::string name;
    std::size_t column = 0;
    data::ColumnKind kind = data::ColumnKind::numeric;
    // Factor-like terms only; the first level is the reference.
    std::vector<std::string> levels;
};

struct BoundSmooth {
    SmoothTerm term;
    std::vector<std::size_t> columns;  // covariate column indices, formula order
    std::vector<data::ColumnKind> kinds;
    std::optional<std::size_t> by_column;
    std::vector<std::string> by_levels;
    // Ordered by-factor: difference smooths for the non-reference levels only.
    bool by_difference = false;
    // Levels that receive their own block.
    std::vector<std::string> block_levels;
    // Factor smooths: position of the numeric and factor covariates within `columns`.
    std::size_t fs_numeric = 0;
    std::size_t fs_factor = 1;
    std::vector<std::string> factor_levels;
};

struct BoundSpec {
    ModelSpec spec;
    std::size_t response = 0;
    std::vector<BoundParametric> parametric;
    std::vector<BoundSmooth> smooths;
    std::optional<std::size_t> ar_start;
    std::size_t n_rows = 0;
};

// Resolves column references against `data` and checks their kinds.
// Throws DataError naming the offending column.
[[nodiscard]] BoundSpec validate_against(const ModelSpec& spec, const data::Dataset& data);

}  // namespace gammkit::formula
