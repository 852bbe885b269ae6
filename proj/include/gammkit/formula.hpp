#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gammkit::formula {

enum class SmoothKind { tprs, tensor, factor_smooth, random_effect };
enum class Family { gaussian };

[[nodiscard]] std::string_view to_string(SmoothKind kind);

struct SmoothTerm {
    SmoothKind kind = SmoothKind::tprs;
    std::vector<std::string> covariates;
    std::optional<std::string> by_var;
    // One entry per marginal for tensors, a single entry otherwise. Empty for random effects.
    std::vector<int> basis_dim_k;
    // True when k was given explicitly in the formula text.
    bool k_explicit = false;
    std::optional<int> shrinkage_order_m;
    std::string label;

    bool operator==(const SmoothTerm&) const = default;
};

struct ModelSpec {
    std::string response;
    std::vector<std::string> parametric_terms;
    std::vector<SmoothTerm> smooth_terms;
    // False for "y ~ 0 + ..." style formulas. The grammar only produces true.
    bool intercept = true;
    double rho = 0.0;
    std::optional<std::string> ar_start_column;
    Family family = Family::gaussian;

    bool operator==(const ModelSpec&) const = default;

    // Every label in source order: parametric names, then smooth labels.
    [[nodiscard]] std::vector<std::string> term_labels() const;
};

// Default basis dimensions when k= is omitted.
inline constexpr int kDefaultTprsK = 10;
inline constexpr int kDefaultTensorMarginalK = 5;
inline constexpr int kDefaultFactorSmoothK = 10;

// Parses "response ~ term + term ...". Terms are bare column names, the literal 1,
// s(...) or te(...) with the keyword options by=, bs="fs"|"re", k= and m=.
// Throws ParseError (syntax, with byte offset) or DataError (contradictory options).
[[nodiscard]] ModelSpec parse_formula(std::string_view text);

// Sets the AR(1) options after checking 0 <= rho < 1 and that rho > 0 has a start column.
void set_ar_options(ModelSpec& spec, double rho, std::optional<std::string> ar_start_column);

// Checks the ModelSpec invariants; throws DataError naming the first violation.
void check_invariants(const ModelSpec& spec);

// Canonical formula text. parse_formula(pretty_print(s)) reproduces s's formula part.
[[nodiscard]] std::string pretty_print(const ModelSpec& spec);

[[nodiscard]] std::string make_label(const SmoothTerm& term);

}  // namespace gammkit::formula
