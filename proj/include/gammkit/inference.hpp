#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gammkit/engine.hpp"

namespace gammkit::inference {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct ParametricRow {
    std::string name;
    double estimate = 0.0;
    double std_error = 0.0;
    double t_value = 0.0;
    double p_value = 1.0;
};

struct SmoothRow {
    std::string label;
    double edf = 0.0;
    double ref_df = 0.0;  // column count of the term
    double f_value = 0.0;
    double p_value = 1.0;
    int test_rank = 0;
};

struct SummaryTable {
    std::string formula;
    std::vector<ParametricRow> parametric;
    std::vector<SmoothRow> smooths;
    double adjusted_r2 = 0.0;
    double reml_score = 0.0;
    double aic = 0.0;
    std::size_t n = 0;
    double rho = 0.0;
    double edf_total = 0.0;
    double sigma2 = 0.0;
    bool converged = true;

    // Two panels: "A. parametric coefficients" then "B. smooth terms", then a footer.
    [[nodiscard]] std::string to_text() const;
    [[nodiscard]] nlohmann::json to_json() const;
};

[[nodiscard]] SummaryTable summarize(const engine::FittedGamm& model);

// 1 - (RSS_raw / (n - tau)) / var(y), var with divisor n - 1.
[[nodiscard]] double adjusted_r2(const engine::FittedGamm& model);
// -2 log-likelihood of the response at sigma2 (whitened residuals plus the whitening Jacobian)
// + 2 tau, tau = total edf.
[[nodiscard]] double aic(const engine::FittedGamm& model);

struct WaldTest {
    double statistic = 0.0;  // per rank
    int rank = 0;
    double p_value = 1.0;
};

// Rank-truncated Wald test of a smooth block: f = X_j beta_j in function space, pseudoinverse
// of its covariance at rank min(ceil(edf), width); p from F(rank, n - tau).
[[nodiscard]] WaldTest smooth_test(const engine::FittedGamm& model, std::size_t block_index);

struct CurveEstimate {
    std::string label;
    std::string covariate;
    std::optional<std::string> level;
    std::vector<double> grid;
    std::vector<double> fit;
    std::vector<double> se;
    // Set for difference curves requested at the reference level (identically zero).
    bool reference = false;
    // Fraction of grid points whose +-1.96 se band covers zero.
    std::optional<double> zero_containment;

    [[nodiscard]] std::vector<double> lower(double z = 1.96) const;
    [[nodiscard]] std::vector<double> upper(double z = 1.96) const;
    // Columns grid, fit, se, lower95, upper95.
    [[nodiscard]] std::string to_csv() const;
    [[nodiscard]] nlohmann::json to_json() const;
};

struct EvalOptions {
    bool allow_extrapolation = false;
    // Factor-smooth curves: the factor level to evaluate.
    std::optional<std::string> level;
};

// Curve of a one-covariate block (tprs, by-smooth block, factor smooth with options.level).
[[nodiscard]] CurveEstimate evaluate_smooth(const engine::FittedGamm& model, const std::string& label,
                                            const std::vector<double>& grid, const EvalOptions& options = {});

struct DifferenceOptions {
    bool allow_extrapolation = false;
    // Adds the treatment contrast of the by factor when it is also a parametric term, so the
    // curve is the full difference from the reference level.
    bool include_parametric_contrast = true;
};

// by_term_label: the formula label, e.g. "s(Time,by=Group)". The reference level yields an exact
// zero curve with `reference` set.
[[nodiscard]] CurveEstimate evaluate_difference(const engine::FittedGamm& model, const std::string& by_term_label,
                                                const std::string& level, const std::vector<double>& grid,
                                                const DifferenceOptions& options = {});

[[nodiscard]] double zero_containment(const std::vector<double>& fit, const std::vector<double>& se, double z = 1.96);

struct Surface {
    std::string label;
    std::vector<std::string> covariates;
    // Long format, x varying slowest.
    std::vector<double> x, z, fit, se;

    [[nodiscard]] std::string to_csv() const;
};

[[nodiscard]] Surface evaluate_surface(const engine::FittedGamm& model, const std::string& label,
                                       const std::vector<double>& grid_x, const std::vector<double>& grid_z,
                                       bool allow_extrapolation = false);

struct RandomEffectRow {
    std::vector<std::string> keys;  // one per grouping factor
    double coefficient = 0.0;
    double sd = 0.0;
};

struct RandomEffectTable {
    std::string label;
    std::vector<std::string> factors;
    std::optional<std::string> slope;
    std::vector<RandomEffectRow> rows;

    [[nodiscard]] std::string to_csv() const;
};

[[nodiscard]] RandomEffectTable random_effect_coefs(const engine::FittedGamm& model, const std::string& label);

struct Correlation {
    double r = 0.0;
    double t_stat = 0.0;
    int df = 0;
    double p_value = 1.0;
};

[[nodiscard]] Correlation pearson(const std::vector<double>& a, const std::vector<double>& b);
// Pairs the coefficients of the two levels of `split_factor` by the remaining key.
[[nodiscard]] Correlation coef_correlation(const RandomEffectTable& table, const std::string& split_factor);

struct ComparisonRow {
    std::string id;
    double reml = 0.0;
    double aic = 0.0;
    double adjusted_r2 = 0.0;
    double tau = 0.0;
    double rho = 0.0;
    double delta_reml = 0.0;
    double delta_aic = 0.0;
    double delta_adjusted_r2 = 0.0;
};

struct Comparison {
    std::vector<ComparisonRow> rows;
    std::vector<std::string> notes;

    [[nodiscard]] std::string to_text() const;
};

// Deltas are against the first model. Throws DataError when row counts differ.
[[nodiscard]] Comparison compare(const std::vector<const engine::FittedGamm*>& models,
                                 const std::vector<std::string>& ids = {});

}  // namespace gammkit::inference
