#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gammkit/bound_spec.hpp"
#include "gammkit/dataset.hpp"
#include "gammkit/formula.hpp"

namespace gammkit::basis {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Natural cubic regression spline parameterized by its values at the knots.
// f'' at the knots is F * beta, with F's first and last rows zero.
class CubicRegressionSpline {
public:
    explicit CubicRegressionSpline(std::vector<double> knots);

    [[nodiscard]] std::size_t dim() const noexcept { return knots_.size(); }
    [[nodiscard]] const std::vector<double>& knots() const noexcept { return knots_; }
    // n x k basis; linear extrapolation outside the knot range.
    [[nodiscard]] MatrixXd basis(std::span<const double> x) const;
    // Integrated squared second derivative, D' B^{-1} D from the knot spacings.
    [[nodiscard]] MatrixXd penalty() const;
    // Integrated squared derivative of the given order over the knot range, by Gauss-Legendre
    // quadrature (exact for the piecewise cubic).
    [[nodiscard]] MatrixXd derivative_penalty(int order) const;

private:
    std::vector<double> knots_;
    MatrixXd f_;  // k x k map from knot values to knot second derivatives
};

// Places k knots at quantiles of the distinct values of x. Throws DataError if fewer than
// three distinct knots remain.
[[nodiscard]] CubicRegressionSpline build_crs_marginal(std::span<const double> x, int k);

// One-dimensional thin plate regression spline: radial functions |x - u|^3 / 12 on the knot
// sites, truncated to the k dominant eigenvectors, plus the null space {1, x}.
class ThinPlateSpline1D {
public:
    ThinPlateSpline1D(std::vector<double> sites, MatrixXd radial_coef, MatrixXd penalty);

    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(penalty_.rows()); }
    // n x k, columns: k-2 radial, then 1 and x.
    [[nodiscard]] MatrixXd basis(std::span<const double> x) const;
    [[nodiscard]] const MatrixXd& penalty() const noexcept { return penalty_; }

private:
    std::vector<double> sites_;
    MatrixXd radial_coef_;  // sites x (k-2)
    MatrixXd penalty_;
};

struct TprsOptions {
    // Distinct covariate values beyond this count are thinned to an evenly spaced subset
    // (by rank) before the eigendecomposition.
    std::size_t max_knots = 400;
};

// Evaluates a term's basis (after its identifiability constraint) at new covariate values.
class SmoothBasis {
public:
    virtual ~SmoothBasis() = default;
    // covariates: one vector per covariate of the term; level: factor level code for factor
    // smooths (the row is placed in that level's block) and random effects.
    [[nodiscard]] virtual MatrixXd evaluate(const std::vector<std::vector<double>>& covariates,
                                            std::optional<int> level) const = 0;
};

struct Penalty {
    MatrixXd matrix;  // over the block's own columns
    int slot = 0;     // local slot within the block, globalized by assemble_design
};

enum class BlockKind { tprs, tensor, factor_smooth, random_effect };

struct TermBlock {
    std::string label;       // e.g. "s(Time):Order=reversed"
    std::string term_label;  // formula term label, e.g. "s(Time,by=Order)"
    BlockKind kind = BlockKind::tprs;
    std::vector<std::string> covariates;
    std::size_t first_col = 0;
    std::size_t n_cols = 0;
    std::vector<Penalty> penalties;
    int null_space_dim = 0;
    // Sum-to-zero reparameterization: raw basis times this matrix gives the block columns.
    std::optional<MatrixXd> constraint;
    std::optional<std::string> by_var;
    std::optional<std::string> by_level;
    int by_level_code = -1;
    bool difference = false;
    // Factor levels for factor smooths and random effects (combined "a:b" labels for
    // two-factor random effects).
    std::vector<std::string> levels;
    // Random effects: level sets of the grouping factors (one or two entries); `slope` names the
    // numeric covariate of a random slope.
    std::vector<std::vector<std::string>> factor_levels;
    std::optional<std::string> slope;
    std::shared_ptr<const SmoothBasis> recipe;
    // Columns on the data rows; emptied once copied into the assembled design.
    MatrixXd design;

    [[nodiscard]] std::size_t last_col() const { return first_col + n_cols - 1; }
    // Block columns at new covariate values: recipe output times the constraint.
    [[nodiscard]] MatrixXd predict_matrix(const std::vector<std::vector<double>>& covariates,
                                          std::optional<int> level = std::nullopt) const;
    [[nodiscard]] MatrixXd total_penalty() const;
};

struct ParametricColumns {
    MatrixXd columns;
    std::vector<std::string> names;
    // Parametric term name for each column ("(Intercept)" for the intercept).
    std::vector<std::string> term_of_column;
};

// Intercept, treatment-coded factor dummies against the first level, numeric covariates.
[[nodiscard]] ParametricColumns build_parametric(const data::Dataset& data,
                                                 const std::vector<formula::BoundParametric>& terms,
                                                 bool intercept = true);

[[nodiscard]] TermBlock build_tprs(std::span<const double> x, int k, const TprsOptions& options = {});
[[nodiscard]] TermBlock build_tensor(const std::vector<std::span<const double>>& marginals,
                                     const std::vector<int>& k, std::size_t max_columns = 400);

// Unconstrained blocks, the input expected by build_by_smooth.
[[nodiscard]] TermBlock build_tprs_raw(std::span<const double> x, int k, const TprsOptions& options = {});
[[nodiscard]] TermBlock build_tensor_raw(const std::vector<std::span<const double>>& marginals,
                                         const std::vector<int>& k, std::size_t max_columns = 400);

// Masks copies of the unconstrained block built by `make_block` by the levels of `by`. Ordered factors give
// difference smooths for the non-reference levels; unordered factors one smooth per level.
[[nodiscard]] std::vector<TermBlock> build_by_smooth(const std::function<TermBlock()>& make_block,
                                                     const data::Column& by);

[[nodiscard]] TermBlock build_factor_smooth(std::span<const double> x, const data::Column& f, int k,
                                            std::optional<int> m);

// First column a factor; optional second column factor (interaction) or numeric (random slopes).
[[nodiscard]] TermBlock build_random_effect(const data::Column& first, const data::Column* second);

// Absorbs the sum-to-zero constraint of tprs, tensor and by blocks; factor smooths and random
// effects pass through unchanged.
[[nodiscard]] TermBlock apply_constraints(TermBlock block);

// Width minus the rank of the summed penalties (eigenvalue threshold 1e-10 x largest).
[[nodiscard]] int penalty_null_dim(const TermBlock& block);
[[nodiscard]] int numeric_rank(const MatrixXd& symmetric, double rel_tol = 1e-10);

struct DesignOptions {
    TprsOptions tprs;
    std::size_t tensor_max_columns = 400;
};

struct DesignBlocks {
    MatrixXd X;
    ParametricColumns parametric;  // columns emptied after assembly
    std::size_t n_parametric = 0;
    std::vector<TermBlock> blocks;
    int n_lambda_slots = 0;
    int total_null_dim = 0;
    // Global slot id -> label of the block owning it.
    std::vector<std::string> slot_labels;

    // Global slot id of each block penalty.
    [[nodiscard]] int global_slot(std::size_t block, std::size_t penalty) const;
    [[nodiscard]] const TermBlock& block(std::string_view label) const;
    [[nodiscard]] std::optional<std::size_t> block_index(std::string_view label) const;

    std::vector<std::vector<int>> slot_of;  // [block][penalty] -> global slot
};

[[nodiscard]] DesignBlocks assemble_design(const formula::BoundSpec& bound, const data::Dataset& data,
                                           const DesignOptions& options = {});

// Scales S so that its 1-norm matches the squared infinity-norm of the block's columns.
// Keeps smoothing parameters of different terms on comparable scales.
void normalize_penalties(TermBlock& block);

}  // namespace gammkit::basis
