#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gammkit/basis.hpp"
#include "gammkit/bound_spec.hpp"
#include "gammkit/dataset.hpp"

namespace gammkit::engine {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// AR(1)-whitened regression system. Rows that start a series are copied unchanged; every
// other row becomes (row_t - rho * row_{t-1}) / sqrt(1 - rho^2).
struct WhitenedSystem {
    MatrixXd X;
    VectorXd y;
    double rho = 0.0;
    // log |det W| of the row transform; enters likelihood-based scores so that fits at
    // different rho remain comparable on the original response scale.
    double log_jacobian = 0.0;
};

[[nodiscard]] WhitenedSystem whiten(const MatrixXd& X, const VectorXd& y, const data::SeriesIndex& series,
                                    double rho);
// Applies the same transform to a single vector (or each column of a matrix).
[[nodiscard]] VectorXd whiten_vector(const VectorXd& v, const data::SeriesIndex& series, double rho);
[[nodiscard]] MatrixXd whiten_matrix(const MatrixXd& m, const data::SeriesIndex& series, double rho);

// Penalty structure over the columns of the design, independent of the basis machinery so
// that arbitrary penalized problems can be posed directly.
struct PenaltyBlock {
    std::string label;
    std::size_t first_col = 0;
    std::size_t n_cols = 0;
    std::vector<MatrixXd> matrices;
    std::vector<int> slots;  // global slot of each matrix
};

struct PenaltySet {
    std::size_t p = 0;
    int n_slots = 0;
    // Total unpenalized dimension M_p (parametric columns plus penalty null spaces).
    int null_dim = 0;
    std::vector<PenaltyBlock> blocks;
    // Term label owning each column, for rank-deficiency diagnostics.
    std::vector<std::string> column_owner;

    // S_lambda = sum_j lambda_j S_j as a dense p x p matrix.
    [[nodiscard]] MatrixXd total(const VectorXd& lambdas) const;
};

[[nodiscard]] PenaltySet penalty_set(const basis::DesignBlocks& design);
// Fills column_owner and null_dim for a hand-built set; `unpenalized` counts leading columns.
void finalize_penalty_set(PenaltySet& set, std::size_t unpenalized);

struct PlsSolution {
    VectorXd beta;
    double rss = 0.0;          // whitened residual sum of squares
    double penalty = 0.0;      // beta' S_lambda beta
    double deviance = 0.0;     // rss + penalty
    double log_det_xtx_s = 0.0;
    double log_det_s = 0.0;    // log det+ of S_lambda
};

// Penalized least-squares problem min |y - X b|^2 + b' S_lambda b on a whitened system.
// The system is reduced once to the triangular factor of X, so repeated solves cost O(p^3).
class PenalizedProblem {
public:
    PenalizedProblem(const WhitenedSystem& system, PenaltySet penalties);

    [[nodiscard]] std::size_t n() const noexcept { return n_; }
    [[nodiscard]] std::size_t p() const noexcept { return penalties_.p; }
    [[nodiscard]] const PenaltySet& penalties() const noexcept { return penalties_; }
    [[nodiscard]] double log_jacobian() const noexcept { return log_jacobian_; }

    // Pivoted Householder QR of [R; E] with E'E = S_lambda. Throws FitError naming the term
    // owning an unidentifiable direction.
    [[nodiscard]] PlsSolution fit_pls(const VectorXd& lambdas) const;
    // Restricted likelihood score (lower is better), profiled over sigma^2.
    [[nodiscard]] double reml_score(const VectorXd& lambdas) const;
    // (X'X + S_lambda)^{-1}
    [[nodiscard]] MatrixXd inverse(const VectorXd& lambdas) const;
    // diag((X'X + S)^{-1} X'X)
    [[nodiscard]] VectorXd edf_diagonal(const VectorXd& lambdas) const;
    [[nodiscard]] double log_det_penalty(const VectorXd& lambdas) const;

private:
    struct BlockDet {
        bool orthogonal = false;   // penalty ranges mutually orthogonal
        std::vector<int> ranks;     // per matrix
        std::vector<double> log_dets;  // per matrix, log det+ at lambda = 1
        std::vector<MatrixXd> roots;   // per matrix, E with E'E = S_j (rank rows)
        int total_rank = 0;
    };

    // Pivoted QR of [R; E] after checking lambdas and identifiability.
    [[nodiscard]] Eigen::ColPivHouseholderQR<MatrixXd> factor(const VectorXd& lambdas) const;
    [[nodiscard]] double score_from(double deviance, double log_det_xtx_s, double log_det_s) const;

    std::size_t n_ = 0;
    double log_jacobian_ = 0.0;
    PenaltySet penalties_;
    MatrixXd r_;         // p x p, R'R = X'X
    MatrixXd xtx_;
    VectorXd f_;         // first p entries of Q'y
    double rss_extra_ = 0.0;
    std::vector<BlockDet> dets_;
};

// Convenience wrappers matching the free-function form.
[[nodiscard]] PlsSolution fit_pls(const WhitenedSystem& system, const PenaltySet& penalties, const VectorXd& lambdas);
[[nodiscard]] double reml_score(const WhitenedSystem& system, const PenaltySet& penalties, const VectorXd& lambdas);

struct EdfResult {
    std::vector<double> per_block;  // in PenaltySet block order
    double parametric = 0.0;        // columns not covered by any block
    double total = 0.0;
};

[[nodiscard]] EdfResult edf(const PenalizedProblem& problem, const VectorXd& lambdas);

struct OptimizerOptions {
    std::vector<double> starts = {1e-2, 1.0, 1e2};
    int max_iterations = 200;
    double score_tol = 1e-8;
    double gradient_tol = 1e-5;
    double fd_step = 1e-4;            // in log(lambda)
    double log_lambda_min = -25.0;    // natural log bounds
    double log_lambda_max = 25.0;
    std::size_t max_slots = 12;
    unsigned threads = 1;
};

struct OptimizerResult {
    VectorXd lambdas;
    double score = 0.0;
    bool converged = false;
    int iterations = 0;
    std::size_t best_start = 0;
};

// Minimizes the REML score over log(lambda) by BFGS with central finite-difference gradients,
// from each start (all slots set to the start value); returns the best.
[[nodiscard]] OptimizerResult optimize_lambdas(const PenalizedProblem& problem, const OptimizerOptions& options = {});

struct FitOptions {
    basis::DesignOptions design;
    OptimizerOptions optimizer;
    // Skips smoothing-parameter selection.
    std::optional<VectorXd> fixed_lambdas;
};

struct TermEdf {
    std::string label;
    double edf = 0.0;
    std::size_t width = 0;
};

struct FittedGamm {
    formula::BoundSpec bound;
    basis::DesignBlocks design;
    data::SeriesIndex series;
    VectorXd y;
    VectorXd beta;
    MatrixXd Vb;
    VectorXd lambdas;
    double sigma2 = 0.0;
    double rho = 0.0;
    std::vector<TermEdf> edf_per_term;  // block order
    double edf_parametric = 0.0;
    double edf_total = 0.0;
    double reml_score = 0.0;
    double deviance = 0.0;
    double rss_whitened = 0.0;
    double rss_raw = 0.0;
    double log_jacobian = 0.0;
    int null_dim = 0;
    bool converged = true;
    VectorXd fitted;              // X beta on the response scale
    VectorXd residuals_raw;       // y - X beta
    VectorXd residuals_whitened;  // y~ - X~ beta
    // Observed range of each numeric covariate used by a smooth.
    std::map<std::string, std::pair<double, double>> covariate_ranges;

    [[nodiscard]] std::size_t n() const { return static_cast<std::size_t>(y.size()); }
    [[nodiscard]] double edf_of(std::string_view label) const;
};

[[nodiscard]] FittedGamm fit(const formula::BoundSpec& bound, const data::Dataset& data, const FitOptions& options = {});
// Parses nothing: binds `spec` to `data` then fits.
[[nodiscard]] FittedGamm fit(const formula::ModelSpec& spec, const data::Dataset& data, const FitOptions& options = {});

// Internal parallelism cap from GAMMKIT_THREADS (default: hardware concurrency).
[[nodiscard]] unsigned default_threads();

}  // namespace gammkit::engine
