#include "gammkit/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "gammkit/error.hpp"

namespace gammkit::basis {

namespace {

std::vector<double> sorted_unique(std::span<const double> x) {
    std::vector<double> u(x.begin(), x.end());
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    return u;
}

// Index of the knot interval containing x, clamped to [0, k-2].
std::size_t interval_of(const std::vector<double>& knots, double x) {
    auto it = std::upper_bound(knots.begin(), knots.end(), x);
    std::size_t j = it == knots.begin() ? 0 : static_cast<std::size_t>(it - knots.begin()) - 1;
    return std::min(j, knots.size() - 2);
}

// Row-wise Kronecker product: column index = i * cols(b) + j.
MatrixXd row_kronecker(const MatrixXd& a, const MatrixXd& b) {
    MatrixXd out(a.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
        for (Eigen::Index j = 0; j < b.cols(); ++j) {
            out.col(i * b.cols() + j) = a.col(i).cwiseProduct(b.col(j));
        }
    }
    return out;
}

MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
    MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

class TprsBasis final : public SmoothBasis {
public:
    explicit TprsBasis(ThinPlateSpline1D spline) : spline_(std::move(spline)) {}
    MatrixXd evaluate(const std::vector<std::vector<double>>& cov, std::optional<int>) const override {
        return spline_.basis(cov.at(0));
    }

private:
    ThinPlateSpline1D spline_;
};

class TensorBasis final : public SmoothBasis {
public:
    explicit TensorBasis(std::vector<CubicRegressionSpline> margins) : margins_(std::move(margins)) {}
    MatrixXd evaluate(const std::vector<std::vector<double>>& cov, std::optional<int>) const override {
        if (cov.size() != margins_.size()) throw DataError("tensor evaluation needs one vector per margin");
        MatrixXd out = margins_[0].basis(cov[0]);
        for (std::size_t m = 1; m < margins_.size(); ++m) out = row_kronecker(out, margins_[m].basis(cov[m]));
        return out;
    }

private:
    std::vector<CubicRegressionSpline> margins_;
};

class FactorSmoothBasis final : public SmoothBasis {
public:
    FactorSmoothBasis(CubicRegressionSpline spline, std::size_t n_levels)
        : spline_(std::move(spline)), n_levels_(n_levels) {}
    MatrixXd evaluate(const std::vector<std::vector<double>>& cov, std::optional<int> level) const override {
        if (!level || *level < 0 || static_cast<std::size_t>(*level) >= n_levels_) {
            throw DataError("factor smooth evaluation needs a valid level");
        }
        const MatrixXd b = spline_.basis(cov.at(0));
        const auto k = static_cast<Eigen::Index>(spline_.dim());
        MatrixXd out = MatrixXd::Zero(b.rows(), k * static_cast<Eigen::Index>(n_levels_));
        out.middleCols(*level * k, k) = b;
        return out;
    }

private:
    CubicRegressionSpline spline_;
    std::size_t n_levels_;
};

class RandomEffectBasis final : public SmoothBasis {
public:
    RandomEffectBasis(std::size_t n_cols, bool slope) : n_cols_(n_cols), slope_(slope) {}
    // level is the combined column index; a random slope multiplies by covariates[0].
    MatrixXd evaluate(const std::vector<std::vector<double>>& cov, std::optional<int> level) const override {
        if (!level || *level < 0 || static_cast<std::size_t>(*level) >= n_cols_) {
            throw DataError("random effect evaluation needs a valid level");
        }
        const std::size_t n = slope_ ? cov.at(0).size() : std::max<std::size_t>(1, cov.empty() ? 1 : cov[0].size());
        MatrixXd out = MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n_cols_));
        for (std::size_t i = 0; i < n; ++i) out(static_cast<Eigen::Index>(i), *level) = slope_ ? cov[0][i] : 1.0;
        return out;
    }

private:
    std::size_t n_cols_;
    bool slope_;
};

}  // namespace

// ---------------------------------------------------------------------------------------------
// Cubic regression spline

CubicRegressionSpline::CubicRegressionSpline(std::vector<double> knots) : knots_(std::move(knots)) {
    const std::size_t k = knots_.size();
    if (k < 3) throw DataError("a cubic regression spline needs at least 3 knots");
    for (std::size_t i = 1; i < k; ++i) {
        if (!(knots_[i] > knots_[i - 1])) throw DataError("cubic spline knots must be strictly increasing");
    }
    const auto kk = static_cast<Eigen::Index>(k);
    VectorXd h(kk - 1);
    for (Eigen::Index i = 0; i + 1 < kk; ++i) h(i) = knots_[i + 1] - knots_[i];
    MatrixXd d = MatrixXd::Zero(kk - 2, kk);
    MatrixXd b = MatrixXd::Zero(kk - 2, kk - 2);
    for (Eigen::Index i = 0; i < kk - 2; ++i) {
        d(i, i) = 1.0 / h(i);
        d(i, i + 1) = -1.0 / h(i) - 1.0 / h(i + 1);
        d(i, i + 2) = 1.0 / h(i + 1);
        b(i, i) = (h(i) + h(i + 1)) / 3.0;
        if (i + 1 < kk - 2) {
            b(i, i + 1) = h(i + 1) / 6.0;
            b(i + 1, i) = h(i + 1) / 6.0;
        }
    }
    f_ = MatrixXd::Zero(kk, kk);
    f_.middleRows(1, kk - 2) = b.ldlt().solve(d);
}

MatrixXd CubicRegressionSpline::basis(std::span<const double> x) const {
    const auto k = static_cast<Eigen::Index>(knots_.size());
    MatrixXd out = MatrixXd::Zero(static_cast<Eigen::Index>(x.size()), k);
    const double lo = knots_.front();
    const double hi = knots_.back();
    for (std::size_t r = 0; r < x.size(); ++r) {
        const auto row = static_cast<Eigen::Index>(r);
        const double xv = x[r];
        if (xv < lo || xv > hi) {
            // Linear continuation using the end value and end slope.
            const bool left = xv < lo;
            const Eigen::Index j = left ? 0 : k - 2;
            const double h = knots_[j + 1] - knots_[j];
            // Slope at the end knot: d/dx of a-, a+, c-, c+ evaluated there.
            const double da_m = -1.0 / h;
            const double da_p = 1.0 / h;
            const double dc_m = left ? -h / 3.0 : h / 6.0;
            const double dc_p = left ? -h / 6.0 : h / 3.0;
            const Eigen::Index end = left ? 0 : k - 1;
            const double dx = xv - knots_[end];
            out(row, end) += 1.0;
            out(row, j) += dx * da_m;
            out(row, j + 1) += dx * da_p;
            out.row(row) += dx * (dc_m * f_.row(j) + dc_p * f_.row(j + 1));
            continue;
        }
        const auto j = static_cast<Eigen::Index>(interval_of(knots_, xv));
        const double h = knots_[j + 1] - knots_[j];
        const double am = (knots_[j + 1] - xv) / h;
        const double ap = (xv - knots_[j]) / h;
        const double cm = ((knots_[j + 1] - xv) * (knots_[j + 1] - xv) * (knots_[j + 1] - xv) / h -
                           h * (knots_[j + 1] - xv)) / 6.0;
        const double cp = ((xv - knots_[j]) * (xv - knots_[j]) * (xv - knots_[j]) / h - h * (xv - knots_[j])) / 6.0;
        out(row, j) += am;
        out(row, j + 1) += ap;
        out.row(row) += cm * f_.row(j) + cp * f_.row(j + 1);
    }
    return out;
}

MatrixXd CubicRegressionSpline::penalty() const {
    // D' B^{-1} D equals F' B F restricted to the interior rows; recompute from F for symmetry.
    const auto k = static_cast<Eigen::Index>(knots_.size());
    MatrixXd b = MatrixXd::Zero(k - 2, k - 2);
    MatrixXd d = MatrixXd::Zero(k - 2, k);
    for (Eigen::Index i = 0; i < k - 2; ++i) {
        const double h0 = knots_[i + 1] - knots_[i];
        const double h1 = knots_[i + 2] - knots_[i + 1];
        d(i, i) = 1.0 / h0;
        d(i, i + 1) = -1.0 / h0 - 1.0 / h1;
        d(i, i + 2) = 1.0 / h1;
        b(i, i) = (h0 + h1) / 3.0;
        if (i + 1 < k - 2) {
            b(i, i + 1) = h1 / 6.0;
            b(i + 1, i) = h1 / 6.0;
        }
    }
    return symmetrize(d.transpose() * b.ldlt().solve(d));
}

MatrixXd CubicRegressionSpline::derivative_penalty(int order) const {
    if (order < 0 || order > 2) throw DataError("derivative order must be 0, 1 or 2");
    // 4-point Gauss-Legendre on each interval: exact for polynomials up to degree 7.
    static constexpr double nodes[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                        0.8611363115940526};
    static constexpr double weights[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                          0.3478548451374538};
    const auto k = static_cast<Eigen::Index>(knots_.size());
    MatrixXd out = MatrixXd::Zero(k, k);
    for (Eigen::Index j = 0; j + 1 < k; ++j) {
        const double a = knots_[j];
        const double h = knots_[j + 1] - a;
        for (int q = 0; q < 4; ++q) {
            const double x = a + 0.5 * h * (nodes[q] + 1.0);
            const double t_m = knots_[j + 1] - x;
            const double t_p = x - a;
            VectorXd row = VectorXd::Zero(k);
            if (order == 0) {
                row(j) += t_m / h;
                row(j + 1) += t_p / h;
                row += ((t_m * t_m * t_m / h - h * t_m) / 6.0) * f_.row(j).transpose() +
                       ((t_p * t_p * t_p / h - h * t_p) / 6.0) * f_.row(j + 1).transpose();
            } else if (order == 1) {
                row(j) -= 1.0 / h;
                row(j + 1) += 1.0 / h;
                row += ((-3.0 * t_m * t_m / h + h) / 6.0) * f_.row(j).transpose() +
                       ((3.0 * t_p * t_p / h - h) / 6.0) * f_.row(j + 1).transpose();
            } else {
                row += (t_m / h) * f_.row(j).transpose() + (t_p / h) * f_.row(j + 1).transpose();
            }
            out += (0.5 * h * weights[q]) * row * row.transpose();
        }
    }
    return symmetrize(out);
}

CubicRegressionSpline build_crs_marginal(std::span<const double> x, int k) {
    if (k < 3) throw DataError(fmt::format("cubic regression spline needs k >= 3, got {}", k));
    const std::vector<double> u = sorted_unique(x);
    if (u.size() < 3) throw DataError(fmt::format("only {} distinct covariate values (need at least 3)", u.size()));
    std::vector<double> knots;
    const double n = static_cast<double>(u.size());
    for (int i = 0; i < k; ++i) {
        // Type-7 quantile at probability i / (k - 1).
        const double pos = (n - 1.0) * static_cast<double>(i) / static_cast<double>(k - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, u.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        const double q = u[lo] + frac * (u[hi] - u[lo]);
        if (knots.empty() || q > knots.back()) knots.push_back(q);
    }
    if (knots.size() < 3) {
        throw DataError(fmt::format("only {} distinct knots available (need at least 3)", knots.size()));
    }
    return CubicRegressionSpline(std::move(knots));
}

// ---------------------------------------------------------------------------------------------
// Thin plate regression spline

ThinPlateSpline1D::ThinPlateSpline1D(std::vector<double> sites, MatrixXd radial_coef, MatrixXd penalty)
    : sites_(std::move(sites)), radial_coef_(std::move(radial_coef)), penalty_(std::move(penalty)) {}

MatrixXd ThinPlateSpline1D::basis(std::span<const double> x) const {
    const auto n = static_cast<Eigen::Index>(x.size());
    const auto m = static_cast<Eigen::Index>(sites_.size());
    MatrixXd radial(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            const double r = std::abs(x[static_cast<std::size_t>(i)] - sites_[static_cast<std::size_t>(j)]);
            radial(i, j) = r * r * r / 12.0;
        }
    }
    const Eigen::Index kr = radial_coef_.cols();
    MatrixXd out(n, kr + 2);
    out.leftCols(kr) = radial * radial_coef_;
    for (Eigen::Index i = 0; i < n; ++i) {
        out(i, kr) = 1.0;
        out(i, kr + 1) = x[static_cast<std::size_t>(i)];
    }
    return out;
}

namespace {

ThinPlateSpline1D make_tprs(std::span<const double> x, int k, const TprsOptions& options) {
    if (k < 3) throw DataError(fmt::format("thin plate spline needs k >= 3, got {}", k));
    std::vector<double> u = sorted_unique(x);
    if (u.size() < static_cast<std::size_t>(k)) {
        throw DataError(fmt::format("thin plate spline with k={} needs at least {} distinct values, found {}", k,
                                    k, u.size()));
    }
    if (options.max_knots >= static_cast<std::size_t>(k) && u.size() > options.max_knots) {
        std::vector<double> thinned;
        const std::size_t m = options.max_knots;
        for (std::size_t i = 0; i < m; ++i) {
            const auto idx = static_cast<std::size_t>(
                std::llround(static_cast<double>(i) * static_cast<double>(u.size() - 1) / static_cast<double>(m - 1)));
            thinned.push_back(u[idx]);
        }
        u = std::move(thinned);
    }
    const auto m = static_cast<Eigen::Index>(u.size());
    MatrixXd e(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            const double r = std::abs(u[static_cast<std::size_t>(i)] - u[static_cast<std::size_t>(j)]);
            e(i, j) = r * r * r / 12.0;
        }
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(e);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const VectorXd& values = eig.eigenvalues();
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return std::abs(values(a)) > std::abs(values(b));
    });
    MatrixXd uk(m, k);
    VectorXd dk(k);
    for (int c = 0; c < k; ++c) {
        uk.col(c) = eig.eigenvectors().col(order[static_cast<std::size_t>(c)]);
        dk(c) = values(order[static_cast<std::size_t>(c)]);
    }
    MatrixXd t(m, 2);
    for (Eigen::Index i = 0; i < m; ++i) {
        t(i, 0) = 1.0;
        t(i, 1) = u[static_cast<std::size_t>(i)];
    }
    // Radial coefficients must be orthogonal to the polynomial null space: T' U_k delta = 0.
    const MatrixXd mt = uk.transpose() * t;
    Eigen::HouseholderQR<MatrixXd> qr(mt);
    const MatrixXd q = qr.householderQ();
    const MatrixXd z = q.rightCols(k - 2);
    MatrixXd penalty = MatrixXd::Zero(k, k);
    penalty.topLeftCorner(k - 2, k - 2) = symmetrize(z.transpose() * dk.asDiagonal() * z);
    return ThinPlateSpline1D(std::move(u), uk * z, std::move(penalty));
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// Blocks

MatrixXd TermBlock::predict_matrix(const std::vector<std::vector<double>>& covariates,
                                   std::optional<int> level) const {
    if (!recipe) throw DataError(fmt::format("term '{}' has no basis recipe", label));
    MatrixXd raw = recipe->evaluate(covariates, level);
    if (constraint) return raw * *constraint;
    return raw;
}

MatrixXd TermBlock::total_penalty() const {
    MatrixXd s = MatrixXd::Zero(static_cast<Eigen::Index>(n_cols), static_cast<Eigen::Index>(n_cols));
    for (const auto& p : penalties) s += p.matrix;
    return s;
}

int numeric_rank(const MatrixXd& symmetric, double rel_tol) {
    if (symmetric.size() == 0) return 0;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetric, Eigen::EigenvaluesOnly);
    const VectorXd& v = eig.eigenvalues();
    const double top = v.cwiseAbs().maxCoeff();
    if (top == 0.0) return 0;
    int rank = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i) rank += v(i) > rel_tol * top ? 1 : 0;
    return rank;
}

int penalty_null_dim(const TermBlock& block) {
    if (block.penalties.empty()) return static_cast<int>(block.n_cols);
    return static_cast<int>(block.n_cols) - numeric_rank(block.total_penalty());
}

void normalize_penalties(TermBlock& block) {
    if (block.design.size() == 0) return;
    const double row_norm = block.design.cwiseAbs().rowwise().sum().maxCoeff();
    const double ma_xx = row_norm * row_norm;
    if (ma_xx == 0.0) return;
    for (auto& p : block.penalties) {
        const double s_norm = p.matrix.cwiseAbs().colwise().sum().maxCoeff();
        if (s_norm > 0.0) p.matrix *= ma_xx / s_norm;
    }
}

TermBlock apply_constraints(TermBlock block) {
    if (block.kind == BlockKind::factor_smooth || block.kind == BlockKind::random_effect) return block;
    if (block.constraint) return block;
    const auto w = static_cast<Eigen::Index>(block.n_cols);
    const VectorXd c = block.design.colwise().sum().transpose();
    const MatrixXd cm = c;
    Eigen::HouseholderQR<MatrixXd> qr(cm);
    const MatrixXd q = qr.householderQ();
    const MatrixXd z = q.rightCols(w - 1);
    block.design = block.design * z;
    for (auto& p : block.penalties) p.matrix = symmetrize(z.transpose() * p.matrix * z);
    block.constraint = z;
    block.n_cols = static_cast<std::size_t>(w - 1);
    block.null_space_dim = penalty_null_dim(block);
    return block;
}

TermBlock build_tprs_raw(std::span<const double> x, int k, const TprsOptions& options) {
    ThinPlateSpline1D spline = make_tprs(x, k, options);
    TermBlock block;
    block.kind = BlockKind::tprs;
    block.design = spline.basis(x);
    block.n_cols = static_cast<std::size_t>(block.design.cols());
    block.penalties.push_back({spline.penalty(), 0});
    block.null_space_dim = penalty_null_dim(block);
    block.recipe = std::make_shared<TprsBasis>(std::move(spline));
    return block;
}

TermBlock build_tprs(std::span<const double> x, int k, const TprsOptions& options) {
    TermBlock block = apply_constraints(build_tprs_raw(x, k, options));
    normalize_penalties(block);
    return block;
}

TermBlock build_tensor_raw(const std::vector<std::span<const double>>& marginals, const std::vector<int>& k,
                           std::size_t max_columns) {
    if (marginals.size() < 2) throw DataError("a tensor product smooth needs at least two marginals");
    if (k.size() != marginals.size()) throw DataError("tensor: one k per marginal required");
    std::size_t total = 1;
    for (int kv : k) total *= static_cast<std::size_t>(kv);
    if (total > max_columns) {
        throw DataError(fmt::format("tensor product basis has {} columns, above the cap of {}", total, max_columns));
    }
    std::vector<CubicRegressionSpline> margins;
    for (std::size_t m = 0; m < marginals.size(); ++m) margins.push_back(build_crs_marginal(marginals[m], k[m]));

    TermBlock block;
    block.kind = BlockKind::tensor;
    block.design = margins[0].basis(marginals[0]);
    for (std::size_t m = 1; m < margins.size(); ++m) {
        block.design = row_kronecker(block.design, margins[m].basis(marginals[m]));
    }
    block.n_cols = static_cast<std::size_t>(block.design.cols());
    for (std::size_t m = 0; m < margins.size(); ++m) {
        // Each margin's penalty is scaled by its own basis before the Kronecker expansion so
        // that the result does not depend on covariate units.
        MatrixXd sm = margins[m].penalty();
        const MatrixXd bm = margins[m].basis(marginals[m]);
        const double row_norm = bm.cwiseAbs().rowwise().sum().maxCoeff();
        sm *= row_norm * row_norm / sm.cwiseAbs().colwise().sum().maxCoeff();
        MatrixXd full = MatrixXd::Identity(1, 1);
        for (std::size_t j = 0; j < margins.size(); ++j) {
            const auto kj = static_cast<Eigen::Index>(margins[j].dim());
            full = kron(full, j == m ? sm : MatrixXd(MatrixXd::Identity(kj, kj)));
        }
        block.penalties.push_back({symmetrize(full), static_cast<int>(m)});
    }
    block.null_space_dim = penalty_null_dim(block);
    block.recipe = std::make_shared<TensorBasis>(std::move(margins));
    return block;
}

TermBlock build_tensor(const std::vector<std::span<const double>>& marginals, const std::vector<int>& k,
                       std::size_t max_columns) {
    TermBlock block = apply_constraints(build_tensor_raw(marginals, k, max_columns));
    normalize_penalties(block);
    return block;
}

std::vector<TermBlock> build_by_smooth(const std::function<TermBlock()>& make_block, const data::Column& by) {
    if (!by.is_factor()) throw DataError(fmt::format("by variable '{}' must be a factor", by.name));
    if (by.levels.size() < 2) throw DataError(fmt::format("by factor '{}' needs at least 2 levels", by.name));
    const bool difference = by.kind == data::ColumnKind::ordered_factor;
    const TermBlock base = make_block();
    std::vector<TermBlock> out;
    for (std::size_t level = difference ? 1 : 0; level < by.levels.size(); ++level) {
        TermBlock b = base;
        std::size_t rows = 0;
        for (Eigen::Index i = 0; i < b.design.rows(); ++i) {
            if (by.codes[static_cast<std::size_t>(i)] != static_cast<int>(level)) {
                b.design.row(i).setZero();
            } else {
                ++rows;
            }
        }
        if (rows <= b.n_cols) {
            throw DataError(fmt::format("level '{}' of '{}' has {} rows, too few for a {}-column smooth",
                                        by.levels[level], by.name, rows, b.n_cols));
        }
        b.by_var = by.name;
        b.by_level = by.levels[level];
        b.by_level_code = static_cast<int>(level);
        b.difference = difference;
        b = apply_constraints(std::move(b));
        normalize_penalties(b);
        out.push_back(std::move(b));
    }
    return out;
}

TermBlock build_factor_smooth(std::span<const double> x, const data::Column& f, int k, std::optional<int> m) {
    if (!(f.is_factor() || f.kind == data::ColumnKind::boolean)) {
        throw DataError(fmt::format("factor smooth needs a factor, '{}' is not one", f.name));
    }
    const std::size_t n_levels = f.levels.size();
    if (n_levels < 2) throw DataError(fmt::format("factor '{}' needs at least 2 levels", f.name));
    if (k < 3) throw DataError(fmt::format("factor smooth needs k >= 3, got {}", k));
    std::vector<std::set<double>> distinct(n_levels);
    for (std::size_t i = 0; i < x.size(); ++i) distinct[static_cast<std::size_t>(f.codes[i])].insert(x[i]);
    for (std::size_t l = 0; l < n_levels; ++l) {
        if (distinct[l].size() < 3) {
            throw DataError(fmt::format("level '{}' of '{}' has {} distinct covariate values (need 3)", f.levels[l],
                                        f.name, distinct[l].size()));
        }
    }
    CubicRegressionSpline spline = build_crs_marginal(x, k);
    const auto kk = static_cast<Eigen::Index>(spline.dim());
    const MatrixXd b = spline.basis(x);
    const auto nl = static_cast<Eigen::Index>(n_levels);

    TermBlock block;
    block.kind = BlockKind::factor_smooth;
    block.levels = f.levels;
    block.design = MatrixXd::Zero(b.rows(), kk * nl);
    for (Eigen::Index i = 0; i < b.rows(); ++i) {
        block.design.row(i).segment(f.codes[static_cast<std::size_t>(i)] * kk, kk) = b.row(i);
    }
    block.n_cols = static_cast<std::size_t>(block.design.cols());

    const int order = m.value_or(2);
    MatrixXd wiggle = order == 2 ? spline.penalty() : spline.derivative_penalty(1);
    // Ridge on the wiggliness penalty's null space, so constant and linear parts shrink too.
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(wiggle);
    const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
    MatrixXd null_proj = MatrixXd::Zero(kk, kk);
    for (Eigen::Index i = 0; i < kk; ++i) {
        if (eig.eigenvalues()(i) <= 1e-10 * top) {
            null_proj += eig.eigenvectors().col(i) * eig.eigenvectors().col(i).transpose();
        }
    }
    const double row_norm = b.cwiseAbs().rowwise().sum().maxCoeff();
    const double ma_xx = row_norm * row_norm;
    wiggle *= ma_xx / wiggle.cwiseAbs().colwise().sum().maxCoeff();
    null_proj *= ma_xx / null_proj.cwiseAbs().colwise().sum().maxCoeff();

    MatrixXd s_wiggle = MatrixXd::Zero(kk * nl, kk * nl);
    MatrixXd s_null = MatrixXd::Zero(kk * nl, kk * nl);
    for (Eigen::Index l = 0; l < nl; ++l) {
        s_wiggle.block(l * kk, l * kk, kk, kk) = symmetrize(wiggle);
        s_null.block(l * kk, l * kk, kk, kk) = symmetrize(null_proj);
    }
    block.penalties.push_back({std::move(s_wiggle), 0});
    block.penalties.push_back({std::move(s_null), 1});
    block.null_space_dim = penalty_null_dim(block);
    block.recipe = std::make_shared<FactorSmoothBasis>(std::move(spline), n_levels);
    return block;
}

TermBlock build_random_effect(const data::Column& first, const data::Column* second) {
    if (first.kind == data::ColumnKind::numeric) {
        throw DataError(fmt::format("random effect grouping column '{}' must be a factor", first.name));
    }
    TermBlock block;
    block.kind = BlockKind::random_effect;
    const std::size_t n = first.codes.size();
    const bool slope = second && second->kind == data::ColumnKind::numeric;
    std::size_t n_cols = first.levels.size();
    if (second && !slope) {
        n_cols = first.levels.size() * second->levels.size();
        for (const auto& a : first.levels) {
            for (const auto& b : second->levels) block.levels.push_back(a + ":" + b);
        }
    } else {
        block.levels = first.levels;
    }
    block.design = MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n_cols));
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        const int a = first.codes[i];
        if (!second) {
            block.design(row, a) = 1.0;
        } else if (slope) {
            block.design(row, a) = second->numeric[i];
        } else {
            block.design(row, a * static_cast<int>(second->levels.size()) + second->codes[i]) = 1.0;
        }
    }
    block.n_cols = n_cols;
    block.factor_levels.push_back(first.levels);
    if (second && !slope) block.factor_levels.push_back(second->levels);
    if (slope) block.slope = second->name;
    const auto w = static_cast<Eigen::Index>(n_cols);
    block.penalties.push_back({MatrixXd::Identity(w, w), 0});
    block.null_space_dim = 0;
    block.recipe = std::make_shared<RandomEffectBasis>(n_cols, slope);
    return block;
}

ParametricColumns build_parametric(const data::Dataset& data, const std::vector<formula::BoundParametric>& terms,
                                   bool intercept) {
    const auto n = static_cast<Eigen::Index>(data.n_rows());
    std::vector<VectorXd> cols;
    ParametricColumns out;
    if (intercept) {
        cols.emplace_back(VectorXd::Ones(n));
        out.names.emplace_back("(Intercept)");
        out.term_of_column.emplace_back("(Intercept)");
    }
    for (const auto& t : terms) {
        const data::Column& col = data.columns().at(t.column);
        if (col.kind == data::ColumnKind::numeric) {
            VectorXd v = Eigen::Map<const VectorXd>(col.numeric.data(), n);
            if ((v.array() == v(0)).all()) {
                throw DataError(fmt::format("numeric term '{}' is constant (collinear with the intercept)", t.name));
            }
            cols.push_back(std::move(v));
            out.names.push_back(t.name);
            out.term_of_column.push_back(t.name);
            continue;
        }
        if (col.levels.size() < 2) throw DataError(fmt::format("factor '{}' needs at least 2 levels", t.name));
        for (std::size_t l = 1; l < col.levels.size(); ++l) {
            VectorXd v = VectorXd::Zero(n);
            for (Eigen::Index i = 0; i < n; ++i) v(i) = col.codes[static_cast<std::size_t>(i)] == static_cast<int>(l) ? 1.0 : 0.0;
            cols.push_back(std::move(v));
            out.names.push_back(t.name + "=" + col.levels[l]);
            out.term_of_column.push_back(t.name);
        }
    }
    out.columns.resize(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) out.columns.col(static_cast<Eigen::Index>(j)) = cols[j];
    return out;
}

// ---------------------------------------------------------------------------------------------
// Assembly

int DesignBlocks::global_slot(std::size_t block, std::size_t penalty) const { return slot_of.at(block).at(penalty); }

std::optional<std::size_t> DesignBlocks::block_index(std::string_view label) const {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (blocks[i].label == label) return i;
    }
    return std::nullopt;
}

const TermBlock& DesignBlocks::block(std::string_view label) const {
    auto idx = block_index(label);
    if (!idx) throw DataError(fmt::format("no smooth term labelled '{}'", label));
    return blocks[*idx];
}

namespace {

std::span<const double> numeric_of(const data::Dataset& data, std::size_t col) {
    return data.columns().at(col).numeric;
}

}  // namespace

DesignBlocks assemble_design(const formula::BoundSpec& bound, const data::Dataset& data,
                             const DesignOptions& options) {
    DesignBlocks out;
    out.parametric = build_parametric(data, bound.parametric, bound.spec.intercept);
    out.n_parametric = static_cast<std::size_t>(out.parametric.columns.cols());

    for (const auto& s : bound.smooths) {
        const auto& term = s.term;
        std::vector<TermBlock> made;
        switch (term.kind) {
            case formula::SmoothKind::tprs: {
                const auto x = numeric_of(data, s.columns[0]);
                if (s.by_column) {
                    made = build_by_smooth([&] { return build_tprs_raw(x, term.basis_dim_k[0], options.tprs); },
                                           data.columns()[*s.by_column]);
                } else {
                    made.push_back(build_tprs(x, term.basis_dim_k[0], options.tprs));
                }
                break;
            }
            case formula::SmoothKind::tensor: {
                std::vector<std::span<const double>> xs;
                for (auto c : s.columns) xs.push_back(numeric_of(data, c));
                if (s.by_column) {
                    made = build_by_smooth(
                        [&] { return build_tensor_raw(xs, term.basis_dim_k, options.tensor_max_columns); },
                        data.columns()[*s.by_column]);
                } else {
                    made.push_back(build_tensor(xs, term.basis_dim_k, options.tensor_max_columns));
                }
                break;
            }
            case formula::SmoothKind::factor_smooth:
                made.push_back(build_factor_smooth(numeric_of(data, s.columns[s.fs_numeric]),
                                                   data.columns()[s.columns[s.fs_factor]], term.basis_dim_k[0],
                                                   term.shrinkage_order_m));
                break;
            case formula::SmoothKind::random_effect:
                made.push_back(build_random_effect(data.columns()[s.columns[0]],
                                                   s.columns.size() > 1 ? &data.columns()[s.columns[1]] : nullptr));
                break;
        }
        for (auto& b : made) {
            b.term_label = term.label;
            b.covariates = term.covariates;
            if (term.kind == formula::SmoothKind::factor_smooth) {
                // Numeric covariate first, then the factor.
                b.covariates = {term.covariates[s.fs_numeric], term.covariates[s.fs_factor]};
            }
            b.label = term.label;
            if (b.by_level) {
                const std::string base = term.kind == formula::SmoothKind::tensor
                                             ? fmt::format("te({})", fmt::join(term.covariates, ","))
                                             : fmt::format("s({})", term.covariates[0]);
                b.label = fmt::format("{}:{}={}", base, *term.by_var, *b.by_level);
            }
            out.blocks.push_back(std::move(b));
        }
    }

    std::size_t p = out.n_parametric;
    for (const auto& b : out.blocks) p += b.n_cols;
    const std::size_t n = data.n_rows();
    if (p >= n) {
        std::string terms;
        for (const auto& b : out.blocks) terms += fmt::format(" {}[{}]", b.label, b.n_cols);
        throw DataError(fmt::format("model has {} coefficients for {} rows; terms:{} parametric[{}]", p, n, terms,
                                    out.n_parametric));
    }
    out.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    out.X.leftCols(static_cast<Eigen::Index>(out.n_parametric)) = out.parametric.columns;
    out.parametric.columns.resize(0, 0);
    std::size_t col = out.n_parametric;
    int slot = 0;
    out.total_null_dim = static_cast<int>(out.n_parametric);
    for (auto& b : out.blocks) {
        b.first_col = col;
        out.X.middleCols(static_cast<Eigen::Index>(col), static_cast<Eigen::Index>(b.n_cols)) = b.design;
        b.design.resize(0, 0);
        col += b.n_cols;
        std::vector<int> slots;
        int local_max = -1;
        for (const auto& pen : b.penalties) {
            slots.push_back(slot + pen.slot);
            local_max = std::max(local_max, pen.slot);
        }
        for (int i = 0; i <= local_max; ++i) out.slot_labels.push_back(b.label);
        slot += local_max + 1;
        out.slot_of.push_back(std::move(slots));
        out.total_null_dim += b.null_space_dim;
    }
    out.n_lambda_slots = slot;
    return out;
}

}  // namespace gammkit::basis
