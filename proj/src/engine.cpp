#include "gammkit/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <future>
#include <limits>
#include <numbers>
#include <thread>

#include <fmt/format.h>

#include "gammkit/error.hpp"

namespace gammkit::engine {

// ---------------------------------------------------------------------------------------------
// Whitening

namespace {

void check_rho(double rho) {
    if (!(rho >= 0.0 && rho < 1.0)) throw DataError(fmt::format("rho={} outside [0, 1)", rho));
}

}  // namespace

MatrixXd whiten_matrix(const MatrixXd& m, const data::SeriesIndex& series, double rho) {
    check_rho(rho);
    if (static_cast<std::size_t>(m.rows()) != series.n_rows()) {
        throw DataError(fmt::format("series index covers {} rows, matrix has {}", series.n_rows(), m.rows()));
    }
    if (rho == 0.0) return m;
    const double scale = 1.0 / std::sqrt(1.0 - rho * rho);
    MatrixXd out(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (series.start_flags[static_cast<std::size_t>(i)]) {
            out.row(i) = m.row(i);
        } else {
            out.row(i) = (m.row(i) - rho * m.row(i - 1)) * scale;
        }
    }
    return out;
}

VectorXd whiten_vector(const VectorXd& v, const data::SeriesIndex& series, double rho) {
    return whiten_matrix(MatrixXd(v), series, rho).col(0);
}

WhitenedSystem whiten(const MatrixXd& X, const VectorXd& y, const data::SeriesIndex& series, double rho) {
    if (X.rows() != y.size()) throw DataError("design and response lengths differ");
    WhitenedSystem out;
    out.X = whiten_matrix(X, series, rho);
    out.y = whiten_vector(y, series, rho);
    out.rho = rho;
    const double transformed = static_cast<double>(series.n_rows() - series.n_series());
    out.log_jacobian = rho == 0.0 ? 0.0 : -0.5 * transformed * std::log(1.0 - rho * rho);
    return out;
}

// ---------------------------------------------------------------------------------------------
// Penalties

MatrixXd PenaltySet::total(const VectorXd& lambdas) const {
    MatrixXd s = MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    for (const auto& b : blocks) {
        const auto first = static_cast<Eigen::Index>(b.first_col);
        const auto w = static_cast<Eigen::Index>(b.n_cols);
        for (std::size_t j = 0; j < b.matrices.size(); ++j) {
            s.block(first, first, w, w) += lambdas(b.slots[j]) * b.matrices[j];
        }
    }
    return s;
}

PenaltySet penalty_set(const basis::DesignBlocks& design) {
    PenaltySet set;
    set.p = static_cast<std::size_t>(design.X.cols());
    set.n_slots = design.n_lambda_slots;
    set.null_dim = design.total_null_dim;
    set.column_owner.assign(set.p, "parametric terms");
    for (std::size_t c = 0; c < design.n_parametric; ++c) set.column_owner[c] = design.parametric.term_of_column[c];
    for (std::size_t bi = 0; bi < design.blocks.size(); ++bi) {
        const auto& b = design.blocks[bi];
        PenaltyBlock pb;
        pb.label = b.label;
        pb.first_col = b.first_col;
        pb.n_cols = b.n_cols;
        for (std::size_t j = 0; j < b.penalties.size(); ++j) {
            pb.matrices.push_back(b.penalties[j].matrix);
            pb.slots.push_back(design.global_slot(bi, j));
        }
        for (std::size_t c = b.first_col; c < b.first_col + b.n_cols; ++c) set.column_owner[c] = b.label;
        set.blocks.push_back(std::move(pb));
    }
    return set;
}

void finalize_penalty_set(PenaltySet& set, std::size_t unpenalized) {
    set.column_owner.assign(set.p, "");
    for (std::size_t c = 0; c < unpenalized && c < set.p; ++c) set.column_owner[c] = "parametric terms";
    int null_dim = static_cast<int>(unpenalized);
    int n_slots = 0;
    for (const auto& b : set.blocks) {
        for (std::size_t c = b.first_col; c < b.first_col + b.n_cols; ++c) set.column_owner[c] = b.label;
        MatrixXd s = MatrixXd::Zero(static_cast<Eigen::Index>(b.n_cols), static_cast<Eigen::Index>(b.n_cols));
        for (const auto& m : b.matrices) s += m;
        null_dim += static_cast<int>(b.n_cols) - basis::numeric_rank(s);
        for (int slot : b.slots) n_slots = std::max(n_slots, slot + 1);
    }
    set.null_dim = null_dim;
    set.n_slots = n_slots;
}

// ---------------------------------------------------------------------------------------------
// Penalized least squares

namespace {

double sum_top_log_eigen(const MatrixXd& s, int rank) {
    if (rank == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(s, Eigen::EigenvaluesOnly);
    const VectorXd& v = eig.eigenvalues();  // ascending
    double out = 0.0;
    for (Eigen::Index i = v.size() - rank; i < v.size(); ++i) {
        if (!(v(i) > 0.0)) return -std::numeric_limits<double>::infinity();
        out += std::log(v(i));
    }
    return out;
}

MatrixXd penalty_root(const MatrixXd& s, int rank) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(s);
    const Eigen::Index w = s.rows();
    MatrixXd root(rank, w);
    for (Eigen::Index i = 0; i < rank; ++i) {
        const Eigen::Index k = w - 1 - i;  // largest first
        root.row(i) = std::sqrt(std::max(eig.eigenvalues()(k), 0.0)) * eig.eigenvectors().col(k).transpose();
    }
    return root;
}

}  // namespace

PenalizedProblem::PenalizedProblem(const WhitenedSystem& system, PenaltySet penalties)
    : n_(static_cast<std::size_t>(system.X.rows())),
      log_jacobian_(system.log_jacobian),
      penalties_(std::move(penalties)) {
    const Eigen::Index p = system.X.cols();
    if (static_cast<std::size_t>(p) != penalties_.p) throw DataError("penalty set does not match design width");
    if (system.X.rows() <= p) throw DataError("more coefficients than rows");
    Eigen::HouseholderQR<MatrixXd> qr(system.X);
    r_ = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
    const VectorXd qty = qr.householderQ().adjoint() * system.y;
    f_ = qty.head(p);
    rss_extra_ = qty.tail(qty.size() - p).squaredNorm();
    xtx_ = r_.transpose() * r_;

    for (const auto& b : penalties_.blocks) {
        BlockDet d;
        const auto w = static_cast<Eigen::Index>(b.n_cols);
        MatrixXd sum = MatrixXd::Zero(w, w);
        for (const auto& m : b.matrices) {
            sum += m;
            const int r = basis::numeric_rank(m);
            d.ranks.push_back(r);
            d.log_dets.push_back(sum_top_log_eigen(m, r));
            d.roots.push_back(penalty_root(m, r));
        }
        d.total_rank = basis::numeric_rank(sum);
        d.orthogonal = true;
        for (std::size_t i = 0; i < b.matrices.size(); ++i) {
            for (std::size_t j = i + 1; j < b.matrices.size(); ++j) {
                const double cross = (b.matrices[i] * b.matrices[j]).norm();
                if (cross > 1e-9 * b.matrices[i].norm() * b.matrices[j].norm()) d.orthogonal = false;
            }
        }
        dets_.push_back(std::move(d));
    }
}

double PenalizedProblem::log_det_penalty(const VectorXd& lambdas) const {
    double out = 0.0;
    for (std::size_t bi = 0; bi < penalties_.blocks.size(); ++bi) {
        const auto& b = penalties_.blocks[bi];
        const auto& d = dets_[bi];
        if (d.orthogonal) {
            for (std::size_t j = 0; j < b.matrices.size(); ++j) {
                if (d.ranks[j] == 0) continue;
                out += d.ranks[j] * std::log(lambdas(b.slots[j])) + d.log_dets[j];
            }
            continue;
        }
        const auto w = static_cast<Eigen::Index>(b.n_cols);
        MatrixXd s = MatrixXd::Zero(w, w);
        for (std::size_t j = 0; j < b.matrices.size(); ++j) s += lambdas(b.slots[j]) * b.matrices[j];
        out += sum_top_log_eigen(s, d.total_rank);
    }
    return out;
}

Eigen::ColPivHouseholderQR<MatrixXd> PenalizedProblem::factor(const VectorXd& lambdas) const {
    if (lambdas.size() != penalties_.n_slots) {
        throw DataError(fmt::format("expected {} smoothing parameters, got {}", penalties_.n_slots, lambdas.size()));
    }
    for (Eigen::Index i = 0; i < lambdas.size(); ++i) {
        if (!(lambdas(i) >= 0.0) || !std::isfinite(lambdas(i))) throw DataError("smoothing parameters must be >= 0");
    }
    const auto p = static_cast<Eigen::Index>(penalties_.p);
    // Square root of S_lambda from the per-matrix roots, so widely different lambdas in one
    // block do not lose the small penalty's directions.
    Eigen::Index ne = 0;
    for (std::size_t bi = 0; bi < penalties_.blocks.size(); ++bi) {
        const auto& b = penalties_.blocks[bi];
        for (std::size_t j = 0; j < b.matrices.size(); ++j)
            if (lambdas(b.slots[j]) > 0.0) ne += dets_[bi].roots[j].rows();
    }
    MatrixXd a = MatrixXd::Zero(p + ne, p);
    a.topRows(p) = r_;
    Eigen::Index at = p;
    for (std::size_t bi = 0; bi < penalties_.blocks.size(); ++bi) {
        const auto& b = penalties_.blocks[bi];
        for (std::size_t j = 0; j < b.matrices.size(); ++j) {
            const double lam = lambdas(b.slots[j]);
            if (!(lam > 0.0)) continue;
            const MatrixXd& root = dets_[bi].roots[j];
            a.block(at, static_cast<Eigen::Index>(b.first_col), root.rows(), root.cols()) = std::sqrt(lam) * root;
            at += root.rows();
        }
    }
    Eigen::ColPivHouseholderQR<MatrixXd> qr(a);
    qr.setThreshold(1e-11);
    if (qr.rank() < p) {
        const auto col = static_cast<std::size_t>(qr.colsPermutation().indices()(qr.rank()));
        throw FitError(fmt::format("penalized system is rank deficient ({} of {}); unidentifiable direction in '{}'",
                                   qr.rank(), p, penalties_.column_owner.at(col)));
    }
    return qr;
}

PlsSolution PenalizedProblem::fit_pls(const VectorXd& lambdas) const {
    const auto qr = factor(lambdas);
    const auto p = static_cast<Eigen::Index>(penalties_.p);
    VectorXd rhs = VectorXd::Zero(qr.rows());
    rhs.head(p) = f_;
    PlsSolution sol;
    sol.beta = qr.solve(rhs);
    const MatrixXd& packed = qr.matrixQR();
    for (Eigen::Index i = 0; i < p; ++i) sol.log_det_xtx_s += 2.0 * std::log(std::abs(packed(i, i)));
    sol.rss = (f_ - r_ * sol.beta).squaredNorm() + rss_extra_;
    sol.penalty = sol.beta.dot(penalties_.total(lambdas) * sol.beta);
    sol.deviance = sol.rss + sol.penalty;
    sol.log_det_s = log_det_penalty(lambdas);
    return sol;
}

double PenalizedProblem::score_from(double deviance, double log_det_xtx_s, double log_det_s) const {
    const double dof = static_cast<double>(n_) - static_cast<double>(penalties_.null_dim);
    if (!(deviance > 0.0)) throw FitError("degenerate fit: penalized deviance is not positive");
    const double sigma2 = deviance / dof;
    return 0.5 * (dof * std::log(2.0 * std::numbers::pi * sigma2) + dof + log_det_xtx_s - log_det_s) - log_jacobian_;
}

double PenalizedProblem::reml_score(const VectorXd& lambdas) const {
    // Cholesky on the reduced p x p system; the orthogonal route is the fallback when the
    // penalized cross-product is numerically indefinite.
    const MatrixXd s = penalties_.total(lambdas);
    const MatrixXd a = xtx_ + s;
    Eigen::LLT<MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) {
        const MatrixXd& l = llt.matrixLLT();
        double log_det = 0.0;
        bool ok = true;
        for (Eigen::Index i = 0; i < l.rows(); ++i) {
            ok = ok && l(i, i) > 1e-12 * std::sqrt(a(i, i) + 1e-300);
            log_det += 2.0 * std::log(l(i, i));
        }
        if (ok) {
            const VectorXd beta = llt.solve(r_.transpose() * f_);
            const double rss = (f_ - r_ * beta).squaredNorm() + rss_extra_;
            const double dev = rss + beta.dot(s * beta);
            return score_from(dev, log_det, log_det_penalty(lambdas));
        }
    }
    const PlsSolution sol = fit_pls(lambdas);
    return score_from(sol.deviance, sol.log_det_xtx_s, sol.log_det_s);
}

MatrixXd PenalizedProblem::inverse(const VectorXd& lambdas) const {
    // [R; E] P = Q T, so (X'X + S)^-1 = P T^-1 T^-T P'.
    const auto qr = factor(lambdas);
    const auto p = static_cast<Eigen::Index>(penalties_.p);
    const MatrixXd t = qr.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    const MatrixXd t_inv = t.triangularView<Eigen::Upper>().solve(MatrixXd::Identity(p, p));
    const MatrixXd inner = t_inv * t_inv.transpose();
    const auto& perm = qr.colsPermutation();
    MatrixXd inv = perm * inner * perm.transpose();
    return 0.5 * (inv + inv.transpose());
}

VectorXd PenalizedProblem::edf_diagonal(const VectorXd& lambdas) const {
    const MatrixXd f = inverse(lambdas) * xtx_;
    return f.diagonal();
}

PlsSolution fit_pls(const WhitenedSystem& system, const PenaltySet& penalties, const VectorXd& lambdas) {
    return PenalizedProblem(system, penalties).fit_pls(lambdas);
}

double reml_score(const WhitenedSystem& system, const PenaltySet& penalties, const VectorXd& lambdas) {
    return PenalizedProblem(system, penalties).reml_score(lambdas);
}

EdfResult edf(const PenalizedProblem& problem, const VectorXd& lambdas) {
    const VectorXd diag = problem.edf_diagonal(lambdas);
    EdfResult out;
    std::vector<bool> covered(problem.p(), false);
    for (const auto& b : problem.penalties().blocks) {
        const double e = diag.segment(static_cast<Eigen::Index>(b.first_col), static_cast<Eigen::Index>(b.n_cols)).sum();
        out.per_block.push_back(e);
        for (std::size_t c = b.first_col; c < b.first_col + b.n_cols; ++c) covered[c] = true;
    }
    for (std::size_t c = 0; c < problem.p(); ++c) {
        if (!covered[c]) out.parametric += diag(static_cast<Eigen::Index>(c));
    }
    out.total = diag.sum();
    return out;
}

// ---------------------------------------------------------------------------------------------
// Smoothing parameter selection

namespace {

struct StartResult {
    VectorXd theta;
    double score = std::numeric_limits<double>::infinity();
    bool converged = false;
    int iterations = 0;
};

class Objective {
public:
    Objective(const PenalizedProblem& problem, const OptimizerOptions& options)
        : problem_(problem), options_(options) {}

    double operator()(const VectorXd& theta) const {
        try {
            const double s = problem_.reml_score(theta.array().exp().matrix());
            return std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
        } catch (const FitError&) {
            return std::numeric_limits<double>::infinity();
        }
    }

    VectorXd gradient(const VectorXd& theta) const {
        VectorXd g(theta.size());
        const double h = options_.fd_step;
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
            VectorXd up = theta;
            VectorXd down = theta;
            up(i) += h;
            down(i) -= h;
            g(i) = ((*this)(up) - (*this)(down)) / (2.0 * h);
            if (!std::isfinite(g(i))) g(i) = 0.0;
        }
        return g;
    }

    VectorXd clamp(VectorXd theta) const {
        return theta.cwiseMax(options_.log_lambda_min).cwiseMin(options_.log_lambda_max);
    }

    // Gradient with components zeroed where the bound blocks descent.
    VectorXd projected(const VectorXd& theta, const VectorXd& g) const {
        VectorXd out = g;
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            if (theta(i) <= options_.log_lambda_min && g(i) > 0.0) out(i) = 0.0;
            if (theta(i) >= options_.log_lambda_max && g(i) < 0.0) out(i) = 0.0;
        }
        return out;
    }

private:
    const PenalizedProblem& problem_;
    const OptimizerOptions& options_;
};

StartResult run_bfgs(const Objective& obj, VectorXd theta, const OptimizerOptions& options) {
    StartResult res;
    theta = obj.clamp(std::move(theta));
    double f = obj(theta);
    VectorXd g = obj.gradient(theta);
    const Eigen::Index m = theta.size();
    MatrixXd h_inv = MatrixXd::Identity(m, m);
    // Gradient noise floor of central differences; below it a failed line search means the
    // minimum has been located as precisely as the score allows.
    constexpr double kNoiseGradient = 1e-3;
    bool reset_once = false;
    for (int it = 0; it < options.max_iterations; ++it) {
        res.iterations = it + 1;
        VectorXd pg = obj.projected(theta, g);
        if (pg.cwiseAbs().maxCoeff() < options.gradient_tol) {
            res.converged = true;
            break;
        }
        VectorXd dir = -(h_inv * pg);
        for (Eigen::Index i = 0; i < m; ++i) {
            if ((theta(i) <= options.log_lambda_min && dir(i) < 0.0) ||
                (theta(i) >= options.log_lambda_max && dir(i) > 0.0)) {
                dir(i) = 0.0;
            }
        }
        if (dir.dot(pg) >= 0.0) {
            dir = -pg;
            h_inv.setIdentity();
        }
        const double max_step = dir.cwiseAbs().maxCoeff();
        if (max_step > 5.0) dir *= 5.0 / max_step;
        double alpha = 1.0;
        VectorXd trial;
        double f_trial = std::numeric_limits<double>::infinity();
        const double slope = dir.dot(pg);
        while (alpha > 1e-10) {
            trial = obj.clamp(theta + alpha * dir);
            f_trial = obj(trial);
            if (f_trial <= f + 1e-4 * alpha * slope) break;
            alpha *= 0.5;
        }
        if (!(f_trial < f)) {
            if (!reset_once && !h_inv.isIdentity()) {
                h_inv.setIdentity();
                reset_once = true;
                continue;
            }
            res.converged = pg.cwiseAbs().maxCoeff() < kNoiseGradient;
            break;
        }
        reset_once = false;
        const VectorXd g_new = obj.gradient(trial);
        const VectorXd s = trial - theta;
        const VectorXd yv = g_new - g;
        const double sy = s.dot(yv);
        const double improvement = f - f_trial;
        theta = trial;
        f = f_trial;
        g = g_new;
        if (sy > 1e-12) {
            const double rho_k = 1.0 / sy;
            const MatrixXd id = MatrixXd::Identity(m, m);
            h_inv = (id - rho_k * s * yv.transpose()) * h_inv * (id - rho_k * yv * s.transpose()) +
                    rho_k * s * s.transpose();
        }
        const VectorXd pg_new = obj.projected(theta, g);
        if (improvement < options.score_tol && pg_new.cwiseAbs().maxCoeff() < options.gradient_tol) {
            res.converged = true;
            break;
        }
    }
    res.theta = theta;
    res.score = f;
    return res;
}

}  // namespace

unsigned default_threads() {
    if (const char* env = std::getenv("GAMMKIT_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

OptimizerResult optimize_lambdas(const PenalizedProblem& problem, const OptimizerOptions& options) {
    const int slots = problem.penalties().n_slots;
    if (static_cast<std::size_t>(slots) > options.max_slots) {
        throw DataError(fmt::format("{} smoothing parameters exceed the limit of {}", slots, options.max_slots));
    }
    OptimizerResult out;
    if (slots == 0) {
        out.lambdas = VectorXd(0);
        out.score = problem.reml_score(out.lambdas);
        out.converged = true;
        return out;
    }
    const Objective obj(problem, options);
    std::vector<StartResult> results(options.starts.size());
    auto run = [&](std::size_t i) {
        results[i] = run_bfgs(obj, VectorXd::Constant(slots, std::log(options.starts[i])), options);
    };
    if (options.threads > 1 && options.starts.size() > 1) {
        std::vector<std::future<void>> jobs;
        for (std::size_t i = 0; i < options.starts.size(); ++i) jobs.push_back(std::async(std::launch::async, run, i));
        for (auto& j : jobs) j.get();
    } else {
        for (std::size_t i = 0; i < options.starts.size(); ++i) run(i);
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < results.size(); ++i) {
        if (results[i].score < results[best].score) best = i;
    }
    if (!std::isfinite(results[best].score)) {
        // Surfaces the solver's diagnostic (e.g. the term owning a rank-deficient direction).
        (void)problem.fit_pls(VectorXd::Constant(slots, options.starts.front()));
        throw FitError("REML score is not finite at any start");
    }
    out.lambdas = results[best].theta.array().exp().matrix();
    out.score = results[best].score;
    out.converged = results[best].converged;
    out.iterations = results[best].iterations;
    out.best_start = best;
    return out;
}

// ---------------------------------------------------------------------------------------------
// Full fit

double FittedGamm::edf_of(std::string_view label) const {
    for (const auto& t : edf_per_term) {
        if (t.label == label) return t.edf;
    }
    throw DataError(fmt::format("no smooth term labelled '{}'", label));
}

FittedGamm fit(const formula::BoundSpec& bound, const data::Dataset& data, const FitOptions& options) {
    FittedGamm out;
    out.bound = bound;
    out.rho = bound.spec.rho;
    out.design = basis::assemble_design(bound, data, options.design);
    const auto& ycol = data.columns().at(bound.response);
    out.y = Eigen::Map<const VectorXd>(ycol.numeric.data(), static_cast<Eigen::Index>(ycol.numeric.size()));
    out.series = bound.ar_start ? data::build_series_index(data, data.columns()[*bound.ar_start].name)
                                : data::single_series(data.n_rows());

    const WhitenedSystem system = whiten(out.design.X, out.y, out.series, out.rho);
    const PenalizedProblem problem(system, penalty_set(out.design));
    out.null_dim = problem.penalties().null_dim;
    out.log_jacobian = system.log_jacobian;

    if (options.fixed_lambdas) {
        out.lambdas = *options.fixed_lambdas;
    } else {
        OptimizerOptions opt = options.optimizer;
        const OptimizerResult r = optimize_lambdas(problem, opt);
        out.lambdas = r.lambdas;
        out.converged = r.converged;
    }
    const PlsSolution sol = problem.fit_pls(out.lambdas);
    out.beta = sol.beta;
    out.deviance = sol.deviance;
    out.rss_whitened = sol.rss;
    const double dof = static_cast<double>(problem.n()) - static_cast<double>(out.null_dim);
    out.sigma2 = sol.deviance / dof;
    if (!(out.sigma2 > 0.0)) throw FitError("degenerate fit: residual variance is zero");
    out.reml_score = problem.reml_score(out.lambdas);
    out.Vb = out.sigma2 * problem.inverse(out.lambdas);

    const EdfResult e = edf(problem, out.lambdas);
    for (std::size_t i = 0; i < out.design.blocks.size(); ++i) {
        out.edf_per_term.push_back({out.design.blocks[i].label, e.per_block[i], out.design.blocks[i].n_cols});
    }
    out.edf_parametric = e.parametric;
    out.edf_total = e.total;

    out.fitted = out.design.X * out.beta;
    out.residuals_raw = out.y - out.fitted;
    out.residuals_whitened = system.y - system.X * out.beta;
    out.rss_raw = out.residuals_raw.squaredNorm();

    for (const auto& s : bound.smooths) {
        for (std::size_t c : s.columns) {
            const auto& col = data.columns()[c];
            if (col.kind != data::ColumnKind::numeric) continue;
            const auto [lo, hi] = std::minmax_element(col.numeric.begin(), col.numeric.end());
            out.covariate_ranges[col.name] = {*lo, *hi};
        }
    }
    return out;
}

FittedGamm fit(const formula::ModelSpec& spec, const data::Dataset& data, const FitOptions& options) {
    return fit(formula::validate_against(spec, data), data, options);
}

}  // namespace gammkit::engine
