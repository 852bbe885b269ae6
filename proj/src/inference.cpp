#include "gammkit/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "gammkit/error.hpp"

namespace gammkit::inference {

namespace {

using engine::FittedGamm;

double residual_df(const FittedGamm& m) {
    return std::max(1.0, static_cast<double>(m.n()) - m.edf_total);
}

double t_two_sided(double t, double df) {
    if (!std::isfinite(t)) return 0.0;
    boost::math::students_t dist(df);
    return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
}

std::string fmt_num(double v) {
    if (std::isnan(v)) return "NA";
    return fmt::format("{:.4f}", v);
}

std::string fmt_p(double p) {
    if (p < 1e-4) return "< 0.0001";
    return fmt::format("{:.4f}", p);
}

void check_range(const FittedGamm& model, const std::string& covariate, const std::vector<double>& grid,
                 bool allow) {
    if (allow) return;
    const auto it = model.covariate_ranges.find(covariate);
    if (it == model.covariate_ranges.end()) return;
    const auto [lo, hi] = it->second;
    const double tol = 1e-9 * std::max(1.0, hi - lo);
    for (double g : grid) {
        if (!std::isfinite(g) || g < lo - tol || g > hi + tol) {
            throw DataError(fmt::format("grid value {} of '{}' lies outside the observed range [{}, {}]", g, covariate,
                                        lo, hi));
        }
    }
}

// fit = L beta[idx], se = sqrt(diag(L V[idx, idx] L')).
void project(const FittedGamm& model, const MatrixXd& L, const std::vector<Eigen::Index>& idx, std::vector<double>& fit,
             std::vector<double>& se) {
    const auto k = static_cast<Eigen::Index>(idx.size());
    VectorXd b(k);
    MatrixXd V(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        b(i) = model.beta(idx[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < k; ++j) V(i, j) = model.Vb(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    const VectorXd f = L * b;
    const VectorXd v = (L * V).cwiseProduct(L).rowwise().sum();
    fit.assign(f.data(), f.data() + f.size());
    se.resize(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) se[static_cast<std::size_t>(i)] = std::sqrt(std::max(0.0, v(i)));
}

std::vector<Eigen::Index> block_indices(const basis::TermBlock& b) {
    std::vector<Eigen::Index> idx(b.n_cols);
    for (std::size_t j = 0; j < b.n_cols; ++j) idx[j] = static_cast<Eigen::Index>(b.first_col + j);
    return idx;
}

int level_code(const basis::TermBlock& b, const std::string& level) {
    const auto it = std::find(b.levels.begin(), b.levels.end(), level);
    if (it == b.levels.end()) throw DataError(fmt::format("term '{}' has no level '{}'", b.label, level));
    return static_cast<int>(it - b.levels.begin());
}

std::string csv_number(double v) { return fmt::format("{}", v); }

}  // namespace

double adjusted_r2(const FittedGamm& model) {
    const double n = static_cast<double>(model.n());
    const double mean = model.y.mean();
    const double var_y = (model.y.array() - mean).square().sum() / (n - 1.0);
    if (!(var_y > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return 1.0 - (model.rss_raw / residual_df(model)) / var_y;
}

double aic(const FittedGamm& model) {
    const double n = static_cast<double>(model.n());
    const double s2 = model.sigma2;
    return n * std::log(2.0 * M_PI * s2) + model.rss_whitened / s2 - 2.0 * model.log_jacobian + 2.0 * model.edf_total;
}

WaldTest smooth_test(const FittedGamm& model, std::size_t block_index) {
    const auto& b = model.design.blocks.at(block_index);
    const auto first = static_cast<Eigen::Index>(b.first_col);
    const auto w = static_cast<Eigen::Index>(b.n_cols);
    const MatrixXd xj = model.design.X.middleCols(first, w);
    Eigen::HouseholderQR<MatrixXd> qr(xj);
    const MatrixXd r = qr.matrixQR().topRows(std::min(w, xj.rows())).triangularView<Eigen::Upper>();
    const VectorXd f = r * model.beta.segment(first, w);
    const MatrixXd vf = r * model.Vb.block(first, first, w, w) * r.transpose();

    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (vf + vf.transpose()));
    const VectorXd& val = eig.eigenvalues();  // ascending
    const MatrixXd& vec = eig.eigenvectors();
    const double top = val.size() > 0 ? val.maxCoeff() : 0.0;
    int positive = 0;
    for (Eigen::Index i = 0; i < val.size(); ++i) positive += val(i) > 1e-12 * top ? 1 : 0;

    const double edf = model.edf_per_term.at(block_index).edf;
    int rank = static_cast<int>(std::ceil(edf - 1e-6));
    rank = std::clamp(rank, 1, static_cast<int>(w));
    rank = std::min(rank, positive);
    WaldTest out;
    out.rank = rank;
    if (rank == 0) return out;
    double stat = 0.0;
    for (int i = 0; i < rank; ++i) {
        const Eigen::Index c = val.size() - 1 - i;
        const double proj = vec.col(c).dot(f);
        stat += proj * proj / val(c);
    }
    out.statistic = stat / rank;
    boost::math::fisher_f dist(rank, residual_df(model));
    out.p_value = std::clamp(boost::math::cdf(boost::math::complement(dist, out.statistic)), 0.0, 1.0);
    return out;
}

SummaryTable summarize(const FittedGamm& model) {
    SummaryTable t;
    t.formula = formula::pretty_print(model.bound.spec);
    t.n = model.n();
    t.rho = model.rho;
    t.edf_total = model.edf_total;
    t.sigma2 = model.sigma2;
    t.reml_score = model.reml_score;
    t.converged = model.converged;
    const double df = residual_df(model);
    for (std::size_t j = 0; j < model.design.n_parametric; ++j) {
        const auto i = static_cast<Eigen::Index>(j);
        ParametricRow row;
        row.name = model.design.parametric.names[j];
        row.estimate = model.beta(i);
        row.std_error = std::sqrt(std::max(0.0, model.Vb(i, i)));
        row.t_value = row.estimate / row.std_error;
        row.p_value = t_two_sided(row.t_value, df);
        t.parametric.push_back(std::move(row));
    }
    for (std::size_t k = 0; k < model.design.blocks.size(); ++k) {
        const auto& b = model.design.blocks[k];
        if (b.penalties.empty()) continue;
        const WaldTest w = smooth_test(model, k);
        t.smooths.push_back({b.label, model.edf_per_term[k].edf, static_cast<double>(b.n_cols), w.statistic,
                             w.p_value, w.rank});
    }
    t.adjusted_r2 = adjusted_r2(model);
    t.aic = aic(model);
    return t;
}

std::string SummaryTable::to_text() const {
    std::size_t width = 28;
    for (const auto& r : parametric) width = std::max(width, r.name.size() + 2);
    for (const auto& r : smooths) width = std::max(width, r.label.size() + 2);
    std::string out;
    out += "Family: gaussian\nLink function: identity\n\nFormula:\n" + formula + "\n";
    out += fmt::format("AR(1) rho: {}\n\n", rho);
    out += fmt::format("{:<{}}{:>12}{:>12}{:>12}{:>12}\n", "A. parametric coefficients", width, "Estimate",
                       "Std. Error", "t-value", "p-value");
    for (const auto& r : parametric) {
        out += fmt::format("{:<{}}{:>12}{:>12}{:>12}{:>12}\n", r.name, width, fmt_num(r.estimate), fmt_num(r.std_error),
                           fmt_num(r.t_value), fmt_p(r.p_value));
    }
    out += fmt::format("{:<{}}{:>12}{:>12}{:>12}{:>12}\n", "B. smooth terms", width, "edf", "Ref.df", "F-value",
                       "p-value");
    for (const auto& r : smooths) {
        out += fmt::format("{:<{}}{:>12}{:>12}{:>12}{:>12}\n", r.label, width, fmt_num(r.edf), fmt_num(r.ref_df),
                           fmt_num(r.f_value), fmt_p(r.p_value));
    }
    out += fmt::format("\nR-sq.(adj) = {:.4f}   REML = {:.3f}   AIC = {:.3f}   Scale est. = {:.6g}   n = {}\n",
                       adjusted_r2, reml_score, aic, sigma2, n);
    if (!converged) out += "Warning: smoothing parameter selection did not converge\n";
    return out;
}

nlohmann::json SummaryTable::to_json() const {
    nlohmann::json j;
    j["formula"] = formula;
    j["rho"] = rho;
    j["n"] = n;
    j["parametric"] = nlohmann::json::array();
    for (const auto& r : parametric)
        j["parametric"].push_back({{"name", r.name},
                                   {"estimate", r.estimate},
                                   {"std_error", r.std_error},
                                   {"t_value", r.t_value},
                                   {"p_value", r.p_value}});
    j["smooth"] = nlohmann::json::array();
    for (const auto& r : smooths)
        j["smooth"].push_back({{"label", r.label},
                               {"edf", r.edf},
                               {"ref_df", r.ref_df},
                               {"f_value", r.f_value},
                               {"p_value", r.p_value},
                               {"test_rank", r.test_rank}});
    j["adjusted_r2"] = adjusted_r2;
    j["reml"] = reml_score;
    j["aic"] = aic;
    j["edf_total"] = edf_total;
    j["scale"] = sigma2;
    j["converged"] = converged;
    return j;
}

double zero_containment(const std::vector<double>& fit, const std::vector<double>& se, double z) {
    if (fit.empty()) return 1.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < fit.size(); ++i) hits += std::abs(fit[i]) <= z * se[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(fit.size());
}

std::vector<double> CurveEstimate::lower(double z) const {
    std::vector<double> out(fit.size());
    for (std::size_t i = 0; i < fit.size(); ++i) out[i] = fit[i] - z * se[i];
    return out;
}

std::vector<double> CurveEstimate::upper(double z) const {
    std::vector<double> out(fit.size());
    for (std::size_t i = 0; i < fit.size(); ++i) out[i] = fit[i] + z * se[i];
    return out;
}

std::string CurveEstimate::to_csv() const {
    std::string out = "grid,fit,se,lower95,upper95\n";
    const auto lo = lower(), hi = upper();
    for (std::size_t i = 0; i < grid.size(); ++i)
        out += fmt::format("{},{},{},{},{}\n", csv_number(grid[i]), csv_number(fit[i]), csv_number(se[i]),
                           csv_number(lo[i]), csv_number(hi[i]));
    return out;
}

nlohmann::json CurveEstimate::to_json() const {
    nlohmann::json j = {{"label", label}, {"covariate", covariate}, {"grid", grid},
                        {"fit", fit},     {"se", se},               {"reference", reference}};
    j["level"] = level ? nlohmann::json(*level) : nlohmann::json(nullptr);
    j["zero_containment"] = zero_containment ? nlohmann::json(*zero_containment) : nlohmann::json(nullptr);
    return j;
}

CurveEstimate evaluate_smooth(const FittedGamm& model, const std::string& label, const std::vector<double>& grid,
                              const EvalOptions& options) {
    const auto& b = model.design.block(label);
    if (b.kind == basis::BlockKind::random_effect)
        throw DataError(fmt::format("'{}' is a random effect; use its coefficient table", label));
    if (b.kind == basis::BlockKind::tensor) throw DataError(fmt::format("'{}' has two covariates; evaluate it as a surface", label));
    CurveEstimate c;
    c.label = b.label;
    c.covariate = b.covariates.at(0);
    c.grid = grid;
    check_range(model, c.covariate, grid, options.allow_extrapolation);
    std::optional<int> code;
    if (b.kind == basis::BlockKind::factor_smooth) {
        if (!options.level) throw DataError(fmt::format("factor smooth '{}' needs a level", label));
        code = level_code(b, *options.level);
        c.level = options.level;
    } else if (b.by_level) {
        c.level = b.by_level;
    }
    const MatrixXd L = b.predict_matrix({grid}, code);
    project(model, L, block_indices(b), c.fit, c.se);
    return c;
}

CurveEstimate evaluate_difference(const FittedGamm& model, const std::string& by_term_label, const std::string& level,
                                  const std::vector<double>& grid, const DifferenceOptions& options) {
    const formula::BoundSmooth* term = nullptr;
    for (const auto& s : model.bound.smooths)
        if (s.term.label == by_term_label) term = &s;
    if (!term) {
        // Block labels such as "s(Time):Group=B" resolve to their term.
        if (const auto idx = model.design.block_index(by_term_label)) {
            for (const auto& s : model.bound.smooths)
                if (s.term.label == model.design.blocks[*idx].term_label) term = &s;
        }
    }
    if (!term) throw DataError(fmt::format("no smooth term labelled '{}'", by_term_label));
    if (!term->term.by_var) throw DataError(fmt::format("'{}' has no by factor", by_term_label));
    if (!term->by_difference)
        throw DataError(fmt::format("'{}' uses an unordered factor; its curves are not difference smooths", by_term_label));
    const auto& levels = term->by_levels;
    if (std::find(levels.begin(), levels.end(), level) == levels.end())
        throw DataError(fmt::format("factor '{}' has no level '{}'", *term->term.by_var, level));

    CurveEstimate c;
    c.label = term->term.label;
    c.covariate = term->term.covariates.at(0);
    c.level = level;
    c.grid = grid;
    check_range(model, c.covariate, grid, options.allow_extrapolation);
    if (level == levels.front()) {
        c.reference = true;
        c.fit.assign(grid.size(), 0.0);
        c.se.assign(grid.size(), 0.0);
        c.zero_containment = 1.0;
        return c;
    }
    const basis::TermBlock* block = nullptr;
    for (const auto& b : model.design.blocks)
        if (b.term_label == term->term.label && b.by_level && *b.by_level == level) block = &b;
    if (!block) throw DataError(fmt::format("no difference block for level '{}' of '{}'", level, by_term_label));
    if (block->kind == basis::BlockKind::tensor)
        throw DataError(fmt::format("'{}' has two covariates; evaluate it as a surface", by_term_label));
    c.label = block->label;

    MatrixXd L = block->predict_matrix({grid});
    auto idx = block_indices(*block);
    if (options.include_parametric_contrast) {
        const std::string name = *term->term.by_var + "=" + level;
        const auto& names = model.design.parametric.names;
        const auto it = std::find(names.begin(), names.end(), name);
        if (it != names.end()) {
            L.conservativeResize(Eigen::NoChange, L.cols() + 1);
            L.col(L.cols() - 1).setOnes();
            idx.push_back(static_cast<Eigen::Index>(it - names.begin()));
        }
    }
    project(model, L, idx, c.fit, c.se);
    c.zero_containment = zero_containment(c.fit, c.se);
    return c;
}

std::string Surface::to_csv() const {
    std::string out = fmt::format("{},{},fit,se,lower95,upper95\n", covariates.at(0), covariates.at(1));
    for (std::size_t i = 0; i < x.size(); ++i)
        out += fmt::format("{},{},{},{},{},{}\n", csv_number(x[i]), csv_number(z[i]), csv_number(fit[i]),
                           csv_number(se[i]), csv_number(fit[i] - 1.96 * se[i]), csv_number(fit[i] + 1.96 * se[i]));
    return out;
}

Surface evaluate_surface(const FittedGamm& model, const std::string& label, const std::vector<double>& grid_x,
                         const std::vector<double>& grid_z, bool allow_extrapolation) {
    const auto& b = model.design.block(label);
    if (b.kind != basis::BlockKind::tensor || b.covariates.size() != 2)
        throw DataError(fmt::format("'{}' is not a two-covariate tensor smooth", label));
    check_range(model, b.covariates[0], grid_x, allow_extrapolation);
    check_range(model, b.covariates[1], grid_z, allow_extrapolation);
    Surface s;
    s.label = b.label;
    s.covariates = b.covariates;
    for (double x : grid_x)
        for (double z : grid_z) {
            s.x.push_back(x);
            s.z.push_back(z);
        }
    const MatrixXd L = b.predict_matrix({s.x, s.z});
    project(model, L, block_indices(b), s.fit, s.se);
    return s;
}

std::string RandomEffectTable::to_csv() const {
    std::string out;
    for (const auto& f : factors) out += f + ",";
    out += "coefficient,sd\n";
    for (const auto& r : rows) {
        for (const auto& k : r.keys) out += k + ",";
        out += fmt::format("{},{}\n", csv_number(r.coefficient), csv_number(r.sd));
    }
    return out;
}

RandomEffectTable random_effect_coefs(const FittedGamm& model, const std::string& label) {
    const auto& b = model.design.block(label);
    if (b.kind != basis::BlockKind::random_effect) throw DataError(fmt::format("'{}' is not a random effect", label));
    RandomEffectTable t;
    t.label = b.label;
    t.slope = b.slope;
    t.factors.assign(b.covariates.begin(), b.covariates.begin() + static_cast<std::ptrdiff_t>(b.factor_levels.size()));
    const std::size_t n2 = b.factor_levels.size() == 2 ? b.factor_levels[1].size() : 1;
    for (std::size_t j = 0; j < b.n_cols; ++j) {
        RandomEffectRow row;
        if (b.factor_levels.size() == 2) {
            row.keys = {b.factor_levels[0][j / n2], b.factor_levels[1][j % n2]};
        } else {
            row.keys = {b.factor_levels[0][j]};
        }
        const auto i = static_cast<Eigen::Index>(b.first_col + j);
        row.coefficient = model.beta(i);
        row.sd = std::sqrt(std::max(0.0, model.Vb(i, i)));
        t.rows.push_back(std::move(row));
    }
    return t;
}

Correlation pearson(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw DataError("correlation needs vectors of equal length");
    if (a.size() < 3) throw DataError(fmt::format("correlation needs at least 3 pairs, got {}", a.size()));
    const auto n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (!(saa > 0.0) || !(sbb > 0.0)) throw DataError("correlation undefined for a constant vector");
    Correlation c;
    c.r = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
    c.df = static_cast<int>(a.size()) - 2;
    const double denom = std::sqrt(std::max(0.0, 1.0 - c.r * c.r));
    c.t_stat = denom > 0.0 ? c.r * std::sqrt(static_cast<double>(c.df)) / denom
                           : std::copysign(std::numeric_limits<double>::infinity(), c.r);
    c.p_value = t_two_sided(c.t_stat, c.df);
    return c;
}

Correlation coef_correlation(const RandomEffectTable& table, const std::string& split_factor) {
    if (table.factors.size() != 2)
        throw DataError(fmt::format("'{}' needs two grouping factors to split by '{}'", table.label, split_factor));
    const auto pos = std::find(table.factors.begin(), table.factors.end(), split_factor);
    if (pos == table.factors.end()) throw DataError(fmt::format("'{}' has no factor '{}'", table.label, split_factor));
    const std::size_t s = static_cast<std::size_t>(pos - table.factors.begin());
    const std::size_t o = 1 - s;
    std::vector<std::string> split_levels;
    for (const auto& r : table.rows)
        if (std::find(split_levels.begin(), split_levels.end(), r.keys[s]) == split_levels.end())
            split_levels.push_back(r.keys[s]);
    if (split_levels.size() != 2)
        throw DataError(fmt::format("'{}' has {} levels; exactly 2 are needed", split_factor, split_levels.size()));
    std::vector<std::string> order;
    std::map<std::string, std::pair<std::optional<double>, std::optional<double>>> pairs;
    for (const auto& r : table.rows) {
        auto [it, fresh] = pairs.try_emplace(r.keys[o]);
        if (fresh) order.push_back(r.keys[o]);
        (r.keys[s] == split_levels[0] ? it->second.first : it->second.second) = r.coefficient;
    }
    std::vector<double> a, b;
    for (const auto& k : order) {
        const auto& p = pairs[k];
        if (p.first && p.second) {
            a.push_back(*p.first);
            b.push_back(*p.second);
        }
    }
    return pearson(a, b);
}

std::string Comparison::to_text() const {
    std::size_t width = 8;
    for (const auto& r : rows) width = std::max(width, r.id.size() + 2);
    std::string out = fmt::format("{:<{}}{:>14}{:>14}{:>12}{:>10}{:>8}{:>14}{:>14}{:>12}\n", "model", width, "REML", "AIC",
                                  "adj.R2", "edf", "rho", "dREML", "dAIC", "dR2");
    for (const auto& r : rows)
        out += fmt::format("{:<{}}{:>14.3f}{:>14.3f}{:>12.4f}{:>10.2f}{:>8.3g}{:>14.3f}{:>14.3f}{:>12.4f}\n", r.id, width,
                           r.reml, r.aic, r.adjusted_r2, r.tau, r.rho, r.delta_reml, r.delta_aic, r.delta_adjusted_r2);
    for (const auto& n : notes) out += "note: " + n + "\n";
    return out;
}

Comparison compare(const std::vector<const FittedGamm*>& models, const std::vector<std::string>& ids) {
    if (models.empty()) throw DataError("compare needs at least one model");
    if (!ids.empty() && ids.size() != models.size()) throw DataError("compare: one id per model");
    Comparison c;
    const FittedGamm& base = *models.front();
    for (std::size_t i = 0; i < models.size(); ++i) {
        const FittedGamm& m = *models[i];
        if (m.n() != base.n())
            throw DataError(fmt::format("model {} has {} rows, model 1 has {}; scores are not comparable", i + 1, m.n(),
                                        base.n()));
        if (i > 0 && m.y != base.y) c.notes.push_back(fmt::format("model {} was fitted to a different response", i + 1));
        if (i > 0 && m.rho != base.rho)
            c.notes.push_back(fmt::format("model {} uses rho = {} (model 1: {}); scores include the whitening Jacobian",
                                          i + 1, m.rho, base.rho));
        ComparisonRow r;
        r.id = ids.empty() ? fmt::format("model{}", i + 1) : ids[i];
        r.reml = m.reml_score;
        r.aic = aic(m);
        r.adjusted_r2 = adjusted_r2(m);
        r.tau = m.edf_total;
        r.rho = m.rho;
        c.rows.push_back(std::move(r));
    }
    for (auto& r : c.rows) {
        r.delta_reml = r.reml - c.rows.front().reml;
        r.delta_aic = r.aic - c.rows.front().aic;
        r.delta_adjusted_r2 = r.adjusted_r2 - c.rows.front().adjusted_r2;
    }
    return c;
}

}  // namespace gammkit::inference
