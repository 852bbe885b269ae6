// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "gammkit/cli.hpp"
#include "gammkit/dataset.hpp"
#include "gammkit/diagnostics.hpp"
#include "gammkit/engine.hpp"
#include "gammkit/formula.hpp"
#include "gammkit/inference.hpp"
#include "gammkit/simlab.hpp"

using namespace gammkit;
using engine::MatrixXd;
using engine::VectorXd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

engine::FittedGamm fit_formula(const std::string& f, const data::Dataset& d, double rho = 0.0,
                               std::optional<std::string> start = std::nullopt, engine::FitOptions opts = {}) {
    auto spec = formula::parse_formula(f);
    formula::set_ar_options(spec, rho, std::move(start));
    return engine::fit(spec, d, opts);
}

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
    return g;
}

double sin2pi(double x) { return std::sin(2.0 * std::numbers::pi * x); }

// y = sin(2 pi x) + AR(1) noise in row order, x drawn independently of the row order; one series.
data::Dataset sine_ar_data(std::size_t n, double rho, double sd, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto noise = simlab::simulate_ar1(n, rho, sd, seed + 7919);
    std::vector<double> x(n), y(n);
    std::vector<bool> start(n, false);
    start[0] = true;
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = u(gen);
        y[i] = sin2pi(x[i]) + noise[i];
    }
    return data::Dataset({data::Column::make_numeric("y", y), data::Column::make_numeric("x", x),
                          data::Column::make_boolean("start", start)});
}

std::span<const double> span_of(const VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

// 1. Penalized solve against the dense normal equations.
Outcome penalized_solve() {
    const auto t0 = Clock::now();
    std::mt19937_64 gen(20240601);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int inst = 0; inst < 50; ++inst) {
        const int slots = 1 + inst % 3;
        const Eigen::Index p = 3 + static_cast<Eigen::Index>(u(gen) * 28.0);  // 3..30
        const Eigen::Index n = std::min<Eigen::Index>(200, p + 5 + static_cast<Eigen::Index>(u(gen) * 170.0));
        MatrixXd X(n, p);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < p; ++j) X(i, j) = z(gen);
        X.col(0).setOnes();
        VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i) y(i) = X(i, 1) + z(gen);

        // Split columns 1..p-1 into `slots` penalized blocks; second-difference penalties when
        // wide enough (rank deficient), otherwise random positive definite ones.
        engine::PenaltySet set;
        set.p = static_cast<std::size_t>(p);
        MatrixXd S_total = MatrixXd::Zero(p, p);
        VectorXd lambdas(slots);
        const Eigen::Index free_cols = p - 1;
        Eigen::Index first = 1;
        int used = 0;
        for (int b = 0; b < slots && first < p; ++b) {
            const Eigen::Index left = p - first;
            const Eigen::Index w = b == slots - 1 ? left : std::max<Eigen::Index>(1, free_cols / slots);
            MatrixXd s;
            if (w >= 4) {
                MatrixXd d = MatrixXd::Zero(w - 2, w);
                for (Eigen::Index i = 0; i < w - 2; ++i) d.row(i).segment(i, 3) << 1.0, -2.0, 1.0;
                s = d.transpose() * d;
            } else {
                MatrixXd a(w, w);
                for (Eigen::Index i = 0; i < w; ++i)
                    for (Eigen::Index j = 0; j < w; ++j) a(i, j) = z(gen);
                s = a.transpose() * a + 0.1 * MatrixXd::Identity(w, w);
            }
            lambdas(b) = std::pow(10.0, -2.0 + 4.0 * u(gen));
            set.blocks.push_back({fmt::format("b{}", b), static_cast<std::size_t>(first), static_cast<std::size_t>(w), {s}, {b}});
            S_total.block(first, first, w, w) += lambdas(b) * s;
            first += w;
            ++used;
        }
        lambdas.conservativeResize(used);
        engine::finalize_penalty_set(set, 1);

        using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
        using VecL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
        const MatL XL = X.cast<long double>();
        const MatL A = XL.transpose() * XL + S_total.cast<long double>();
        const VecL oracle = A.ldlt().solve(XL.transpose() * y.cast<long double>());
        const auto sol = engine::fit_pls(engine::whiten(X, y, data::single_series(static_cast<std::size_t>(n)), 0.0), set,
                                         lambdas);
        const double err = static_cast<double>((sol.beta.cast<long double>() - oracle).norm() / oracle.norm());
        worst = std::max(worst, err);
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-8 && secs < 10.0, fmt::format("max relative error {:.2e} over 50 instances, {:.2f} s", worst, secs)};
}

// 2. REML optimum against a brute-force grid, and curve recovery.
Outcome reml_vs_grid() {
    const auto t0 = Clock::now();
    const auto d = sine_ar_data(500, 0.0, 0.2, 31);
    const auto m = fit_formula("y ~ s(x)", d);
    const engine::PenalizedProblem prob(engine::whiten(m.design.X, m.y, m.series, 0.0), engine::penalty_set(m.design));
    double best = std::numeric_limits<double>::infinity(), best_e = 0.0;
    for (int i = 0; i <= 100; ++i) {
        const double e = -4.0 + 0.1 * i;
        const double s = prob.reml_score(VectorXd::Constant(1, std::pow(10.0, e)));
        if (s < best) {
            best = s;
            best_e = e;
        }
    }
    const double chosen = std::log10(m.lambdas(0));
    const auto& x = d.column("x").numeric;
    double sse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) sse += std::pow(m.fitted(static_cast<Eigen::Index>(i)) - sin2pi(x[i]), 2);
    const double rmse = std::sqrt(sse / static_cast<double>(x.size()));
    const double secs = seconds_since(t0);
    const bool ok = std::abs(chosen - best_e) <= 1.0 && rmse < 0.1 && secs < 30.0;
    return {ok, fmt::format("log10 lambda {:.2f} vs grid {:.1f}, RMSE {:.4f}, {:.2f} s", chosen, best_e, rmse, secs)};
}

// 3. edf at the extremes of lambda.
Outcome edf_limits() {
    const auto d = sine_ar_data(300, 0.0, 0.3, 5);
    engine::FitOptions zero;
    zero.fixed_lambdas = VectorXd::Zero(1);
    const auto m0 = fit_formula("y ~ s(x)", d, 0.0, std::nullopt, zero);
    const double p = static_cast<double>(m0.design.X.cols());
    engine::FitOptions heavy;
    heavy.fixed_lambdas = VectorXd::Constant(1, 1e9);
    const auto m9 = fit_formula("y ~ s(x)", d, 0.0, std::nullopt, heavy);
    // Null space of a second-order penalty is {1, x}; the constant is taken by the intercept.
    const double null_dim = 1.0;
    const double e9 = m9.edf_of("s(x)");
    const bool ok = std::abs(m0.edf_total - p) < 1e-9 && std::abs(e9 - null_dim) <= 0.05;
    return {ok, fmt::format("lambda=0: tau {:.12g} (p = {}); lambda=1e9: term edf {:.4f}", m0.edf_total, p, e9)};
}

// 4. Whitening at the generating rho removes lag-1 correlation.
Outcome whitening() {
    const std::size_t n = 5000;
    const auto d = sine_ar_data(n, 0.6, 0.5, 17);
    const auto at_rho = fit_formula("y ~ s(x)", d, 0.6, "start");
    const auto at_zero = fit_formula("y ~ s(x)", d, 0.0);
    const double white = diagnostics::acf(span_of(at_rho.residuals_whitened), 1).acf[1];
    const double raw = diagnostics::acf(span_of(at_zero.residuals_raw), 1).acf[1];
    const double bound = 3.0 / std::sqrt(static_cast<double>(n));
    const bool ok = std::abs(white) < bound && raw >= 0.55 && raw <= 0.65;
    return {ok, fmt::format("whitened lag 1 {:+.4f} (bound {:.4f}); raw lag 1 at rho=0 {:.4f}", white, bound, raw)};
}

// 5. Over-whitening white noise.
Outcome over_whitening() {
    std::mt19937_64 gen(55);
    std::normal_distribution<double> z;
    std::vector<double> y, t;
    std::vector<bool> start;
    for (int s = 0; s < 50; ++s)
        for (int i = 0; i < 200; ++i) {
            t.push_back(i / 199.0);
            start.push_back(i == 0);
            y.push_back(z(gen));
        }
    const data::Dataset d({data::Column::make_numeric("y", y), data::Column::make_numeric("t", t),
                           data::Column::make_boolean("start", start)});
    const auto m = fit_formula("y ~ s(t)", d, 0.8, "start");
    const auto a = diagnostics::acf_by_series(span_of(m.residuals_whitened), m.series, 1);
    const double expected = -0.8 / (1.0 + 0.64);
    const double got = a.pooled.acf[1];
    return {std::abs(got - expected) <= 0.03, fmt::format("pooled whitened lag 1 {:+.4f} (analytic {:+.4f})", got, expected)};
}

// 6. Factor-smooth model with the right rho beats random intercepts with an inflated rho.
Outcome model_comparison() {
    const auto t0 = Clock::now();
    int reml = 0, aic = 0, r2 = 0, all = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto sim = simlab::generate(simlab::naming_scenario(seed));
        const auto fsm = fit_formula("RT ~ s(Frequency) + s(Trial, Subject, bs=\"fs\", m=1) + s(Word, bs=\"re\")", sim.data,
                                     0.3, "NewTimeSeries");
        const auto rem = fit_formula("RT ~ s(Frequency) + s(Subject, bs=\"re\") + s(Word, bs=\"re\")", sim.data, 0.9,
                                     "NewTimeSeries");
        const bool a = fsm.reml_score < rem.reml_score;
        const bool b = inference::aic(fsm) < inference::aic(rem);
        const bool c = inference::adjusted_r2(fsm) > inference::adjusted_r2(rem);
        reml += a;
        aic += b;
        r2 += c;
        all += a && b && c;
    }
    const double secs = seconds_since(t0);
    return {all >= 19 && secs < 300.0,
            fmt::format("fs wins on all three in {}/20 (REML {}, AIC {}, adj R2 {}), {:.1f} s", all, reml, aic, r2, secs)};
}

// Two-level ordered group; `offset` added to level B.
data::Dataset two_group_data(std::size_t per_group, double offset, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> z;
    std::vector<double> x, y;
    std::vector<int> g;
    for (int level = 0; level < 2; ++level)
        for (std::size_t i = 0; i < per_group; ++i) {
            const double xv = u(gen);
            x.push_back(xv);
            g.push_back(level);
            y.push_back(sin2pi(xv) + (level == 1 ? offset : 0.0) + 0.3 * z(gen));
        }
    return data::Dataset({data::Column::make_numeric("y", y), data::Column::make_numeric("x", x),
                          data::Column::make_factor("G", g, {"A", "B"}, true)});
}

// 7. Difference-curve zero containment.
Outcome difference_containment() {
    const auto grid = linspace(0.02, 0.98, 50);
    double same = 0.0, shifted = 0.0;
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
        const auto m0 = fit_formula("y ~ G + s(x) + s(x, by=G)", two_group_data(250, 0.0, 700 + rep));
        same += *inference::evaluate_difference(m0, "s(x,by=G)", "B", grid).zero_containment;
        const auto m1 = fit_formula("y ~ G + s(x) + s(x, by=G)", two_group_data(250, 1.0, 800 + rep));
        shifted += *inference::evaluate_difference(m1, "s(x,by=G)", "B", grid).zero_containment;
    }
    same /= 20.0;
    shifted /= 20.0;
    return {same >= 0.90 && shifted <= 0.10,
            fmt::format("mean containment {:.3f} (identical groups), {:.3f} (+1 offset)", same, shifted)};
}

// 8. Item random intercepts + slopes vs item factor smooths, with per-item curves and no group effect.
Outcome slope_vs_factor_smooth() {
    const auto t0 = Clock::now();
    int slope_hits = 0, fs_hits = 0;
    auto group_p = [](const engine::FittedGamm& m) {
        for (const auto& r : inference::summarize(m).smooths)
            if (r.label == "s(Time):Group=B") return r.p_value;
        return 1.0;
    };
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
        simlab::Scenario s;
        s.name = "item-curves";
        s.seed = 100 + rep;
        s.layout = simlab::Layout::event_series;
        s.n_subjects = 20;
        s.n_items = 20;
        s.series_length = 20;
        s.normalized_time = true;
        s.fixed_smooths = {{"Time", "sin2pi", 1.0}};
        s.item_group = simlab::GroupSpec{"Group", 2, "item", true, "zero", 0.0};
        s.item_curve_scale = 0.5;
        s.subject_intercept_sd = 0.2;
        s.item_intercept_sd = 0.2;
        s.noise_sd = 0.5;
        const auto sim = simlab::generate(s);
        const auto slopes = fit_formula(
            "y ~ Group + s(Time) + s(Time, by=Group) + s(Item, bs=\"re\") + s(Item, Time, bs=\"re\")", sim.data);
        const auto curves = fit_formula("y ~ Group + s(Time) + s(Time, by=Group) + s(Time, Item, bs=\"fs\", m=1)", sim.data);
        slope_hits += group_p(slopes) < 0.05;
        fs_hits += group_p(curves) < 0.05;
    }
    return {slope_hits >= 10 && fs_hits <= 2,
            fmt::format("group difference significant in {}/20 with random slopes, {}/20 with factor smooths, {:.1f} s",
                        slope_hits, fs_hits, seconds_since(t0))};
}

// 9. Lag-1 ACF of raw residuals as the rho guess.
Outcome rho_guess() {
    std::string detail;
    bool ok = true;
    for (double rho : {0.3, 0.6, 0.9}) {
        const auto d = sine_ar_data(5000, rho, 0.5, static_cast<std::uint64_t>(rho * 1000));
        const auto s = diagnostics::suggest_rho(fit_formula("y ~ s(x)", d));
        ok = ok && std::abs(s.rho - rho) <= 0.05;
        detail += fmt::format("{}{:.1f} -> {:.3f}", detail.empty() ? "" : ", ", rho, s.rho);
    }
    return {ok, detail};
}

// 10. Correlation of paired random-effect coefficients.
Outcome coefficient_correlation() {
    std::mt19937_64 gen(38);
    std::normal_distribution<double> z;
    std::vector<double> effect(40);
    for (auto& e : effect) e = 0.5 * z(gen);
    std::vector<int> comp, sex;
    std::vector<double> y;
    for (int c = 0; c < 40; ++c)
        for (int s = 0; s < 2; ++s)
            for (int r = 0; r < 50; ++r) {
                comp.push_back(c);
                sex.push_back(s);
                const double e = effect[static_cast<std::size_t>(c)];
                y.push_back(1.0 + (s == 0 ? -e : e) + 0.5 * z(gen));
            }
    std::vector<std::string> names;
    for (int c = 0; c < 40; ++c) names.push_back(fmt::format("C{}", c));
    const data::Dataset d({data::Column::make_numeric("y", y), data::Column::make_factor("Compound", comp, names),
                           data::Column::make_factor("Sex", sex, {"female", "male"})});
    const auto m = fit_formula("y ~ s(Compound, Sex, bs=\"re\")", d);
    const auto r = inference::coef_correlation(inference::random_effect_coefs(m, "re(Compound,Sex)"), "Sex");
    return {r.df == 38 && r.r < -0.9, fmt::format("r = {:.4f}, t({}) = {:.2f}, p = {:.2e}", r.r, r.df, r.t_stat, r.p_value)};
}

// 11. Smooth test size under the null.
Outcome smooth_test_calibration() {
    const auto t0 = Clock::now();
    int rejections = 0;
    for (std::uint64_t rep = 0; rep < 200; ++rep) {
        std::mt19937_64 gen(5000 + rep);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::normal_distribution<double> z;
        std::vector<double> x(200), y(200);
        for (std::size_t i = 0; i < 200; ++i) {
            x[i] = u(gen);
            y[i] = z(gen);
        }
        const auto m = fit_formula("y ~ s(x)", data::Dataset({data::Column::make_numeric("y", y), data::Column::make_numeric("x", x)}));
        rejections += inference::smooth_test(m, 0).p_value < 0.05;
    }
    const double rate = rejections / 200.0;
    const double secs = seconds_since(t0);
    return {rate >= 0.02 && rate <= 0.10 && secs < 600.0,
            fmt::format("rejection rate {:.3f} ({}/200), {:.1f} s", rate, rejections, secs)};
}

// 12. Formula trees, CLI summary layout, reproducible artifacts.
bool same_tree(const formula::ModelSpec& s, const std::string& response, const std::vector<std::string>& parametric,
               const std::vector<std::string>& labels) {
    if (s.response != response || s.parametric_terms != parametric || s.smooth_terms.size() != labels.size()) return false;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (s.smooth_terms[i].label != labels[i]) return false;
    return true;
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        out[fs::relative(e.path(), root).string()] = ss.str();
    }
    return out;
}

Outcome parser_and_cli() {
    using formula::SmoothKind;
    const auto naming = formula::parse_formula(
        "RT ~ Regularity + Number + Voicing + InitialNeighbors + InflectionalEntropy + s(Frequency) + "
        "s(Trial, Subject, bs=\"fs\",m=1) + s(Verb, bs=\"re\")");
    const auto pitch = formula::parse_formula(
        "PitchSemiTone ~ Sex + BranchingOrd + s(NormalizedTime) + s(NormalizedTime, by=BranchingOrd) + "
        "s(NormalizedTime, Speaker, bs=\"fs\", m=1) + s(NormalizedTime, Compound, bs=\"fs\", m=1) + "
        "s(Compound, Sex, bs=\"re\")");
    const auto eeg = formula::parse_formula(
        "Amplitude ~ s(Time, k=10) + s(Time, by=ConstituentOrder, k=10) + te(LogFreqC1, LogFreqC2, k=4) + "
        "te(LogFreqC1, LogFreqC2, by=ConstituentOrder, k=4) + s(LogCompFreq, k=4) + "
        "s(LogCompFreq, by=ConstituentOrder, k=4) + s(Compound, bs=\"re\")+ s(Trial, Subject, bs=\"fs\", m=1)+ "
        "s(Time, Subject, bs=\"fs\", m=1)");
    bool trees = same_tree(naming, "RT", {"Regularity", "Number", "Voicing", "InitialNeighbors", "InflectionalEntropy"},
                           {"s(Frequency)", "fs(Trial,Subject)", "re(Verb)"}) &&
                 same_tree(pitch, "PitchSemiTone", {"Sex", "BranchingOrd"},
                           {"s(NormalizedTime)", "s(NormalizedTime,by=BranchingOrd)", "fs(NormalizedTime,Speaker)",
                            "fs(NormalizedTime,Compound)", "re(Compound,Sex)"}) &&
                 same_tree(eeg, "Amplitude", {},
                           {"s(Time)", "s(Time,by=ConstituentOrder)", "te(LogFreqC1,LogFreqC2)",
                            "te(LogFreqC1,LogFreqC2,by=ConstituentOrder)", "s(LogCompFreq)",
                            "s(LogCompFreq,by=ConstituentOrder)", "re(Compound)", "fs(Trial,Subject)", "fs(Time,Subject)"});
    trees = trees && naming.smooth_terms[1].kind == SmoothKind::factor_smooth && naming.smooth_terms[1].shrinkage_order_m == 1 &&
            eeg.smooth_terms[2].kind == SmoothKind::tensor && eeg.smooth_terms[2].basis_dim_k == std::vector<int>{4, 4} &&
            eeg.smooth_terms[0].basis_dim_k == std::vector<int>{10} && pitch.smooth_terms[4].kind == SmoothKind::random_effect;

    const fs::path root = fs::temp_directory_path() / "gammkit_acceptance_cli";
    fs::remove_all(root);
    std::ostringstream out, err;
    auto run = [&](std::vector<std::string> args) {
        args.insert(args.begin(), "gammkit");
        return cli::run(args, out, err);
    };
    bool cli_ok = run({"simulate", "--scenario", "naming", "--out", (root / "data").string()}) == 0;
    for (const char* dir : {"a", "b"}) {
        cli_ok = cli_ok && run({"fit", "--data", (root / "data" / "data.csv").string(), "--formula",
                                "RT ~ s(Frequency) + s(Trial, Subject, bs=\"fs\", m=1) + s(Word, bs=\"re\")", "--rho",
                                "0.3", "--ar-start", "NewTimeSeries", "--grid", "50", "--out", (root / dir).string()}) == 0;
    }
    bool layout = false, identical = false;
    std::size_t files = 0;
    if (cli_ok) {
        const auto a = read_tree(root / "a");
        const auto b = read_tree(root / "b");
        files = a.size();
        identical = !a.empty() && a == b;
        const auto it = a.find("summary.txt");
        if (it != a.end()) {
            const auto& text = it->second;
            const auto pa = text.find("A. parametric coefficients"), sm = text.find("B. smooth terms");
            layout = pa != std::string::npos && sm != std::string::npos && pa < sm &&
                     text.find("(Intercept)", pa) < sm && text.find("fs(Trial,Subject)", sm) != std::string::npos &&
                     text.find("re(Word)", sm) != std::string::npos && text.find("R-sq.(adj)", sm) != std::string::npos;
        }
    }
    return {trees && cli_ok && layout && identical,
            fmt::format("formula trees {}, cli exit {}, two-panel summary {}, {} artifacts byte-identical {}", trees ? "ok" : "BAD",
                        cli_ok ? "ok" : err.str(), layout ? "ok" : "BAD", files, identical ? "yes" : "no")};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"penalized solve matches normal equations", penalized_solve},
        {"REML optimum agrees with grid search", reml_vs_grid},
        {"edf limits", edf_limits},
        {"AR(1) whitening", whitening},
        {"over-whitening artifact", over_whitening},
        {"factor-smooth model comparison", model_comparison},
        {"difference-curve zero containment", difference_containment},
        {"random slopes vs factor smooths", slope_vs_factor_smooth},
        {"rho guess from lag-1 ACF", rho_guess},
        {"coefficient correlation", coefficient_correlation},
        {"smooth test calibration", smooth_test_calibration},
        {"parser and CLI", parser_and_cli},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, fmt::format("exception: {}", e.what())};
        }
        failures += !o.pass;
        std::cout << fmt::format("{} {:>2} {}: {}\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail) << std::flush;
    }
    std::cout << fmt::format("{}/{} criteria passed\n", criteria.size() - static_cast<std::size_t>(failures), criteria.size());
    return failures == 0 ? 0 : 1;
}
