#include "gammkit/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "gammkit/dataset.hpp"
#include "gammkit/diagnostics.hpp"
#include "gammkit/engine.hpp"
#include "gammkit/error.hpp"
#include "gammkit/formula.hpp"
#include "gammkit/inference.hpp"
#include "gammkit/simlab.hpp"

namespace gammkit::cli {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> kEmitNames = {"summary", "curves", "surfaces", "acf", "recoefs"};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    out << text;
    if (text.empty() || text.back() != '\n') out << '\n';
}

fs::path ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw DataError(fmt::format("cannot create output directory '{}'", dir.string()));
    return dir;
}

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
    out.back() = hi;
    return out;
}

std::vector<double> parse_candidates(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw DataError(fmt::format("candidate '{}' is not a number", item));
        }
    }
    if (out.empty()) throw DataError("candidate list is empty");
    return out;
}

std::set<std::string> parse_emit(const std::string& text) {
    std::set<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.insert(item);
    }
    return out;
}

data::Dataset load_data(const RunConfig& c) {
    if (!c.data) throw DataError("--data is required");
    const data::SchemaOverrides schema = c.schema ? data::load_schema(*c.schema) : data::SchemaOverrides{};
    return data::load_csv(*c.data, schema);
}

formula::ModelSpec model_spec(const RunConfig& c) {
    if (!c.formula) throw DataError("--formula is required");
    formula::ModelSpec spec = formula::parse_formula(*c.formula);
    formula::set_ar_options(spec, c.rho, c.ar_start);
    return spec;
}

engine::FitOptions fit_options() {
    engine::FitOptions o;
    o.optimizer.threads = engine::default_threads();
    return o;
}

std::string residuals_csv(const engine::FittedGamm& m) {
    std::string out = "row,series_start,fitted,raw,whitened\n";
    for (Eigen::Index i = 0; i < m.residuals_raw.size(); ++i) {
        out += fmt::format("{},{},{},{},{}\n", i + 1, m.series.start_flags[static_cast<std::size_t>(i)] ? "TRUE" : "FALSE",
                           m.fitted(i), m.residuals_raw(i), m.residuals_whitened(i));
    }
    return out;
}

void emit_curves(const engine::FittedGamm& m, const RunConfig& c, const fs::path& dir) {
    for (const auto& b : m.design.blocks) {
        if (b.kind == basis::BlockKind::random_effect || b.kind == basis::BlockKind::tensor) continue;
        const auto range = m.covariate_ranges.at(b.covariates.at(0));
        const auto grid = linspace(range.first, range.second, c.grid);
        if (b.kind == basis::BlockKind::factor_smooth) {
            std::string text = "level,grid,fit,se,lower95,upper95\n";
            for (const auto& level : b.levels) {
                inference::EvalOptions o;
                o.level = level;
                const auto curve = inference::evaluate_smooth(m, b.label, grid, o);
                const auto lo = curve.lower(), hi = curve.upper();
                for (std::size_t i = 0; i < grid.size(); ++i)
                    text += fmt::format("{},{},{},{},{},{}\n", level, grid[i], curve.fit[i], curve.se[i], lo[i], hi[i]);
            }
            write_text(dir / (file_stem(b.label) + ".csv"), text);
            continue;
        }
        if (b.difference) {
            const auto curve = inference::evaluate_difference(m, b.label, *b.by_level, grid);
            write_text(dir / (file_stem(b.label) + ".csv"), curve.to_csv());
            continue;
        }
        write_text(dir / (file_stem(b.label) + ".csv"), inference::evaluate_smooth(m, b.label, grid).to_csv());
    }
}

void emit_surfaces(const engine::FittedGamm& m, const RunConfig& c, const fs::path& dir) {
    for (const auto& b : m.design.blocks) {
        if (b.kind != basis::BlockKind::tensor || b.covariates.size() != 2) continue;
        const auto rx = m.covariate_ranges.at(b.covariates[0]);
        const auto rz = m.covariate_ranges.at(b.covariates[1]);
        const auto s = inference::evaluate_surface(m, b.label, linspace(rx.first, rx.second, c.grid),
                                                   linspace(rz.first, rz.second, c.grid));
        write_text(dir / (file_stem(b.label) + ".csv"), s.to_csv());
    }
}

int report(const std::exception& e, int code, std::ostream& err) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "gammkit: " << (code == kExitFitError ? "fit error: " : "error: ") << msg << '\n';
    return code;
}

template <typename F>
int guarded(F&& body, std::ostream& err) {
    try {
        return body();
    } catch (const FitError& e) {
        return report(e, kExitFitError, err);
    } catch (const DataError& e) {
        return report(e, kExitDataError, err);
    } catch (const fs::filesystem_error& e) {
        return report(e, kExitDataError, err);
    } catch (const nlohmann::json::exception& e) {
        return report(e, kExitDataError, err);
    } catch (const std::exception& e) {
        return report(e, kExitFitError, err);
    }
}

}  // namespace

std::string file_stem(const std::string& label) {
    std::string out;
    for (char ch : label) {
        const bool keep = std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '.' || ch == '=';
        if (keep) {
            out += ch;
        } else if (!out.empty() && out.back() != '_') {
            out += '_';
        }
    }
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out.empty() ? "term" : out;
}

void RunConfig::validate() const {
    if (grid < 2) throw DataError(fmt::format("--grid must be at least 2, got {}", grid));
    if (max_lag < 1) throw DataError(fmt::format("--max-lag must be at least 1, got {}", max_lag));
    if (!(rho >= 0.0 && rho < 1.0)) throw DataError(fmt::format("--rho must lie in [0, 1), got {}", rho));
    for (const auto& e : emit)
        if (!kEmitNames.contains(e)) throw DataError(fmt::format("unknown --emit item '{}'", e));
    if (top < 0) throw DataError("--top must be nonnegative");
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("cannot open config file '{}'", path.string()));
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("malformed config '{}': {}", path.string(), e.what()));
    }
    if (!j.is_object()) throw DataError("config must be a JSON object");
    RunConfig c;
    try {
        if (j.contains("data")) c.data = j["data"].get<std::string>();
        if (j.contains("formula")) c.formula = j["formula"].get<std::string>();
        if (j.contains("rho")) c.rho = j["rho"].get<double>();
        if (j.contains("ar_start")) c.ar_start = j["ar_start"].get<std::string>();
        if (j.contains("out")) c.out = j["out"].get<std::string>();
        if (j.contains("grid")) c.grid = j["grid"].get<int>();
        if (j.contains("max_lag")) c.max_lag = j["max_lag"].get<int>();
        if (j.contains("schema")) c.schema = j["schema"].get<std::string>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("scenario")) c.scenario = j["scenario"].get<std::string>();
        if (j.contains("residuals")) c.residuals = j["residuals"].get<std::string>();
        if (j.contains("top")) c.top = j["top"].get<int>();
        if (j.contains("candidates")) {
            const auto& v = j["candidates"];
            c.candidates = v.is_string() ? parse_candidates(v.get<std::string>()) : v.get<std::vector<double>>();
        }
        if (j.contains("emit")) {
            const auto& v = j["emit"];
            if (v.is_string()) c.emit = parse_emit(v.get<std::string>());
            else c.emit = v.get<std::set<std::string>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("config '{}': {}", path.string(), e.what()));
    }
    return c;
}

int cmd_fit(const RunConfig& c, std::ostream& out, std::ostream& err) {
    return guarded(
        [&] {
            c.validate();
            const auto spec = model_spec(c);
            const auto data = load_data(c);
            const auto model = engine::fit(spec, data, fit_options());
            const auto summary = inference::summarize(model);
            out << summary.to_text();
            if (!model.converged) err << "gammkit: warning: smoothing parameter selection did not converge\n";
            if (!c.out) return kExitOk;
            const fs::path dir = ensure_dir(*c.out);
            if (c.emit.contains("summary")) {
                write_text(dir / "summary.txt", summary.to_text());
                write_text(dir / "summary.json", summary.to_json().dump(2));
                write_text(dir / "residuals.csv", residuals_csv(model));
            }
            if (c.emit.contains("curves")) emit_curves(model, c, ensure_dir(dir / "curves"));
            if (c.emit.contains("surfaces")) {
                const bool any = std::any_of(model.design.blocks.begin(), model.design.blocks.end(),
                                             [](const auto& b) { return b.kind == basis::BlockKind::tensor; });
                if (any) emit_surfaces(model, c, ensure_dir(dir / "surfaces"));
            }
            if (c.emit.contains("recoefs")) {
                for (const auto& b : model.design.blocks) {
                    if (b.kind != basis::BlockKind::random_effect) continue;
                    write_text(ensure_dir(dir / "recoefs") / (file_stem(b.label) + ".csv"),
                               inference::random_effect_coefs(model, b.label).to_csv());
                }
            }
            if (c.emit.contains("acf")) {
                try {
                    const auto a = diagnostics::acf_by_series(
                        std::span<const double>(model.residuals_whitened.data(),
                                                static_cast<std::size_t>(model.residuals_whitened.size())),
                        model.series, static_cast<std::size_t>(c.max_lag));
                    for (const auto& n : a.notices) err << "gammkit: notice: " << n << '\n';
                    write_text(dir / "acf.csv", diagnostics::acf_to_csv(a));
                } catch (const DataError& e) {
                    err << "gammkit: notice: acf not written: " << e.what() << '\n';
                }
            }
            return kExitOk;
        },
        err);
}

int cmd_acf(const RunConfig& c, std::ostream& out, std::ostream& err) {
    return guarded(
        [&] {
            c.validate();
            std::vector<double> resid;
            data::SeriesIndex series;
            if (c.residuals) {
                const auto table = data::load_csv(*c.residuals);
                const data::Column* col = nullptr;
                for (const char* name : {"whitened", "residual", "residuals"})
                    if (table.has(name)) col = &table.column(name);
                if (!col) {
                    for (const auto& cc : table.columns())
                        if (cc.kind == data::ColumnKind::numeric && cc.name != "row") {
                            col = &cc;
                            break;
                        }
                }
                if (!col || col->kind != data::ColumnKind::numeric)
                    throw DataError(fmt::format("'{}' has no numeric residual column", c.residuals->string()));
                resid = col->numeric;
                if (c.ar_start) series = data::build_series_index(table, *c.ar_start);
                else if (table.has("series_start")) series = data::build_series_index(table, "series_start");
                else series = data::single_series(resid.size());
            } else {
                const auto spec = model_spec(c);
                const auto data = load_data(c);
                const auto model = engine::fit(spec, data, fit_options());
                resid.assign(model.residuals_whitened.data(), model.residuals_whitened.data() + model.residuals_whitened.size());
                series = model.series;
            }
            const auto a = diagnostics::acf_by_series(resid, series, static_cast<std::size_t>(c.max_lag));
            for (const auto& n : a.notices) err << "gammkit: notice: " << n << '\n';
            std::size_t lag1 = 0, flags = 0, cells = 0;
            for (const auto& r : a.series) {
                lag1 += r.significant[1] ? 1 : 0;
                flags += r.significant_count();
                cells += r.max_lag();
            }
            out << fmt::format("series: {}\nseries with significant lag 1: {} ({:.1f}%)\nsignificant lags: {} of {} ({:.1f}%)\n",
                               a.series.size(), lag1, 100.0 * static_cast<double>(lag1) / static_cast<double>(a.series.size()),
                               flags, cells, 100.0 * static_cast<double>(flags) / static_cast<double>(std::max<std::size_t>(cells, 1)));
            out << fmt::format("pooled lag 1: {:.4f} (bound {:.4f})\n", a.pooled.acf[1], a.pooled.ci_bound);
            if (c.top > 0) {
                std::vector<std::size_t> order(a.series.size());
                for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
                std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
                    return std::abs(a.series[x].acf[1]) > std::abs(a.series[y].acf[1]);
                });
                out << "most autocorrelated series (|lag 1|):\n";
                for (std::size_t i = 0; i < std::min<std::size_t>(static_cast<std::size_t>(c.top), order.size()); ++i)
                    out << fmt::format("  {} {:.4f}\n", a.series[order[i]].series, a.series[order[i]].acf[1]);
            }
            if (c.out) write_text(ensure_dir(*c.out) / "acf.csv", diagnostics::acf_to_csv(a));
            else out << diagnostics::acf_to_csv(a);
            return kExitOk;
        },
        err);
}

int cmd_rho_sweep(const RunConfig& c, std::ostream& out, std::ostream& err) {
    return guarded(
        [&] {
            c.validate();
            if (c.candidates.empty()) throw DataError("--candidates is required");
            formula::ModelSpec spec = model_spec(c);
            if (!spec.ar_start_column && c.ar_start) spec.ar_start_column = c.ar_start;
            const auto data = load_data(c);
            diagnostics::SweepOptions o;
            o.max_lag = static_cast<std::size_t>(c.max_lag);
            o.fit = fit_options();
            const auto report = diagnostics::rho_sweep(spec, data, c.candidates, o);
            for (const auto& cand : report.candidates) {
                if (cand.fitted) {
                    out << fmt::format("rho={:<6} pooled lag1={:+.4f} persistent={} artifact={} of {}\n", cand.rho,
                                       cand.pooled_lag1, cand.persistent, cand.artifact, cand.n_series);
                } else {
                    err << fmt::format("gammkit: notice: rho={} skipped: {}\n", cand.rho, cand.error.value_or(""));
                }
            }
            if (report.recommended) out << fmt::format("recommended rho: {}\n", *report.recommended);
            else out << "recommended rho: none\n";
            if (c.out) write_text(ensure_dir(*c.out) / "rho_report.json", report.to_json().dump(2));
            if (!report.recommended) throw FitError("no candidate could be fitted");
            return kExitOk;
        },
        err);
}

int cmd_simulate(const RunConfig& c, std::ostream& out, std::ostream& err) {
    return guarded(
        [&] {
            if (!c.scenario) throw DataError("--scenario is required");
            if (!c.out) throw DataError("--out is required");
            simlab::Scenario sc;
            const std::string& s = *c.scenario;
            if (fs::exists(s)) sc = simlab::load_scenario(s);
            else if (s == "naming") sc = simlab::naming_scenario();
            else if (s == "pitch") sc = simlab::pitch_scenario();
            else if (s == "eeg") sc = simlab::eeg_scenario();
            else throw DataError(fmt::format("scenario '{}' is neither a file nor a built-in name", s));
            if (c.seed) sc.seed = *c.seed;
            const auto sim = simlab::generate(sc);
            const fs::path dir = ensure_dir(*c.out);
            write_text(dir / "data.csv", data::to_csv(sim.data));
            write_text(dir / "truth.json", sim.truth.to_json().dump(1));
            nlohmann::json schema = nlohmann::json::object();
            for (const auto* g : {&sc.item_group, &sc.subject_group}) {
                if (!*g || !(*g)->ordered) continue;
                const auto& col = sim.data.column((*g)->name);
                schema[(*g)->name] = {{"kind", "ordered_factor"}, {"levels", col.levels}};
            }
            write_text(dir / "schema.json", schema.dump(2));
            out << fmt::format("{}: {} rows written to {}\n", sc.name, sim.data.n_rows(), (dir / "data.csv").string());
            return kExitOk;
        },
        err);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Gaussian additive mixed models with AR(1) errors"};
    app.require_subcommand(1);
    RunConfig c;
    std::string rho_text, candidates_text, emit_text;
    std::optional<std::string> config_path, data, out_dir, schema, residuals;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file with the same fields");
        sub->add_option("--data", data, "CSV data file");
        sub->add_option("--formula", c.formula, "model formula");
        sub->add_option("--rho", rho_text, "AR(1) parameter in [0, 1)");
        sub->add_option("--ar-start", c.ar_start, "boolean column flagging series starts");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--schema", schema, "schema override JSON");
        sub->add_option("--max-lag", c.max_lag, "largest ACF lag");
    };
    auto* fit = app.add_subcommand("fit", "fit a model and write summaries and plot data");
    common(fit);
    fit->add_option("--grid", c.grid, "grid points per curve");
    fit->add_option("--emit", emit_text, "comma list of summary,curves,surfaces,acf,recoefs");
    auto* acf = app.add_subcommand("acf", "residual autocorrelation by series");
    common(acf);
    acf->add_option("--residuals", residuals, "residual CSV (as written by fit)");
    acf->add_option("--top", c.top, "list the K most autocorrelated series");
    auto* sweep = app.add_subcommand("rho-sweep", "refit over candidate rho values");
    common(sweep);
    sweep->add_option("--candidates", candidates_text, "comma list of rho values");
    auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset with ground truth");
    sim->add_option("--scenario", c.scenario, "scenario JSON file or built-in name (naming, pitch, eeg)");
    sim->add_option("--seed", c.seed, "override the scenario seed");
    sim->add_option("--out", out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kExitOk;
        }
        err << "gammkit: error: " << e.what() << '\n';
        return kExitDataError;
    }

    return guarded(
        [&] {
            RunConfig cfg = config_path ? load_config(*config_path) : RunConfig{};
            // Flags given on the command line override the config file.
            auto given = [&](CLI::App* sub, const char* name) { return sub->count(name) > 0; };
            CLI::App* sub = app.get_subcommands().front();
            if (data) cfg.data = *data;
            if (c.formula) cfg.formula = c.formula;
            if (!rho_text.empty()) {
                try {
                    std::size_t used = 0;
                    cfg.rho = std::stod(rho_text, &used);
                    if (used != rho_text.size()) throw std::invalid_argument(rho_text);
                } catch (const std::exception&) {
                    throw DataError(fmt::format("--rho '{}' is not a number", rho_text));
                }
            }
            if (c.ar_start) cfg.ar_start = c.ar_start;
            if (out_dir) cfg.out = *out_dir;
            if (schema) cfg.schema = *schema;
            if (residuals) cfg.residuals = *residuals;
            if (c.scenario) cfg.scenario = c.scenario;
            if (c.seed) cfg.seed = c.seed;
            if (sub->get_option_no_throw("--max-lag") && given(sub, "--max-lag")) cfg.max_lag = c.max_lag;
            if (sub->get_option_no_throw("--grid") && given(sub, "--grid")) cfg.grid = c.grid;
            if (sub->get_option_no_throw("--top") && given(sub, "--top")) cfg.top = c.top;
            if (!candidates_text.empty()) cfg.candidates = parse_candidates(candidates_text);
            if (!emit_text.empty()) cfg.emit = parse_emit(emit_text);
            if (sub == fit) return cmd_fit(cfg, out, err);
            if (sub == acf) return cmd_acf(cfg, out, err);
            if (sub == sweep) return cmd_rho_sweep(cfg, out, err);
            return cmd_simulate(cfg, out, err);
        },
        err);
}

}  // namespace gammkit::cli
