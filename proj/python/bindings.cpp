#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <set>
#include <sstream>

#include "gammkit/cli.hpp"
#include "gammkit/dataset.hpp"
#include "gammkit/diagnostics.hpp"
#include "gammkit/engine.hpp"
#include "gammkit/error.hpp"
#include "gammkit/formula.hpp"
#include "gammkit/inference.hpp"
#include "gammkit/simlab.hpp"

namespace py = pybind11;
using namespace gammkit;

namespace {

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_python(const py::handle& obj) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

data::Column column_from_python(const std::string& name, const py::handle& values, bool ordered) {
    if (py::isinstance<py::array>(values)) {
        const auto arr = py::reinterpret_borrow<py::array>(values);
        const char kind = arr.dtype().kind();
        if (kind == 'b') return data::Column::make_boolean(name, arr.cast<std::vector<bool>>());
        if (kind == 'f' || kind == 'i' || kind == 'u') {
            const auto d = py::array_t<double, py::array::c_style | py::array::forcecast>::ensure(arr);
            return data::Column::make_numeric(name, std::vector<double>(d.data(), d.data() + d.size()));
        }
    }
    const auto seq = py::reinterpret_borrow<py::sequence>(values);
    bool all_str = seq.size() > 0, all_bool = seq.size() > 0;
    for (const auto& v : seq) {
        all_str = all_str && py::isinstance<py::str>(v);
        all_bool = all_bool && py::isinstance<py::bool_>(v);
    }
    if (all_str) return data::Column::make_factor(name, seq.cast<std::vector<std::string>>(), ordered);
    if (all_bool) return data::Column::make_boolean(name, seq.cast<std::vector<bool>>());
    return data::Column::make_numeric(name, seq.cast<std::vector<double>>());
}

data::Dataset dataset_from_dict(const py::dict& columns, const std::set<std::string>& ordered) {
    std::vector<data::Column> cols;
    for (const auto& [key, value] : columns) {
        const auto name = key.cast<std::string>();
        cols.push_back(column_from_python(name, value, ordered.contains(name)));
    }
    return data::Dataset(std::move(cols));
}

py::object column_to_python(const data::Column& c) {
    if (c.kind == data::ColumnKind::numeric) return py::array_t<double>(static_cast<py::ssize_t>(c.numeric.size()), c.numeric.data());
    if (c.kind == data::ColumnKind::boolean) {
        py::list out;
        for (int code : c.codes) out.append(py::bool_(code != 0));
        return py::module_::import("numpy").attr("array")(out, "bool");
    }
    py::list out;
    for (int code : c.codes) out.append(c.levels[static_cast<std::size_t>(code)]);
    return out;
}

py::dict curve_dict(const inference::CurveEstimate& c) {
    py::dict d;
    d["label"] = c.label;
    d["grid"] = c.grid;
    d["fit"] = c.fit;
    d["se"] = c.se;
    d["lower"] = c.lower();
    d["upper"] = c.upper();
    if (c.zero_containment) d["zero_containment"] = *c.zero_containment;
    return d;
}

py::dict spec_dict(const formula::ModelSpec& s) {
    py::list smooths;
    for (const auto& t : s.smooth_terms) {
        py::dict d;
        d["label"] = t.label;
        d["kind"] = std::string(formula::to_string(t.kind));
        d["covariates"] = t.covariates;
        d["by"] = t.by_var ? py::object(py::str(*t.by_var)) : py::none();
        d["k"] = t.basis_dim_k;
        d["m"] = t.shrinkage_order_m ? py::object(py::int_(*t.shrinkage_order_m)) : py::none();
        smooths.append(d);
    }
    py::dict out;
    out["response"] = s.response;
    out["parametric"] = s.parametric_terms;
    out["smooths"] = smooths;
    return out;
}

formula::ModelSpec make_spec(const std::string& text, double rho, const std::optional<std::string>& ar_start) {
    auto spec = formula::parse_formula(text);
    formula::set_ar_options(spec, rho, ar_start);
    return spec;
}

data::SeriesIndex series_from(const std::optional<std::vector<bool>>& starts, std::size_t n) {
    return starts ? data::build_series_index(*starts) : data::single_series(n);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Gaussian additive mixed models with AR(1) errors";

    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<FitError>(m, "FitError", PyExc_RuntimeError);

    m.def("parse_formula", [](const std::string& text) { return spec_dict(formula::parse_formula(text)); }, py::arg("text"));

    py::class_<data::Dataset>(m, "Dataset")
        .def(py::init([](const py::dict& columns, const std::set<std::string>& ordered) {
                 return dataset_from_dict(columns, ordered);
             }),
             py::arg("columns"), py::arg("ordered") = std::set<std::string>{})
        .def_property_readonly("n_rows", &data::Dataset::n_rows)
        .def_property_readonly("names",
                               [](const data::Dataset& d) {
                                   std::vector<std::string> out;
                                   for (const auto& c : d.columns()) out.push_back(c.name);
                                   return out;
                               })
        .def("column", [](const data::Dataset& d, const std::string& name) { return column_to_python(d.column(name)); })
        .def("to_csv", &data::to_csv)
        .def("__len__", &data::Dataset::n_rows);

    m.def(
        "read_csv",
        [](const std::filesystem::path& path, const std::optional<std::filesystem::path>& schema) {
            return data::load_csv(path, schema ? data::load_schema(*schema) : data::SchemaOverrides{});
        },
        py::arg("path"), py::arg("schema") = py::none());

    py::class_<engine::FittedGamm>(m, "Model")
        .def_readonly("coefficients", &engine::FittedGamm::beta)
        .def_readonly("lambdas", &engine::FittedGamm::lambdas)
        .def_readonly("sigma2", &engine::FittedGamm::sigma2)
        .def_readonly("rho", &engine::FittedGamm::rho)
        .def_readonly("reml", &engine::FittedGamm::reml_score)
        .def_readonly("edf_total", &engine::FittedGamm::edf_total)
        .def_readonly("converged", &engine::FittedGamm::converged)
        .def_readonly("fitted", &engine::FittedGamm::fitted)
        .def_readonly("residuals", &engine::FittedGamm::residuals_raw)
        .def_readonly("residuals_whitened", &engine::FittedGamm::residuals_whitened)
        .def_readonly("vcov", &engine::FittedGamm::Vb)
        .def_property_readonly("n", &engine::FittedGamm::n)
        .def_property_readonly("edf",
                               [](const engine::FittedGamm& f) {
                                   py::dict d;
                                   for (const auto& t : f.edf_per_term) d[py::str(t.label)] = t.edf;
                                   return d;
                               })
        .def_property_readonly("aic", [](const engine::FittedGamm& f) { return inference::aic(f); })
        .def_property_readonly("adjusted_r2", [](const engine::FittedGamm& f) { return inference::adjusted_r2(f); })
        .def("summary", [](const engine::FittedGamm& f) { return inference::summarize(f).to_text(); })
        .def("summary_dict", [](const engine::FittedGamm& f) { return to_python(inference::summarize(f).to_json()); })
        .def(
            "smooth",
            [](const engine::FittedGamm& f, const std::string& label, const std::vector<double>& grid,
               const std::optional<std::string>& level) {
                inference::EvalOptions o;
                o.level = level;
                return curve_dict(inference::evaluate_smooth(f, label, grid, o));
            },
            py::arg("label"), py::arg("grid"), py::arg("level") = py::none())
        .def(
            "difference",
            [](const engine::FittedGamm& f, const std::string& label, const std::string& level,
               const std::vector<double>& grid) { return curve_dict(inference::evaluate_difference(f, label, level, grid)); },
            py::arg("label"), py::arg("level"), py::arg("grid"))
        .def(
            "random_effects",
            [](const engine::FittedGamm& f, const std::string& label) {
                const auto t = inference::random_effect_coefs(f, label);
                py::list rows;
                for (const auto& r : t.rows) {
                    py::dict d;
                    d["keys"] = r.keys;
                    d["coefficient"] = r.coefficient;
                    d["sd"] = r.sd;
                    rows.append(d);
                }
                return rows;
            },
            py::arg("label"));

    m.def(
        "fit",
        [](const std::string& formula_text, const data::Dataset& data, double rho, const std::optional<std::string>& ar_start,
           const std::optional<engine::VectorXd>& lambdas) {
            engine::FitOptions o;
            o.optimizer.threads = engine::default_threads();
            o.fixed_lambdas = lambdas;
            const auto spec = make_spec(formula_text, rho, ar_start);
            py::gil_scoped_release release;
            return engine::fit(spec, data, o);
        },
        py::arg("formula"), py::arg("data"), py::arg("rho") = 0.0, py::arg("ar_start") = py::none(),
        py::arg("lambdas") = py::none());

    m.def(
        "acf",
        [](const std::vector<double>& x, std::size_t max_lag, const std::optional<std::vector<bool>>& starts) {
            return to_python(diagnostics::acf_to_json(diagnostics::acf_by_series(x, series_from(starts, x.size()), max_lag)));
        },
        py::arg("x"), py::arg("max_lag") = 10, py::arg("starts") = py::none());

    m.def(
        "suggest_rho",
        [](const engine::FittedGamm& model) {
            const auto s = diagnostics::suggest_rho(model);
            py::dict d;
            d["rho"] = s.rho;
            d["raw_lag1"] = s.raw_lag1;
            d["notice"] = s.notice ? py::object(py::str(*s.notice)) : py::none();
            return d;
        },
        py::arg("model"));

    m.def(
        "rho_sweep",
        [](const std::string& formula_text, const data::Dataset& data, const std::vector<double>& candidates,
           const std::optional<std::string>& ar_start, std::size_t max_lag) {
            diagnostics::SweepOptions o;
            o.max_lag = max_lag;
            auto spec = formula::parse_formula(formula_text);
            spec.ar_start_column = ar_start;
            return to_python(diagnostics::rho_sweep(spec, data, candidates, o).to_json());
        },
        py::arg("formula"), py::arg("data"), py::arg("candidates"), py::arg("ar_start") = py::none(),
        py::arg("max_lag") = 10);

    m.def(
        "simulate",
        [](const py::object& scenario, const std::optional<std::uint64_t>& seed) {
            simlab::Scenario sc;
            if (py::isinstance<py::str>(scenario)) {
                const auto name = scenario.cast<std::string>();
                if (name == "naming") sc = simlab::naming_scenario();
                else if (name == "pitch") sc = simlab::pitch_scenario();
                else if (name == "eeg") sc = simlab::eeg_scenario();
                else throw DataError("unknown scenario '" + name + "' (naming, pitch, eeg, or a dict)");
            } else {
                sc = simlab::scenario_from_json(from_python(scenario));
            }
            if (seed) sc.seed = *seed;
            auto sim = simlab::generate(sc);
            return py::make_tuple(std::move(sim.data), to_python(sim.truth.to_json()));
        },
        py::arg("scenario"), py::arg("seed") = py::none());

    m.def(
        "run_cli",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "gammkit");
            std::ostringstream out, err;
            const int code = cli::run(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"));
}
