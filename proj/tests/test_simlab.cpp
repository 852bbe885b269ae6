#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "gammkit/error.hpp"
#include "gammkit/simlab.hpp"

using namespace gammkit;

namespace {

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double variance(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

double lag_corr(const std::vector<double>& v, std::size_t lag) {
    const double m = mean(v);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        den += (v[i] - m) * (v[i] - m);
        if (i + lag < v.size()) num += (v[i] - m) * (v[i + lag] - m);
    }
    return num / den;
}

double shape(const std::string& name, double t) {
    if (name == "zero") return 0.0;
    if (name == "offset") return 1.0;
    if (name == "linear") return t - 0.5;
    if (name == "sin2pi") return std::sin(2.0 * std::numbers::pi * t);
    if (name == "cos2pi") return std::cos(2.0 * std::numbers::pi * t);
    if (name == "u_shape") return (2.0 * t - 1.0) * (2.0 * t - 1.0) - 1.0 / 3.0;
    if (name == "bump") return std::exp(-((t - 0.5) / 0.15) * ((t - 0.5) / 0.15));
    if (name == "exp_decay") return std::exp(-3.0 * t);
    FAIL("unknown shape " << name);
    return 0.0;
}

// Cox-de Boor cubic B-splines with k - 3 equal intervals on [0, 1] (knots extended by 3 on each side).
std::vector<double> cox_de_boor(std::size_t k, double t) {
    const double h = 1.0 / static_cast<double>(k - 3);
    std::vector<double> knots;
    for (int i = -3; i <= static_cast<int>(k); ++i) knots.push_back(i * h);
    t = std::clamp(t, 0.0, 1.0);
    if (t >= 1.0) t = 1.0 - 1e-12;
    std::vector<double> b(knots.size() - 1, 0.0);
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) b[i] = (knots[i] <= t && t < knots[i + 1]) ? 1.0 : 0.0;
    for (int d = 1; d <= 3; ++d) {
        std::vector<double> nb(knots.size() - 1 - static_cast<std::size_t>(d), 0.0);
        for (std::size_t i = 0; i < nb.size(); ++i) {
            const double left = (t - knots[i]) / (knots[i + static_cast<std::size_t>(d)] - knots[i]);
            const double right = (knots[i + static_cast<std::size_t>(d) + 1] - t) /
                                 (knots[i + static_cast<std::size_t>(d) + 1] - knots[i + 1]);
            nb[i] = left * b[i] + right * b[i + 1];
        }
        b = nb;
    }
    b.resize(k);
    return b;
}

// Recomputes the noiseless response of every row from the data columns and the truth record.
std::vector<double> recompute_mu(const simlab::Simulation& sim) {
    const auto& sc = sim.truth.scenario;
    const auto& d = sim.data;
    const auto& subj = d.column(sc.subject_factor).codes;
    const auto& item = d.column(sc.item_factor).codes;
    const auto& time = d.column(sc.time_covariate).numeric;
    const double L = static_cast<double>(sc.series_length);
    std::vector<double> mu(d.n_rows());
    for (std::size_t r = 0; r < d.n_rows(); ++r) {
        const auto s = static_cast<std::size_t>(subj[r]), i = static_cast<std::size_t>(item[r]);
        const double tn = sc.normalized_time ? time[r] : (time[r] - 1.0) / (L - 1.0);
        double m = sim.truth.subject_intercepts[s] + sim.truth.item_intercepts[i];
        for (const auto& f : sc.fixed_smooths) {
            const double v = f.covariate == sc.time_covariate ? tn : d.column(f.covariate).numeric[r];
            m += f.amplitude * shape(f.shape, v);
        }
        if (sc.item_group && d.column(sc.item_group->name).codes[r] > 0)
            m += sc.item_group->effect_amplitude * shape(sc.item_group->effect_shape, tn);
        if (sc.subject_group) {
            const int g = d.column(sc.subject_group->name).codes[r];
            if (g > 0) m += sc.subject_group->effect_amplitude * shape(sc.subject_group->effect_shape, tn);
            m += sim.truth.interaction[i][static_cast<std::size_t>(g)];
        }
        for (const auto* curves : {sim.truth.subject_curves ? &*sim.truth.subject_curves : nullptr,
                                   sim.truth.item_curves ? &*sim.truth.item_curves : nullptr}) {
            if (!curves) continue;
            const std::size_t level = curves == &*sim.truth.subject_curves ? s : i;
            const auto b = cox_de_boor(curves->k(), tn);
            for (std::size_t j = 0; j < b.size(); ++j) m += b[j] * curves->coefficients()[level][j];
        }
        mu[r] = m;
    }
    return mu;
}

}  // namespace

TEST_CASE("AR(1) simulation statistics") {
    const auto w = simlab::simulate_ar1(100000, 0.0, 2.0, 1);
    CHECK(std::sqrt(variance(w)) == doctest::Approx(2.0).epsilon(0.03));
    CHECK(std::abs(lag_corr(w, 1)) < 0.02);

    const auto a = simlab::simulate_ar1(100000, 0.6, 1.0, 2);
    CHECK(variance(a) == doctest::Approx(1.0 / (1.0 - 0.36)).epsilon(0.03));
    for (std::size_t l = 1; l <= 3; ++l) CHECK(std::abs(lag_corr(a, l) - std::pow(0.6, static_cast<double>(l))) < 0.02);

    CHECK(simlab::simulate_ar1(50, 0.3, 1.0, 9) == simlab::simulate_ar1(50, 0.3, 1.0, 9));
    CHECK(simlab::simulate_ar1(50, 0.3, 1.0, 9) != simlab::simulate_ar1(50, 0.3, 1.0, 10));
    CHECK_THROWS_AS((void)simlab::simulate_ar1(10, 1.0, 1.0, 1), DataError);
    CHECK_THROWS_AS((void)simlab::simulate_ar1(10, -0.1, 1.0, 1), DataError);
    CHECK_THROWS_AS((void)simlab::simulate_ar1(10, 0.5, 0.0, 1), DataError);
}

TEST_CASE("stationary start") {
    // The first value of many independent series has the stationary variance.
    std::vector<double> first;
    for (std::uint64_t s = 0; s < 20000; ++s) first.push_back(simlab::simulate_ar1(2, 0.8, 1.0, s)[0]);
    CHECK(variance(first) == doctest::Approx(1.0 / (1.0 - 0.64)).epsilon(0.05));
}

TEST_CASE("random curves") {
    const auto zero = simlab::simulate_random_curves(5, 6, 0.0, 1);
    for (std::size_t l = 0; l < 5; ++l)
        for (double t : {0.0, 0.3, 1.0}) CHECK(zero(l, t) == 0.0);

    std::vector<double> sds;
    for (double scale : {0.1, 0.5, 1.0}) {
        const auto c = simlab::simulate_random_curves(200, 6, scale, 2);
        std::vector<double> values;
        for (std::size_t l = 0; l < 200; ++l) values.push_back(c(l, 0.37));
        sds.push_back(std::sqrt(variance(values)));
    }
    CHECK(sds[0] < sds[1]);
    CHECK(sds[1] < sds[2]);

    const auto a = simlab::simulate_random_curves(10, 6, 1.0, 3);
    const auto b = simlab::simulate_random_curves(10, 6, 1.0, 3);
    CHECK(a.coefficients() == b.coefficients());
    CHECK(simlab::simulate_random_curves(10, 6, 1.0, 4).coefficients() != a.coefficients());

    for (std::size_t k : {4u, 6u, 9u})
        for (double t : {0.0, 0.01, 0.25, 0.5, 0.77, 0.999, 1.0}) {
            const auto mine = simlab::RandomCurves::basis(k, t);
            const auto ref = cox_de_boor(k, t);
            double sum = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                CHECK(mine[j] == doctest::Approx(ref[j]).epsilon(1e-9));
                sum += mine[j];
            }
            CHECK(sum == doctest::Approx(1.0));
        }
}

TEST_CASE("scenario cardinalities") {
    const auto naming = simlab::generate(simlab::naming_scenario(1));
    CHECK(naming.data.n_rows() == 3000);
    CHECK(naming.data.column("Subject").levels.size() == 20);
    CHECK(naming.truth.scenario.ar_rho == 0.3);
    CHECK(naming.truth.scenario.fixed_smooths.at(0).shape == "u_shape");
    const auto& trial = naming.data.column("Trial").numeric;
    CHECK(*std::max_element(trial.begin(), trial.end()) == 150.0);

    const auto pitch = simlab::generate(simlab::pitch_scenario(1));
    CHECK(pitch.data.n_rows() == 12 * 40 * 100);
    CHECK(pitch.data.column("Speaker").levels.size() == 12);
    CHECK(pitch.data.column("Compound").levels.size() == 40);
    CHECK(pitch.data.column("Branching").levels.size() == 4);
    CHECK(pitch.data.column("Branching").kind == data::ColumnKind::ordered_factor);
    CHECK(pitch.truth.scenario.ar_rho == 0.98);
    const auto idx = data::build_series_index(pitch.data, "NewTimeSeries");
    CHECK(idx.n_series() == 480);

    const auto eeg = simlab::generate(simlab::eeg_scenario(1));
    CHECK(eeg.data.n_rows() == 10 * 30 * 50);
}

TEST_CASE("zero noise and no random parts give the fixed sum") {
    simlab::Scenario sc;
    sc.n_subjects = 3;
    sc.n_items = 4;
    sc.series_length = 20;
    sc.layout = simlab::Layout::event_series;
    sc.normalized_time = true;
    sc.fixed_smooths = {{"Time", "sin2pi", 1.5}, {"Time", "linear", -2.0}};
    sc.noise_sd = 0.0;
    const auto sim = simlab::generate(sc);
    const auto& y = sim.data.column("y").numeric;
    const auto& t = sim.data.column("Time").numeric;
    for (std::size_t r = 0; r < y.size(); ++r) {
        CHECK(y[r] == sim.truth.mu[r]);
        CHECK(y[r] == doctest::Approx(1.5 * std::sin(2.0 * std::numbers::pi * t[r]) - 2.0 * (t[r] - 0.5)).epsilon(1e-13));
    }
}

TEST_CASE("truth record recomputes the noiseless response") {
    for (const auto& sc : {simlab::naming_scenario(3), simlab::pitch_scenario(3), simlab::eeg_scenario(3)}) {
        const auto sim = simlab::generate(sc);
        const auto mu = recompute_mu(sim);
        const auto& y = sim.data.column(sc.response).numeric;
        double worst = 0.0;
        for (std::size_t r = 0; r < mu.size(); ++r) {
            worst = std::max(worst, std::abs(mu[r] - sim.truth.mu[r]));
            CHECK(y[r] == sim.truth.mu[r] + sim.truth.noise[r]);
        }
        CHECK(worst < 1e-10);
    }
}

TEST_CASE("bit reproducibility") {
    const auto a = simlab::generate(simlab::pitch_scenario(7));
    const auto b = simlab::generate(simlab::pitch_scenario(7));
    CHECK(data::to_csv(a.data) == data::to_csv(b.data));
    CHECK(a.truth.to_json().dump() == b.truth.to_json().dump());
    CHECK(data::to_csv(simlab::generate(simlab::pitch_scenario(8)).data) != data::to_csv(a.data));

    const auto round = simlab::scenario_from_json(simlab::scenario_to_json(simlab::naming_scenario(5)));
    CHECK(data::to_csv(simlab::generate(round).data) == data::to_csv(simlab::generate(simlab::naming_scenario(5)).data));
}

TEST_CASE("stream splitting") {
    auto a = simlab::Rng::stream(1, simlab::stream_id(simlab::Stream::noise, 0, 0));
    auto b = simlab::Rng::stream(1, simlab::stream_id(simlab::Stream::noise, 0, 1));
    auto c = simlab::Rng::stream(1, simlab::stream_id(simlab::Stream::noise, 0, 0));
    const double av = a.uniform();
    CHECK(av != b.uniform());
    CHECK(av == c.uniform());
    CHECK(simlab::stream_id(simlab::Stream::noise, 1, 2) != simlab::stream_id(simlab::Stream::order, 1, 2));
    for (int i = 0; i < 1000; ++i) {
        const double u = a.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("scenario validation and JSON errors") {
    auto sc = simlab::naming_scenario(1);
    sc.ar_rho = 1.0;
    CHECK_THROWS_AS(sc.validate(), DataError);
    sc = simlab::naming_scenario(1);
    sc.subject_curve_scale = -1.0;
    CHECK_THROWS_AS(sc.validate(), DataError);
    sc = simlab::naming_scenario(1);
    sc.n_subjects = 0;
    CHECK_THROWS_AS((void)simlab::generate(sc), DataError);

    CHECK_THROWS_AS((void)simlab::scenario_from_json(nlohmann::json{{"n_subjects", "many"}}), DataError);
    CHECK_THROWS_AS((void)simlab::scenario_from_json(nlohmann::json{{"layout", "sideways"}}), DataError);
    const auto path = std::filesystem::temp_directory_path() / "gammkit_bad_scenario.json";
    {
        std::ofstream out(path);
        out << "{ \"n_subjects\": 3, ";
    }
    CHECK_THROWS_AS((void)simlab::load_scenario(path), DataError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS((void)simlab::load_scenario("/nonexistent/scenario.json"), DataError);
}
