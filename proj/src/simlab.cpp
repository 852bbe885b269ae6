#include "gammkit/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

#include "gammkit/error.hpp"

namespace gammkit::simlab {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t stream_id(Stream purpose, std::uint64_t a, std::uint64_t b) {
    return (static_cast<std::uint64_t>(purpose) << 56) ^ ((a & 0xFFFFFFULL) << 28) ^ (b & 0xFFFFFFFULL);
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

Rng Rng::stream(std::uint64_t seed, std::uint64_t id) { return Rng(splitmix64(seed ^ splitmix64(id))); }

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    if (spare_) {
        const double v = *spare_;
        spare_.reset();
        return v;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    return r * std::cos(a);
}

std::size_t Rng::below(std::size_t n) {
    if (n == 0) return 0;
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

std::vector<double> simulate_ar1(std::size_t n, double rho, double sd, Rng& rng) {
    if (!(rho >= 0.0 && rho < 1.0)) throw DataError(fmt::format("ar1: rho must lie in [0, 1), got {}", rho));
    if (!(sd > 0.0)) throw DataError(fmt::format("ar1: sd must be positive, got {}", sd));
    std::vector<double> e(n);
    if (n == 0) return e;
    e[0] = rng.normal() * sd / std::sqrt(1.0 - rho * rho);
    for (std::size_t t = 1; t < n; ++t) e[t] = rho * e[t - 1] + sd * rng.normal();
    return e;
}

std::vector<double> simulate_ar1(std::size_t n, double rho, double sd, std::uint64_t seed) {
    Rng rng(seed);
    return simulate_ar1(n, rho, sd, rng);
}

RandomCurves::RandomCurves(std::size_t k, std::vector<std::vector<double>> coefficients)
    : k_(k), coef_(std::move(coefficients)) {
    if (k_ < 4) throw DataError("random curves need k >= 4");
    for (const auto& c : coef_)
        if (c.size() != k_) throw DataError("random curve coefficient length differs from k");
}

// Uniform cubic B-splines with k - 3 intervals on [0, 1]; x is clamped to the interval.
std::vector<double> RandomCurves::basis(std::size_t k, double t) {
    std::vector<double> b(k, 0.0);
    const std::size_t intervals = k - 3;
    const double u = std::clamp(t, 0.0, 1.0) * static_cast<double>(intervals);
    const std::size_t i = std::min(static_cast<std::size_t>(u), intervals - 1);
    const double f = u - static_cast<double>(i);
    const double f2 = f * f, f3 = f2 * f;
    b[i] = (1.0 - f) * (1.0 - f) * (1.0 - f) / 6.0;
    b[i + 1] = (3.0 * f3 - 6.0 * f2 + 4.0) / 6.0;
    b[i + 2] = (-3.0 * f3 + 3.0 * f2 + 3.0 * f + 1.0) / 6.0;
    b[i + 3] = f3 / 6.0;
    return b;
}

double RandomCurves::operator()(std::size_t level, double t) const {
    const auto b = basis(k_, t);
    double v = 0.0;
    for (std::size_t j = 0; j < k_; ++j) v += b[j] * coef_.at(level)[j];
    return v;
}

RandomCurves simulate_random_curves(std::size_t n_levels, std::size_t k, double scale, std::uint64_t seed,
                                    Stream purpose) {
    if (scale < 0.0) throw DataError("random curve scale must be nonnegative");
    std::vector<std::vector<double>> coef(n_levels, std::vector<double>(k, 0.0));
    for (std::size_t l = 0; l < n_levels; ++l) {
        Rng rng = Rng::stream(seed, stream_id(purpose, l));
        for (auto& c : coef[l]) c = scale * rng.normal();
    }
    return RandomCurves(k, std::move(coef));
}

double shape_value(const std::string& shape, double t) {
    using std::numbers::pi;
    if (shape == "zero") return 0.0;
    if (shape == "offset") return 1.0;
    if (shape == "linear") return t - 0.5;
    if (shape == "sin2pi") return std::sin(2.0 * pi * t);
    if (shape == "cos2pi") return std::cos(2.0 * pi * t);
    if (shape == "u_shape") return (2.0 * t - 1.0) * (2.0 * t - 1.0) - 1.0 / 3.0;
    if (shape == "bump") return std::exp(-((t - 0.5) / 0.15) * ((t - 0.5) / 0.15));
    if (shape == "exp_decay") return std::exp(-3.0 * t);
    throw DataError(fmt::format("unknown shape '{}'", shape));
}

void Scenario::validate() const {
    if (n_subjects == 0 || n_items == 0 || series_length == 0)
        throw DataError("scenario: n_subjects, n_items and series_length must be positive");
    if (layout == Layout::subject_series && series_length < 2) throw DataError("scenario: series_length must be >= 2");
    for (double s : {subject_curve_scale, item_curve_scale, subject_intercept_sd, item_intercept_sd, interaction_sd,
                     noise_sd})
        if (!(s >= 0.0)) throw DataError("scenario: scales must be nonnegative");
    if (!(ar_rho >= 0.0 && ar_rho < 1.0)) throw DataError(fmt::format("scenario: ar_rho must lie in [0, 1), got {}", ar_rho));
    if (subject_curve_scale > 0.0 && subject_curve_k < 4) throw DataError("scenario: subject_curve_k must be >= 4");
    if (item_curve_scale > 0.0 && item_curve_k < 4) throw DataError("scenario: item_curve_k must be >= 4");
    for (const auto& f : fixed_smooths) {
        if (f.covariate != time_covariate && (!item_covariate || f.covariate != *item_covariate))
            throw DataError(fmt::format("scenario: fixed smooth covariate '{}' is neither the time nor the item covariate",
                                        f.covariate));
        (void)shape_value(f.shape, 0.5);
    }
    for (const auto* g : {&item_group, &subject_group}) {
        if (!*g) continue;
        if ((*g)->levels < 2) throw DataError("scenario: groups need at least 2 levels");
        (void)shape_value((*g)->effect_shape, 0.5);
    }
    if (interaction_sd > 0.0 && !subject_group) throw DataError("scenario: interaction_sd requires a subject_group");
}

namespace {

std::string layout_name(Layout l) { return l == Layout::subject_series ? "subject_series" : "event_series"; }

GroupSpec group_from_json(const nlohmann::json& j, const std::string& attach) {
    GroupSpec g;
    g.attach = attach;
    g.name = j.value("name", g.name);
    g.levels = j.value("levels", g.levels);
    g.ordered = j.value("ordered", g.ordered);
    g.effect_shape = j.value("effect_shape", g.effect_shape);
    g.effect_amplitude = j.value("effect_amplitude", g.effect_amplitude);
    return g;
}

nlohmann::json group_to_json(const GroupSpec& g) {
    return {{"name", g.name},
            {"levels", g.levels},
            {"ordered", g.ordered},
            {"effect_shape", g.effect_shape},
            {"effect_amplitude", g.effect_amplitude}};
}

std::vector<std::string> level_names(const std::string& prefix, std::size_t n) {
    const int width = static_cast<int>(std::to_string(n).size());
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(fmt::format("{}{:0{}}", prefix, i + 1, width));
    return out;
}

std::vector<std::string> group_level_names(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(i < 26 ? std::string(1, static_cast<char>('A' + i)) : fmt::format("G{}", i + 1));
    return out;
}

}  // namespace

Scenario scenario_from_json(const nlohmann::json& j) {
    try {
        if (!j.is_object()) throw DataError("scenario JSON must be an object");
        Scenario s;
        s.name = j.value("name", s.name);
        s.seed = j.value("seed", s.seed);
        const std::string layout = j.value("layout", std::string("subject_series"));
        if (layout == "subject_series") s.layout = Layout::subject_series;
        else if (layout == "event_series") s.layout = Layout::event_series;
        else throw DataError(fmt::format("scenario: unknown layout '{}'", layout));
        s.n_subjects = j.value("n_subjects", s.n_subjects);
        s.n_items = j.value("n_items", s.n_items);
        s.series_length = j.value("series_length", s.series_length);
        s.response = j.value("response", s.response);
        s.subject_factor = j.value("subject_factor", s.subject_factor);
        s.item_factor = j.value("item_factor", s.item_factor);
        s.time_covariate = j.value("time_covariate", s.time_covariate);
        s.normalized_time = j.value("normalized_time", s.normalized_time);
        if (j.contains("item_covariate") && !j["item_covariate"].is_null())
            s.item_covariate = j["item_covariate"].get<std::string>();
        if (j.contains("fixed_smooths")) {
            for (const auto& f : j.at("fixed_smooths"))
                s.fixed_smooths.push_back({f.at("covariate").get<std::string>(), f.at("shape").get<std::string>(),
                                           f.value("amplitude", 1.0)});
        }
        if (j.contains("item_group") && !j["item_group"].is_null()) s.item_group = group_from_json(j["item_group"], "item");
        if (j.contains("subject_group") && !j["subject_group"].is_null())
            s.subject_group = group_from_json(j["subject_group"], "subject");
        s.subject_curve_scale = j.value("subject_curve_scale", s.subject_curve_scale);
        s.subject_curve_k = j.value("subject_curve_k", s.subject_curve_k);
        s.item_curve_scale = j.value("item_curve_scale", s.item_curve_scale);
        s.item_curve_k = j.value("item_curve_k", s.item_curve_k);
        s.subject_intercept_sd = j.value("subject_intercept_sd", s.subject_intercept_sd);
        s.item_intercept_sd = j.value("item_intercept_sd", s.item_intercept_sd);
        s.interaction_sd = j.value("interaction_sd", s.interaction_sd);
        s.ar_rho = j.value("ar_rho", s.ar_rho);
        s.noise_sd = j.value("noise_sd", s.noise_sd);
        s.start_column = j.value("start_column", s.start_column);
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("scenario JSON: {}", e.what()));
    }
}

nlohmann::json scenario_to_json(const Scenario& s) {
    nlohmann::json j = {{"name", s.name},
                        {"seed", s.seed},
                        {"layout", layout_name(s.layout)},
                        {"n_subjects", s.n_subjects},
                        {"n_items", s.n_items},
                        {"series_length", s.series_length},
                        {"response", s.response},
                        {"subject_factor", s.subject_factor},
                        {"item_factor", s.item_factor},
                        {"time_covariate", s.time_covariate},
                        {"normalized_time", s.normalized_time},
                        {"subject_curve_scale", s.subject_curve_scale},
                        {"subject_curve_k", s.subject_curve_k},
                        {"item_curve_scale", s.item_curve_scale},
                        {"item_curve_k", s.item_curve_k},
                        {"subject_intercept_sd", s.subject_intercept_sd},
                        {"item_intercept_sd", s.item_intercept_sd},
                        {"interaction_sd", s.interaction_sd},
                        {"ar_rho", s.ar_rho},
                        {"noise_sd", s.noise_sd},
                        {"start_column", s.start_column}};
    j["item_covariate"] = s.item_covariate ? nlohmann::json(*s.item_covariate) : nlohmann::json(nullptr);
    j["fixed_smooths"] = nlohmann::json::array();
    for (const auto& f : s.fixed_smooths)
        j["fixed_smooths"].push_back({{"covariate", f.covariate}, {"shape", f.shape}, {"amplitude", f.amplitude}});
    j["item_group"] = s.item_group ? group_to_json(*s.item_group) : nlohmann::json(nullptr);
    j["subject_group"] = s.subject_group ? group_to_json(*s.subject_group) : nlohmann::json(nullptr);
    return j;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("cannot open scenario file '{}'", path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("malformed scenario JSON '{}': {}", path.string(), e.what()));
    }
    return scenario_from_json(j);
}

Scenario naming_scenario(std::uint64_t seed) {
    Scenario s;
    s.name = "naming";
    s.seed = seed;
    s.layout = Layout::subject_series;
    s.n_subjects = 20;
    s.n_items = 100;
    s.series_length = 150;
    s.response = "RT";
    s.subject_factor = "Subject";
    s.item_factor = "Word";
    s.time_covariate = "Trial";
    s.item_covariate = "Frequency";
    s.fixed_smooths = {{"Frequency", "u_shape", 1.0}};
    s.subject_curve_scale = 1.0;
    s.subject_curve_k = 6;
    s.subject_intercept_sd = 0.3;
    s.item_intercept_sd = 0.2;
    s.ar_rho = 0.3;
    s.noise_sd = 0.5;
    return s;
}

Scenario pitch_scenario(std::uint64_t seed) {
    Scenario s;
    s.name = "pitch";
    s.seed = seed;
    s.layout = Layout::event_series;
    s.n_subjects = 12;
    s.n_items = 40;
    s.series_length = 100;
    s.response = "Pitch";
    s.subject_factor = "Speaker";
    s.item_factor = "Compound";
    s.time_covariate = "Time";
    s.normalized_time = true;
    s.fixed_smooths = {{"Time", "bump", 1.0}};
    s.item_group = GroupSpec{"Branching", 4, "item", true, "zero", 0.0};
    s.subject_group = GroupSpec{"Sex", 2, "subject", false, "offset", 0.5};
    s.subject_curve_scale = 0.3;
    s.item_curve_scale = 0.1;
    s.subject_intercept_sd = 0.3;
    s.item_intercept_sd = 0.1;
    s.interaction_sd = 0.2;
    s.ar_rho = 0.98;
    s.noise_sd = 0.05;
    return s;
}

Scenario eeg_scenario(std::uint64_t seed) {
    Scenario s;
    s.name = "eeg";
    s.seed = seed;
    s.layout = Layout::event_series;
    s.n_subjects = 10;
    s.n_items = 30;
    s.series_length = 50;
    s.response = "Amplitude";
    s.subject_factor = "Subject";
    s.item_factor = "Word";
    s.time_covariate = "Time";
    s.normalized_time = true;
    s.item_covariate = "Frequency";
    s.fixed_smooths = {{"Time", "sin2pi", 1.0}, {"Frequency", "linear", 0.5}};
    s.subject_curve_scale = 0.3;
    s.subject_intercept_sd = 0.2;
    s.item_intercept_sd = 0.2;
    s.ar_rho = 0.8;
    s.noise_sd = 0.5;
    return s;
}

nlohmann::json GroundTruth::to_json() const {
    nlohmann::json j;
    j["scenario"] = scenario_to_json(scenario);
    j["item_covariate"] = item_covariate;
    j["item_group"] = item_group;
    j["subject_group"] = subject_group;
    j["subject_intercepts"] = subject_intercepts;
    j["item_intercepts"] = item_intercepts;
    j["interaction"] = interaction;
    auto curves = [](const std::optional<RandomCurves>& c) {
        if (!c) return nlohmann::json(nullptr);
        return nlohmann::json{{"k", c->k()}, {"basis", "uniform cubic B-spline on [0,1]"},
                              {"coefficients", c->coefficients()}};
    };
    j["subject_curves"] = curves(subject_curves);
    j["item_curves"] = curves(item_curves);
    j["mu"] = mu;
    j["noise"] = noise;
    return j;
}

Simulation generate(const Scenario& sc) {
    sc.validate();
    const std::uint64_t seed = sc.seed;
    const std::size_t S = sc.n_subjects, I = sc.n_items, L = sc.series_length;
    const bool events = sc.layout == Layout::event_series;

    GroundTruth truth;
    truth.scenario = sc;

    if (sc.item_covariate) {
        truth.item_covariate.resize(I);
        for (std::size_t i = 0; i < I; ++i) truth.item_covariate[i] = Rng::stream(seed, stream_id(Stream::item_covariate, i)).uniform();
    }
    if (sc.item_group) {
        truth.item_group.resize(I);
        for (std::size_t i = 0; i < I; ++i) truth.item_group[i] = static_cast<int>(i % sc.item_group->levels);
    }
    if (sc.subject_group) {
        truth.subject_group.resize(S);
        for (std::size_t s = 0; s < S; ++s) truth.subject_group[s] = static_cast<int>(s % sc.subject_group->levels);
    }
    truth.subject_intercepts.resize(S);
    for (std::size_t s = 0; s < S; ++s)
        truth.subject_intercepts[s] = sc.subject_intercept_sd * Rng::stream(seed, stream_id(Stream::subject_intercept, s)).normal();
    truth.item_intercepts.resize(I);
    for (std::size_t i = 0; i < I; ++i)
        truth.item_intercepts[i] = sc.item_intercept_sd * Rng::stream(seed, stream_id(Stream::item_intercept, i)).normal();
    if (sc.subject_group) {
        truth.interaction.assign(I, std::vector<double>(sc.subject_group->levels, 0.0));
        for (std::size_t i = 0; i < I; ++i)
            for (std::size_t g = 0; g < sc.subject_group->levels; ++g)
                truth.interaction[i][g] = sc.interaction_sd * Rng::stream(seed, stream_id(Stream::interaction, i, g)).normal();
    }
    if (sc.subject_curve_scale > 0.0)
        truth.subject_curves = simulate_random_curves(S, sc.subject_curve_k, sc.subject_curve_scale, seed, Stream::subject_curve);
    if (sc.item_curve_scale > 0.0)
        truth.item_curves = simulate_random_curves(I, sc.item_curve_k, sc.item_curve_scale, seed, Stream::item_curve);

    const std::size_t n = events ? S * I * L : S * L;
    std::vector<double> y, time, icov, mu, noise;
    std::vector<int> subj, item, igroup, sgroup;
    std::vector<bool> start;
    y.reserve(n);

    auto emit_series = [&](std::size_t s, const std::vector<std::size_t>& items, Rng& noise_rng) {
        const auto e = simulate_ar1(L, sc.ar_rho, sc.noise_sd > 0.0 ? sc.noise_sd : 1.0, noise_rng);
        for (std::size_t t = 0; t < L; ++t) {
            const std::size_t i = items[t];
            const double tn = L > 1 ? static_cast<double>(t) / static_cast<double>(L - 1) : 0.0;
            double m = truth.subject_intercepts[s] + truth.item_intercepts[i];
            for (const auto& f : sc.fixed_smooths) {
                const double v = f.covariate == sc.time_covariate ? tn : truth.item_covariate[i];
                m += f.amplitude * shape_value(f.shape, v);
            }
            if (sc.item_group && truth.item_group[i] > 0)
                m += sc.item_group->effect_amplitude * shape_value(sc.item_group->effect_shape, tn);
            if (sc.subject_group) {
                const int g = truth.subject_group[s];
                if (g > 0) m += sc.subject_group->effect_amplitude * shape_value(sc.subject_group->effect_shape, tn);
                m += truth.interaction[i][static_cast<std::size_t>(g)];
            }
            if (truth.subject_curves) m += (*truth.subject_curves)(s, tn);
            if (truth.item_curves) m += (*truth.item_curves)(i, tn);
            const double err = sc.noise_sd > 0.0 ? e[t] : 0.0;
            mu.push_back(m);
            noise.push_back(err);
            y.push_back(m + err);
            time.push_back(sc.normalized_time ? tn : static_cast<double>(t + 1));
            if (sc.item_covariate) icov.push_back(truth.item_covariate[i]);
            subj.push_back(static_cast<int>(s));
            item.push_back(static_cast<int>(i));
            if (sc.item_group) igroup.push_back(truth.item_group[i]);
            if (sc.subject_group) sgroup.push_back(truth.subject_group[s]);
            start.push_back(t == 0);
        }
    };

    for (std::size_t s = 0; s < S; ++s) {
        if (events) {
            for (std::size_t i = 0; i < I; ++i) {
                Rng noise_rng = Rng::stream(seed, stream_id(Stream::noise, s, i));
                emit_series(s, std::vector<std::size_t>(L, i), noise_rng);
            }
        } else {
            // Each subject sees the items in its own random order, cycling when L > I.
            std::vector<std::size_t> order(I);
            for (std::size_t i = 0; i < I; ++i) order[i] = i;
            Rng order_rng = Rng::stream(seed, stream_id(Stream::order, s));
            for (std::size_t i = I; i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
            std::vector<std::size_t> items(L);
            for (std::size_t t = 0; t < L; ++t) items[t] = order[t % I];
            Rng noise_rng = Rng::stream(seed, stream_id(Stream::noise, s));
            emit_series(s, items, noise_rng);
        }
    }

    std::vector<data::Column> cols;
    cols.push_back(data::Column::make_numeric(sc.response, y));
    cols.push_back(data::Column::make_factor(sc.subject_factor, subj, level_names("S", S)));
    cols.push_back(data::Column::make_factor(sc.item_factor, item, level_names("I", I)));
    cols.push_back(data::Column::make_numeric(sc.time_covariate, time));
    if (sc.item_covariate) cols.push_back(data::Column::make_numeric(*sc.item_covariate, icov));
    if (sc.item_group)
        cols.push_back(data::Column::make_factor(sc.item_group->name, igroup, group_level_names(sc.item_group->levels),
                                                 sc.item_group->ordered));
    if (sc.subject_group)
        cols.push_back(data::Column::make_factor(sc.subject_group->name, sgroup,
                                                 group_level_names(sc.subject_group->levels), sc.subject_group->ordered));
    cols.push_back(data::Column::make_boolean(sc.start_column, start));

    truth.mu = std::move(mu);
    truth.noise = std::move(noise);
    return {data::Dataset(std::move(cols)), std::move(truth)};
}

}  // namespace gammkit::simlab
