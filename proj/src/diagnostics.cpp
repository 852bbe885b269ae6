#include "gammkit/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include <fmt/format.h>

#include "gammkit/error.hpp"

namespace gammkit::diagnostics {

namespace {

void mark_significance(AcfResult& r) {
    r.ci_bound = 1.96 / std::sqrt(static_cast<double>(r.n));
    r.significant.assign(r.acf.size(), false);
    for (std::size_t l = 1; l < r.acf.size(); ++l) r.significant[l] = std::abs(r.acf[l]) > r.ci_bound;
}

// Lag products of x about its own mean, accumulated into num[0..L].
void accumulate(std::span<const double> x, std::vector<double>& num) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    const std::size_t L = num.size() - 1;
    for (std::size_t l = 0; l <= L && l < x.size(); ++l) {
        double s = 0.0;
        for (std::size_t t = 0; t + l < x.size(); ++t) s += (x[t] - mean) * (x[t + l] - mean);
        num[l] += s;
    }
}

}  // namespace

std::size_t AcfResult::significant_count() const {
    return static_cast<std::size_t>(std::count(significant.begin(), significant.end(), true));
}

AcfResult acf(std::span<const double> x, std::size_t max_lag) {
    if (x.size() < 2) throw DataError(fmt::format("acf needs at least 2 values, got {}", x.size()));
    if (max_lag >= x.size()) throw DataError(fmt::format("max lag {} must be below the series length {}", max_lag, x.size()));
    std::vector<double> num(max_lag + 1, 0.0);
    accumulate(x, num);
    if (!(num[0] > 0.0)) throw DataError("acf undefined for a series with zero variance");
    AcfResult r;
    r.series = "1";
    r.n = x.size();
    r.acf.resize(max_lag + 1);
    r.acf[0] = 1.0;
    for (std::size_t l = 1; l <= max_lag; ++l) r.acf[l] = num[l] / num[0];
    mark_significance(r);
    return r;
}

SeriesAcf acf_by_series(std::span<const double> residuals, const data::SeriesIndex& series, std::size_t max_lag) {
    if (residuals.size() != series.n_rows())
        throw DataError(fmt::format("series index covers {} rows, residuals have {}", series.n_rows(), residuals.size()));
    SeriesAcf out;
    std::vector<double> pooled(max_lag + 1, 0.0);
    std::size_t pooled_n = 0;
    const auto starts = series.series_starts();
    for (std::size_t s = 0; s < starts.size(); ++s) {
        const std::size_t len = series.series_lengths[s];
        const auto x = residuals.subspan(starts[s], len);
        if (len <= max_lag) {
            out.notices.push_back(fmt::format("series {} skipped: length {} <= max lag {}", s + 1, len, max_lag));
            continue;
        }
        std::vector<double> num(max_lag + 1, 0.0);
        accumulate(x, num);
        if (!(num[0] > 0.0)) {
            out.notices.push_back(fmt::format("series {} skipped: zero variance", s + 1));
            continue;
        }
        for (std::size_t l = 0; l <= max_lag; ++l) pooled[l] += num[l];
        pooled_n += len;
        AcfResult r;
        r.series = std::to_string(s + 1);
        r.n = len;
        r.acf.resize(max_lag + 1);
        r.acf[0] = 1.0;
        for (std::size_t l = 1; l <= max_lag; ++l) r.acf[l] = num[l] / num[0];
        mark_significance(r);
        out.series.push_back(std::move(r));
        out.series_ids.push_back(static_cast<int>(s));
    }
    if (out.series.empty()) throw DataError(fmt::format("no series is longer than the max lag {}", max_lag));
    out.pooled.series = "pooled";
    out.pooled.n = pooled_n;
    out.pooled.acf.resize(max_lag + 1);
    out.pooled.acf[0] = 1.0;
    for (std::size_t l = 1; l <= max_lag; ++l) out.pooled.acf[l] = pooled[l] / pooled[0];
    mark_significance(out.pooled);
    return out;
}

std::string acf_to_csv(const SeriesAcf& result) {
    std::string out = "series,lag,acf,ci,significant\n";
    auto rows = [&](const AcfResult& r) {
        for (std::size_t l = 0; l < r.acf.size(); ++l)
            out += fmt::format("{},{},{},{},{}\n", r.series, l, r.acf[l], r.ci_bound, r.significant[l] ? "TRUE" : "FALSE");
    };
    for (const auto& r : result.series) rows(r);
    rows(result.pooled);
    return out;
}

nlohmann::json acf_to_json(const SeriesAcf& result) {
    auto one = [](const AcfResult& r) {
        return nlohmann::json{{"series", r.series}, {"n", r.n}, {"ci_bound", r.ci_bound}, {"acf", r.acf},
                              {"significant", r.significant}};
    };
    nlohmann::json j;
    j["series"] = nlohmann::json::array();
    for (const auto& r : result.series) j["series"].push_back(one(r));
    j["pooled"] = one(result.pooled);
    j["notices"] = result.notices;
    return j;
}

RhoSuggestion suggest_rho(std::span<const double> raw_residuals, const data::SeriesIndex& series) {
    const SeriesAcf a = acf_by_series(raw_residuals, series, 1);
    RhoSuggestion s;
    s.raw_lag1 = a.pooled.acf[1];
    if (s.raw_lag1 < 0.0) {
        s.rho = 0.0;
        s.notice = fmt::format("pooled lag-1 autocorrelation is negative ({:.4f}); suggesting 0", s.raw_lag1);
    } else {
        s.rho = std::min(s.raw_lag1, 0.99);
    }
    return s;
}

RhoSuggestion suggest_rho(const engine::FittedGamm& model) {
    return suggest_rho(std::span<const double>(model.residuals_raw.data(), static_cast<std::size_t>(model.residuals_raw.size())),
                       model.series);
}

RhoCandidate assess(const engine::FittedGamm& model, std::size_t max_lag) {
    const SeriesAcf a = acf_by_series(
        std::span<const double>(model.residuals_whitened.data(), static_cast<std::size_t>(model.residuals_whitened.size())),
        model.series, max_lag);
    RhoCandidate c;
    c.rho = model.rho;
    c.fitted = true;
    c.pooled_lag1 = max_lag >= 1 ? a.pooled.acf[1] : 0.0;
    c.n_series = a.series.size();
    c.reml_score = model.reml_score;
    for (const auto& r : a.series) {
        if (r.significant_count() > 0) ++c.persistent;
        if (max_lag >= 1 && r.significant[1] && r.acf[1] < 0.0) ++c.artifact;
    }
    return c;
}

RhoReport rho_sweep(const formula::ModelSpec& spec, const data::Dataset& data, const std::vector<double>& candidates,
                    const SweepOptions& options) {
    if (candidates.empty()) throw DataError("rho sweep needs at least one candidate");
    if (options.max_lag < 1) throw DataError("max lag must be at least 1");
    for (double r : candidates)
        if (!(r >= 0.0 && r < 1.0)) throw DataError(fmt::format("candidate rho={} outside [0, 1)", r));
    RhoReport report;
    report.max_lag = options.max_lag;
    report.candidates.resize(candidates.size());
    auto run = [&](std::size_t i) {
        RhoCandidate& c = report.candidates[i];
        c.rho = candidates[i];
        try {
            formula::ModelSpec s = spec;
            s.rho = candidates[i];
            if (s.rho > 0.0 && !s.ar_start_column)
                throw DataError(fmt::format("rho={} needs a series start column", s.rho));
            const auto model = engine::fit(s, data, options.fit);
            c = assess(model, options.max_lag);
        } catch (const std::exception& e) {
            c.fitted = false;
            c.error = e.what();
        }
    };
    if (options.threads > 1 && candidates.size() > 1) {
        std::vector<std::future<void>> jobs;
        for (std::size_t i = 0; i < candidates.size(); ++i) jobs.push_back(std::async(std::launch::async, run, i));
        for (auto& j : jobs) j.get();
    } else {
        for (std::size_t i = 0; i < candidates.size(); ++i) run(i);
    }
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < report.candidates.size(); ++i) {
        const auto& c = report.candidates[i];
        if (!c.fitted) continue;
        const std::size_t cost = c.persistent + c.artifact;
        if (!best) {
            best = i;
            continue;
        }
        const auto& b = report.candidates[*best];
        const std::size_t best_cost = b.persistent + b.artifact;
        if (cost < best_cost || (cost == best_cost && c.rho < b.rho)) best = i;
    }
    if (best) report.recommended = report.candidates[*best].rho;
    return report;
}

nlohmann::json RhoReport::to_json() const {
    nlohmann::json j;
    j["max_lag"] = max_lag;
    j["candidates"] = nlohmann::json::array();
    for (const auto& c : candidates) {
        nlohmann::json e = {{"rho", c.rho}, {"fitted", c.fitted}};
        if (c.fitted) {
            e["pooled_lag1"] = c.pooled_lag1;
            e["persistent"] = c.persistent;
            e["artifact"] = c.artifact;
            e["n_series"] = c.n_series;
            e["reml"] = c.reml_score;
        } else {
            e["error"] = c.error.value_or("");
        }
        j["candidates"].push_back(std::move(e));
    }
    j["recommended"] = recommended ? nlohmann::json(*recommended) : nlohmann::json(nullptr);
    return j;
}

std::vector<bool> persistent_event_filter(const SeriesAcf& acfs, const data::SeriesIndex& series) {
    std::vector<bool> drop_series(series.n_series(), false);
    for (std::size_t i = 0; i < acfs.series.size(); ++i) {
        const auto& r = acfs.series[i];
        const auto threshold = static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(r.max_lag())));
        if (r.significant_count() >= std::max<std::size_t>(threshold, 1))
            drop_series[static_cast<std::size_t>(acfs.series_ids[i])] = true;
    }
    std::vector<bool> keep(series.n_rows(), true);
    for (std::size_t row = 0; row < keep.size(); ++row)
        keep[row] = !drop_series[static_cast<std::size_t>(series.series_id[row])];
    return keep;
}

std::vector<bool> persistent_event_filter(const engine::FittedGamm& model, std::size_t max_lag) {
    const auto a = acf_by_series(
        std::span<const double>(model.residuals_whitened.data(), static_cast<std::size_t>(model.residuals_whitened.size())),
        model.series, max_lag);
    return persistent_event_filter(a, model.series);
}

}  // namespace gammkit::diagnostics
