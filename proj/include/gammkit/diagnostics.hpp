#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gammkit/dataset.hpp"
#include "gammkit/engine.hpp"
#include "gammkit/formula.hpp"

namespace gammkit::diagnostics {

struct AcfResult {
    std::string series;  // series id, or "pooled"
    std::vector<double> acf;  // lags 0..L
    std::size_t n = 0;
    double ci_bound = 0.0;  // 1.96 / sqrt(n)
    std::vector<bool> significant;  // lag 0 is never significant

    [[nodiscard]] std::size_t max_lag() const { return acf.empty() ? 0 : acf.size() - 1; }
    [[nodiscard]] std::size_t significant_count() const;
};

// Single-mean, biased-denominator sample ACF. Throws DataError on zero variance or L >= n.
[[nodiscard]] AcfResult acf(std::span<const double> x, std::size_t max_lag);

struct SeriesAcf {
    std::vector<AcfResult> series;
    AcfResult pooled;
    std::vector<std::string> notices;  // skipped series
    std::vector<int> series_ids;       // index into the SeriesIndex for each entry of `series`
};

// Per-series ACFs plus a pooled ACF: lag products and squares (each series about its own mean) are
// summed over series before normalizing. Series not longer than L, or with zero variance, are skipped.
[[nodiscard]] SeriesAcf acf_by_series(std::span<const double> residuals, const data::SeriesIndex& series,
                                      std::size_t max_lag);

// Columns series, lag, acf, ci, significant; pooled rows last with series "pooled".
[[nodiscard]] std::string acf_to_csv(const SeriesAcf& result);
[[nodiscard]] nlohmann::json acf_to_json(const SeriesAcf& result);

struct RhoSuggestion {
    double rho = 0.0;
    double raw_lag1 = 0.0;
    std::optional<std::string> notice;
};

// Pooled lag-1 ACF of raw residuals, clipped to [0, 0.99].
[[nodiscard]] RhoSuggestion suggest_rho(std::span<const double> raw_residuals, const data::SeriesIndex& series);
[[nodiscard]] RhoSuggestion suggest_rho(const engine::FittedGamm& model);

struct RhoCandidate {
    double rho = 0.0;
    bool fitted = false;
    std::optional<std::string> error;
    double pooled_lag1 = 0.0;
    std::size_t persistent = 0;  // series with any significant lag in 1..L
    std::size_t artifact = 0;    // series with a significant negative lag 1
    std::size_t n_series = 0;
    double reml_score = 0.0;
};

struct RhoReport {
    std::size_t max_lag = 0;
    std::vector<RhoCandidate> candidates;
    std::optional<double> recommended;

    [[nodiscard]] nlohmann::json to_json() const;
};

struct SweepOptions {
    std::size_t max_lag = 10;
    engine::FitOptions fit;
    unsigned threads = 1;
};

// Scores whitened-residual ACFs of an already fitted model.
[[nodiscard]] RhoCandidate assess(const engine::FittedGamm& model, std::size_t max_lag);

// Refits `spec` (its rho replaced) at every candidate. Recommends the smallest candidate
// minimizing persistent + artifact counts. Candidates outside [0, 1) throw DataError; fit errors
// skip the candidate.
[[nodiscard]] RhoReport rho_sweep(const formula::ModelSpec& spec, const data::Dataset& data,
                                  const std::vector<double>& candidates, const SweepOptions& options = {});

// Row mask that drops every series with at least ceil(0.2 L) significant lags.
[[nodiscard]] std::vector<bool> persistent_event_filter(const SeriesAcf& acfs, const data::SeriesIndex& series);
[[nodiscard]] std::vector<bool> persistent_event_filter(const engine::FittedGamm& model, std::size_t max_lag);

}  // namespace gammkit::diagnostics
