#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gammkit/dataset.hpp"

namespace gammkit::simlab {

// Portable seeded generator: std::mt19937_64 (its output sequence is fixed by the C++
// standard) with uniforms built from the top 53 bits and normals by the Box-Muller transform,
// so fixtures are reproducible across platforms and languages.
//
// Stream splitting: the engine for stream s under master seed m is seeded with
// splitmix64(m ^ splitmix64(s)). Stream ids are composed by stream_id().
class Rng {
public:
    explicit Rng(std::uint64_t seed);
    static Rng stream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t next() { return engine_(); }
    double uniform();  // [0, 1)
    double normal();   // N(0, 1)
    std::size_t below(std::size_t n);

private:
    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

[[nodiscard]] std::uint64_t splitmix64(std::uint64_t x);

// Stream purposes; combined with up to two indices (subject, item) into a 64-bit id.
enum class Stream : std::uint64_t {
    noise = 1,
    subject_curve = 2,
    item_curve = 3,
    item_intercept = 4,
    subject_intercept = 5,
    interaction = 6,
    item_covariate = 7,
    order = 8,
    generic = 9,
};

[[nodiscard]] std::uint64_t stream_id(Stream purpose, std::uint64_t a = 0, std::uint64_t b = 0);

// AR(1) errors: e_0 from the stationary N(0, sd^2 / (1 - rho^2)), then e_t = rho e_{t-1} + eps_t.
[[nodiscard]] std::vector<double> simulate_ar1(std::size_t n, double rho, double sd, std::uint64_t seed);
[[nodiscard]] std::vector<double> simulate_ar1(std::size_t n, double rho, double sd, Rng& rng);

// Cubic B-spline curves on [0, 1] with k basis functions (equally spaced knots) and per-level
// coefficients drawn i.i.d. N(0, scale^2).
class RandomCurves {
public:
    RandomCurves(std::size_t k, std::vector<std::vector<double>> coefficients);

    [[nodiscard]] std::size_t n_levels() const noexcept { return coef_.size(); }
    [[nodiscard]] std::size_t k() const noexcept { return k_; }
    [[nodiscard]] const std::vector<std::vector<double>>& coefficients() const noexcept { return coef_; }
    [[nodiscard]] double operator()(std::size_t level, double t) const;
    [[nodiscard]] static std::vector<double> basis(std::size_t k, double t);

private:
    std::size_t k_;
    std::vector<std::vector<double>> coef_;
};

[[nodiscard]] RandomCurves simulate_random_curves(std::size_t n_levels, std::size_t k, double scale,
                                                  std::uint64_t seed, Stream purpose = Stream::subject_curve);

// Named shapes over [0, 1]: zero, offset, linear, sin2pi, cos2pi, u_shape, bump, exp_decay.
[[nodiscard]] double shape_value(const std::string& shape, double t);

struct FixedSmooth {
    std::string covariate;  // the time covariate or the item covariate name
    std::string shape;
    double amplitude = 1.0;
};

struct GroupSpec {
    std::string name = "Group";
    std::size_t levels = 2;
    std::string attach = "item";  // "item" or "subject"
    bool ordered = true;
    // Added (as a function of normalized time) for every non-reference level.
    std::string effect_shape = "zero";
    double effect_amplitude = 0.0;
};

enum class Layout { subject_series, event_series };

struct Scenario {
    std::string name = "custom";
    std::uint64_t seed = 1;
    Layout layout = Layout::subject_series;
    std::size_t n_subjects = 1;
    std::size_t n_items = 1;
    std::size_t series_length = 100;
    std::string response = "y";
    std::string subject_factor = "Subject";
    std::string item_factor = "Item";
    std::string time_covariate = "Time";
    // Trial index 1..L (false) or normalized time in [0, 1] (true).
    bool normalized_time = false;
    std::optional<std::string> item_covariate;
    std::vector<FixedSmooth> fixed_smooths;
    std::optional<GroupSpec> item_group;
    std::optional<GroupSpec> subject_group;
    double subject_curve_scale = 0.0;
    std::size_t subject_curve_k = 6;
    double item_curve_scale = 0.0;
    std::size_t item_curve_k = 6;
    double subject_intercept_sd = 0.0;
    double item_intercept_sd = 0.0;
    // Item x subject-group effects (e.g. compound by sex).
    double interaction_sd = 0.0;
    double ar_rho = 0.0;
    double noise_sd = 1.0;
    std::string start_column = "NewTimeSeries";

    // Scales must be nonnegative, 0 <= ar_rho < 1, counts positive. Throws DataError.
    void validate() const;
};

[[nodiscard]] Scenario scenario_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json scenario_to_json(const Scenario& s);
[[nodiscard]] Scenario load_scenario(const std::filesystem::path& path);

// Built-in scenarios: word naming, compound pitch contours, EEG amplitudes.
[[nodiscard]] Scenario naming_scenario(std::uint64_t seed = 1);
[[nodiscard]] Scenario pitch_scenario(std::uint64_t seed = 1);
[[nodiscard]] Scenario eeg_scenario(std::uint64_t seed = 1);

struct GroundTruth {
    Scenario scenario;
    std::vector<double> item_covariate;            // per item
    std::vector<int> item_group;                   // per item level code (if any)
    std::vector<int> subject_group;                // per subject level code (if any)
    std::vector<double> subject_intercepts;
    std::vector<double> item_intercepts;
    std::vector<std::vector<double>> interaction;  // [item][subject group level]
    std::optional<RandomCurves> subject_curves;
    std::optional<RandomCurves> item_curves;
    std::vector<double> mu;                        // noiseless response per row
    std::vector<double> noise;                     // AR(1) error per row

    [[nodiscard]] nlohmann::json to_json() const;
};

struct Simulation {
    data::Dataset data;
    GroundTruth truth;
};

[[nodiscard]] Simulation generate(const Scenario& scenario);

}  // namespace gammkit::simlab
