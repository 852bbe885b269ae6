#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace gammkit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 2;
inline constexpr int kExitFitError = 3;

struct RunConfig {
    std::optional<std::filesystem::path> data;
    std::optional<std::string> formula;
    double rho = 0.0;
    std::optional<std::string> ar_start;
    std::optional<std::filesystem::path> out;
    // Subset of {summary, curves, surfaces, acf, recoefs}.
    std::set<std::string> emit = {"summary", "curves", "surfaces", "acf", "recoefs"};
    int grid = 100;
    int max_lag = 10;
    std::optional<std::filesystem::path> schema;
    std::vector<double> candidates;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> scenario;
    std::optional<std::filesystem::path> residuals;
    int top = 0;

    // grid >= 2, max_lag >= 1, 0 <= rho < 1, known emit names. Throws DataError.
    void validate() const;
};

// Fields of a JSON config file (same names as the long flags, dashes as underscores).
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);

int cmd_fit(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_acf(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_rho_sweep(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream& err);

// Full command line, argv[0] included. Never throws; returns the exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Label to a file-name stem: "s(Time):Group=B" -> "s_Time_Group=B".
[[nodiscard]] std::string file_stem(const std::string& label);

}  // namespace gammkit::cli
