#pragma once

// Subcommand implementations behind the `duo` executable. Each returns the
// process exit code: 0 success, 1 input error, 2 internal invariant violation.

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "duo/aggregate.hpp"
#include "duo/metrics.hpp"
#include "duo/report.hpp"

namespace duo {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kInputError = 1;
inline constexpr int kInternalError = 2;
}  // namespace exit_code

/// Runs `body`, mapping exceptions to exit codes and printing them to `err`.
int run_guarded(const std::function<void()>& body, std::ostream& err);

struct OutputOptions {
    ReportFormat format = ReportFormat::Csv;
    /// Written to this file when set, otherwise to the command's stdout stream.
    std::optional<std::filesystem::path> out;
};

int cmd_validate(const std::filesystem::path& bundle_dir, std::ostream& out, std::ostream& err);

struct TuneArgs {
    std::filesystem::path large_val;
    /// Without a sidekick, fits single-model temperature scaling instead.
    std::optional<std::filesystem::path> small_val;
    std::optional<std::filesystem::path> out;
};

int cmd_tune(const TuneArgs& args, std::ostream& out, std::ostream& err);

struct EvalArgs {
    std::filesystem::path large;
    std::optional<std::filesystem::path> small;
    std::string mode = "weighted";
    std::optional<DuoWeights> weights;
    /// tune output JSON; supplies weights (or scale, for mode single).
    std::optional<std::filesystem::path> weights_file;
    double scale = 1.0;
    EvalOptions eval;
    OutputOptions output;
};

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);

struct SweepConfig {
    std::filesystem::path large_val;
    std::filesystem::path large_test;
    /// (val, test) bundle directories per sidekick.
    std::vector<std::pair<std::filesystem::path, std::filesystem::path>> smalls;
    std::vector<std::string> modes{"weighted", "unweighted", "uq_only"};
    EvalOptions eval;
    OutputOptions output;
    int jobs = 1;
};

/// Tunes each sidekick on val, evaluates every mode on test, and emits the
/// rows sorted by balance, led by the temperature-scaled single large model.
std::vector<MetricRow> run_sweep(const SweepConfig& config);
int cmd_sweep(const SweepConfig& config, std::ostream& out, std::ostream& err);

int cmd_simulate(const std::filesystem::path& spec_file, const std::filesystem::path& out_dir, std::ostream& out,
                 std::ostream& err);

}  // namespace duo
