// Batch command surface: structured configuration, deterministic seeding,
// CSV/JSON result emission.  The CLI binary is a thin wrapper over
// run_command so tests can drive commands in-process.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace tklab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitVerdictFail = 2;

struct PotentialConfig {
    std::string kind = "constant";  // constant | linear | pair | dyson
    double value = 0.0;             // constant
    double beta = 1.0;              // linear (beta x1) / pair (beta x1 x2)
};

struct ShiftConfig {
    double alpha = 2.0;  // constant weight sequence
    std::size_t dim = 64;
    double p = 1.0;
};

struct Tolerances {
    double normalize = 0.02;
    double decay_exponent = -1.2;
    double breiman = 0.01;
    double support_ks = 0.02;
};

struct RunConfig {
    std::string model;  // full-shift-finite | dyson-sphere | dyson-halfline |
                        // weighted-shift | ifs
    double eps = 3.0;
    int sphere_dim = 2;
    std::size_t alphabet_size = 2;
    std::vector<double> weights;  // finite a priori; empty = uniform
    PotentialConfig potential;
    ShiftConfig shift;
    std::size_t depth = 64;
    std::size_t samples_k = 10000;
    std::size_t chain_n = 10000;
    std::size_t replicates = 400;
    std::size_t n_max = 16;
    std::size_t burn_in = 1000;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    Tolerances tol;
};

// Parses and validates the JSON config file; unknown keys are rejected.
// Throws std::invalid_argument with a message naming the offending key.
RunConfig load_config(const std::string& path);
RunConfig parse_config_text(const std::string& text);

struct RunSummary {
    std::string command;
    std::string config_hash;
    std::uint64_t seed = 0;
    double wall_ms = 0.0;
    std::map<std::string, bool> verdicts;
    std::vector<std::string> artifacts;
    int exit_code = kExitUsage;
};

// Executes one command; writes artifacts under cfg.out_dir and a
// summary.json.  Returns kExitOk / kExitVerdictFail; configuration errors
// throw before anything is written.
RunSummary run_command(const std::string& command, const RunConfig& cfg);

// argv-level entry used by the binary: parses
//   tool <command> --config <path> [--seed N] [--out DIR]
// honoring the TOOL_SEED environment override, and maps errors to exit 1.
int cli_main(int argc, const char* const* argv);

}  // namespace tklab::cli
