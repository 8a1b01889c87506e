#pragma once

#include "slelab/stats.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace slelab {

/// Command line or config file that could not be understood.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr const char* kExperiments[] = {
    "c-star",      "invariant-density",    "one-point",          "rn-consistency", "inner-green",
    "two-point-direct", "two-point-factorized", "two-point-crossval", "beffara-scan",   "pde-residual"};

/// Everything a run needs. Config files hold the same keys as the flags,
/// one `key = value` per line, with sequences written as [a, b, ...].
struct ExperimentConfig {
    std::string experiment;
    double kappa = 8.0 / 3.0;
    std::vector<double> z{0.0, 1.0};  // (re, im)
    std::vector<double> w{2.0, 1.0};
    std::vector<double> r_ladder{0.2, 0.1, 0.05};
    std::vector<double> eps_ladder{0.2, 0.1, 0.05};
    std::vector<double> delta_ladder{0.2, 0.1, 0.05};
    /// beffara-scan: when non-empty, scan |z - w| over w = z + s instead of the ladders.
    std::vector<double> separations;
    double eps = 0.1;
    double delta = 0.1;
    double eps_cutoff = 1e-3;
    std::size_t n_samples = 10000;
    std::size_t n_two_sided = 10000;
    double dt0 = 0.01;  // step as a fraction of |Z|^2
    std::uint64_t seed = 1;
    unsigned workers = 1;
    std::size_t clones = 8;
    double horizon_factor = 1e7;
    // pde-residual
    double x = 0.3;
    double y = 1.0;
    double h = 1e-3;
    // invariant-density
    std::size_t chains = 10;
    double burn_in = 20.0;
    double spacing = 1.0;
    double theta_dt = 1e-3;
    /// Output prefix: <output>.json and, for scans, <output>.csv. Empty prints JSON to stdout.
    std::string output;

    bool operator==(const ExperimentConfig&) const = default;
};

/// Parses argv (without the program name). Values from --config are read
/// first and flags override them. SLELAB_SEED supplies the seed when neither
/// sets it. Throws ConfigError; --help throws HelpRequested.
[[nodiscard]] ExperimentConfig parse_args(const std::vector<std::string>& args);

struct HelpRequested {
    std::string text;
};

/// Config file text that parses back to `cfg`.
[[nodiscard]] std::string config_to_str(const ExperimentConfig& cfg);

/// Experiment preconditions; throws DomainError naming the offending field.
void validate(const ExperimentConfig& cfg);

struct RunOutput {
    nlohmann::json summary;
    std::vector<std::pair<std::string, ScanResult>> tables;  // (file suffix, data)
};

/// Runs a validated config.
[[nodiscard]] RunOutput run_experiment(const ExperimentConfig& cfg);

/// Validates, runs and writes the outputs. Returns the exit status:
/// 0 success, 2 bad configuration or domain, 3 numerical failure, 4 I/O.
int run(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);

/// CSV with a `#` header naming the axis and the reference curve, then
/// columns axis, p_hat, stderr[, reference]. Throws on an empty result.
void emit_plot_data(const ScanResult& result, std::ostream& out);
void emit_plot_data(const ScanResult& result, const std::string& path);

int main_entry(int argc, char** argv);

}  // namespace slelab
