#pragma once

#include "slelab/constants.hpp"
#include "slelab/loewner.hpp"
#include "slelab/sampling.hpp"
#include "slelab/stats.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace slelab {

/// P{upsilon_inf(z) <= r upsilon_0(z)} for each r of a strictly decreasing
/// ladder in (0, 3/4], all from the same chordal paths. The reference column is
/// c_* r^{2-d} S_0^beta. meta["horizon_drift"] compares the estimate with the
/// one read off at horizon/64; a difference above one stderr adds a warning.
[[nodiscard]] ScanResult one_point_limit(const SleParams& params, complex z, std::span<const double> r_ladder,
                                         std::size_t n, std::uint64_t seed, const SamplingOptions& options = {});

/// eps^{d-2} delta^{d-2} P{xi < chi < infinity}, where xi and chi are the first
/// times upsilon(z) <= eps and upsilon(w) <= delta. A path that reaches xi is
/// continued by options.clones independent copies, each weighted 1/clones.
/// successes counts the copies that reach chi.
[[nodiscard]] McEstimate two_point_direct(const SleParams& params, complex z, complex w, double eps, double delta,
                                          std::size_t n, std::uint64_t seed, const SamplingOptions& options = {});

/// c_*^2 G(z) E*[G_{H_T}(w)], with the conditioned expectation from
/// estimate_inner_green at the given cutoff.
[[nodiscard]] McEstimate two_point_factorized(const SleParams& params, complex z, complex w, double eps_cutoff,
                                              std::size_t n, std::uint64_t seed,
                                              const SamplingOptions& options = {});

struct CrossValidation {
    McEstimate direct;
    McEstimate factorized;
    double difference = 0.0;       // |direct - factorized|
    double combined_stderr = 0.0;  // sqrt of the summed variances
    double tolerance = 0.0;        // 3 combined_stderr + cushion * factorized
    bool agrees = false;
};

[[nodiscard]] CrossValidation cross_validate(const McEstimate& direct, const McEstimate& factorized,
                                             double cushion = 0.15);

[[nodiscard]] nlohmann::json to_json(const CrossValidation& cv);

/// dist(z0, curve U R) for the curve of `path`, exact up to the sampling of
/// each slit when it is at most `relevant`, and some value above `relevant`
/// otherwise. Slit pieces seen from z0 under an angle with sine below 1e-2
/// are skipped (they lie behind closer parts of the curve).
[[nodiscard]] double curve_distance(const DrivingPath& path, const SleParams& params, complex z0, double relevant);

/// P{dist(z, gamma) <= eps_i, dist(w, gamma) <= delta_j} on the ladder grid,
/// where dist is the Euclidean distance to the curve and the real line.
struct BeffaraScan {
    std::vector<double> eps;
    std::vector<double> delta;
    std::vector<std::vector<McEstimate>> grid;  // grid[i][j]
    ScanResult eps_scan;    // delta fixed at delta[0]
    ScanResult delta_scan;  // eps fixed at eps[0]
    /// Joint weighted fit log P = c + p log eps + q log delta over the grid.
    double eps_exponent = 0.0;
    double eps_exponent_stderr = 0.0;
    double delta_exponent = 0.0;
    double delta_exponent_stderr = 0.0;
    /// max / min over the grid of P / (eps^{2-d} delta^{2-d}).
    double ratio_spread = 0.0;
    std::size_t paths_traced = 0;  // paths whose distances needed the curve itself
    nlohmann::json meta = nlohmann::json::object();
};

[[nodiscard]] BeffaraScan beffara_scan(const SleParams& params, complex z, complex w,
                                       std::span<const double> eps_ladder, std::span<const double> delta_ladder,
                                       std::size_t n, std::uint64_t seed, const SamplingOptions& options = {});

[[nodiscard]] nlohmann::json to_json(const BeffaraScan& b);

/// P{dist(z, gamma) <= eps, dist(w_k, gamma) <= delta} against |z - w_k| for
/// points at increasing distance (the axis must be strictly increasing).
[[nodiscard]] ScanResult beffara_distance_scan(const SleParams& params, complex z, std::span<const complex> ws,
                                               double eps, double delta, std::size_t n, std::uint64_t seed,
                                               const SamplingOptions& options = {});

/// Consistency of the chordal and conditioned measures at a cutoff eps.
struct RnConsistency {
    McEstimate weight_mean;           // E_chordal[rn_weight 1{rho_eps < inf}], should be 1
    McEstimate weighted_functional;   // E_chordal[rn_weight F], F = S at the intermediate radius
    McEstimate direct_functional;     // E*[F] from conditioned runs
    double intermediate_radius = 0.0; // sqrt(eps Im z)
    double ks_conditioned = 0.0;      // chordal Theta at rho_eps given rho_eps < inf vs sin/2
    double ks_reweighted = 0.0;       // conditioned Theta weighted by S^{-beta} vs sin/2
    double ks_two_sided = 0.0;        // conditioned Theta vs the invariant density
    std::size_t reached = 0;          // chordal runs with rho_eps < inf
    double reweighted_ess = 0.0;
    nlohmann::json meta = nlohmann::json::object();
};

[[nodiscard]] RnConsistency rn_consistency(const SleParams& params, complex z, double eps, std::size_t n_chordal,
                                           std::size_t n_two_sided, std::uint64_t seed,
                                           const SamplingOptions& options = {});

[[nodiscard]] nlohmann::json to_json(const RnConsistency& r);

}  // namespace slelab
