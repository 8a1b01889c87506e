#pragma once

#include "slelab/constants.hpp"
#include "slelab/loewner.hpp"
#include "slelab/sampling.hpp"
#include "slelab/stats.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace slelab {

/// Angle process of the conditioned curve in radial time, thetas[k] = Theta(k dt).
struct ThetaPath {
    double dt_radial = 0.0;
    std::vector<double> thetas;
};

/// Euler-Maruyama for dTheta = 2a cot(Theta) dt + dW. A step that would leave
/// (0, pi), or one with |cot Theta| dt > 0.1, is split along a Brownian bridge
/// (at most 20 times); a step that still leaves raises NumericalError.
[[nodiscard]] ThetaPath sample_theta(const SleParams& params, double theta0, double t_total, double dt,
                                     std::uint64_t key);

/// Stationary samples of the angle process: `chains` independent chains from
/// pi/2, each burned in for `burn_in` and then read every `spacing` time units.
[[nodiscard]] std::vector<double> theta_equilibrium_samples(const SleParams& params, std::size_t chains,
                                                            std::size_t per_chain, double burn_in,
                                                            double spacing, double dt, std::uint64_t seed);

/// State of the z-mark at the first time its upsilon dropped to a requested level.
struct LevelHit {
    double level = 0.0;
    bool reached = false;
    MarkedPoint state{};
    std::size_t path_index = 0;  // number of recorded sub-steps at that time
};

struct TwoSidedRun {
    enum class Terminal { cutoff, z_swallowed, step_limit };

    complex target{};
    DrivingPath driving;             // filled when options.flow.record_path is set
    std::vector<MarkedPoint> marks;  // marks[0] is z, then the auxiliary points in order
    double weight_log = 0.0;
    Terminal terminal = Terminal::cutoff;
    double t = 0.0;
    std::size_t steps = 0;
    std::vector<LevelHit> levels;

    [[nodiscard]] bool ok() const noexcept { return terminal == Terminal::cutoff; }
};

/// Chordal SLE tilted by the Green's martingale of z, run in capacity time
/// until upsilon(z) <= eps_cutoff. Auxiliary marks ride along passively.
/// `levels` (each above eps_cutoff) are optional intermediate radii.
[[nodiscard]] TwoSidedRun sample_two_sided(const SleParams& params, complex z, double eps_cutoff,
                                           std::span<const complex> aux, std::uint64_t key,
                                           const SamplingOptions& options = {},
                                           std::span<const double> levels = {});

/// Chordal run of a single mark toward upsilon <= eps, stopped there, at
/// capture, or once upsilon has stabilised at a long horizon.
struct ChordalCutoffRun {
    bool reached = false;
    MarkedPoint state{};  // z-mark at the stopping time
    std::vector<LevelHit> levels;
    double t = 0.0;
    std::size_t steps = 0;
};

[[nodiscard]] ChordalCutoffRun sample_chordal_cutoff(const SleParams& params, complex z, double eps,
                                                     std::uint64_t key, const SamplingOptions& options = {},
                                                     std::span<const double> levels = {});

/// eps^{d-2} S^beta / G(z0): density of the conditioned measure with respect
/// to chordal SLE on the event that upsilon(z) reaches eps.
[[nodiscard]] double rn_weight(const MarkedPoint& mark_z, double eps, const SleParams& params);

/// E*[ G_{H_t}(w) ] at the time upsilon(z) first drops to eps_cutoff, i.e. the
/// Green's function of w in the domain left over once the curve has reached z.
/// Throws NumericalError if more than 1% of the runs lose z before the cutoff.
[[nodiscard]] McEstimate estimate_inner_green(const SleParams& params, complex z, complex w, double eps_cutoff,
                                              std::size_t n_samples, std::uint64_t seed,
                                              const SamplingOptions& options = {});

}  // namespace slelab
