#pragma once

#include "slelab/constants.hpp"
#include "slelab/rng.hpp"

#include <complex>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace slelab {

using complex = std::complex<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Discretized driving function: step k holds the driving increment dU_k
/// (constant driving U_k on the step) and its capacity-time length dt_k.
/// Under the chordal law dU_k ~ N(0, dt_k).
struct DrivingPath {
    std::vector<double> dt;
    std::vector<double> dU;

    /// Path with a common step size.
    [[nodiscard]] static DrivingPath uniform(double step, std::vector<double> increments);
    /// n i.i.d. N(0, step) increments from the given stream.
    [[nodiscard]] static DrivingPath brownian(double step, std::size_t n, std::uint64_t key);

    [[nodiscard]] std::size_t size() const noexcept { return dt.size(); }
    [[nodiscard]] bool empty() const noexcept { return dt.empty(); }
    [[nodiscard]] double t_max() const noexcept;

    /// Same Brownian path with every step halved; midpoints come from a
    /// Brownian bridge keyed by (key, step index), so refining is reproducible.
    [[nodiscard]] DrivingPath refined(std::uint64_t key) const;

    /// Driving function scaled by r and time by r^2.
    [[nodiscard]] DrivingPath scaled(double r) const;

    void push(double step, double increment) {
        dt.push_back(step);
        dU.push_back(increment);
    }
};

enum class MarkStatus { active, swallowed, cutoff };

/// State of an interior point under the flow: Z = g_t(z0) - U_t and |g_t'(z0)|.
/// Once a mark leaves `active` its state is frozen at the event time.
struct MarkedPoint {
    complex z0{0.0, 1.0};
    complex Z{0.0, 1.0};
    double abs_g_prime = 1.0;
    MarkStatus status = MarkStatus::active;
    double t_event = kInf;
    /// The mark counts as captured once sin arg Z falls below this.
    double capture_tol = 1e-9;

    [[nodiscard]] static MarkedPoint at(complex z0);

    [[nodiscard]] bool active() const noexcept { return status == MarkStatus::active; }
    /// Im Z / |g'|; equals y for z0 = x + iy in H, half the usual conformal radius.
    [[nodiscard]] double upsilon() const noexcept { return Z.imag() / abs_g_prime; }
    /// sin arg Z.
    [[nodiscard]] double sine() const noexcept { return Z.imag() / std::abs(Z); }
    [[nodiscard]] double theta() const noexcept { return std::arg(Z); }
};

/// Sampled curve: points[k] = gamma(times[k]).
struct CurveTrace {
    std::vector<double> times;
    std::vector<complex> points;
};

struct SlitStep {
    complex z;
    bool captured = false;  // sin arg of the new Z is below the tolerance
};

/// Exact update of Z over a step of constant driving: sqrt((Z - dU)^2 + 2 a dt)
/// on the branch with nonnegative imaginary part. `capture_tol` is a bound on
/// sin arg Z. For kappa > 4 a swallowed point has Z -> 0 with arg Z -> 0 or pi;
/// for kappa <= 4 the same happens to every point as t -> infinity. Either way
/// upsilon has stopped moving.
[[nodiscard]] SlitStep slit_step(complex Z, double dU, double dt, double a, double capture_tol = 1e-9);

/// |dZ'/dZ| of the same update: |Z - dU| / |Z'|.
[[nodiscard]] double deriv_step(complex Z_before, double dU, double dt, double a);

/// Applies one step to every active mark, each with its own capture
/// tolerance. Returns the number of marks captured during the step.
std::size_t apply_step(std::span<MarkedPoint> marks, double dU, double dt, double a, double t_after);

struct StopRule {
    double horizon = kInf;
    std::optional<std::size_t> mark;  // stop when this mark's upsilon <= upsilon_target
    double upsilon_target = 0.0;
    double max_upsilon_drop = 0.5;    // a step taking upsilon below this fraction is an error
};

struct StopReport {
    enum class Reason { horizon, upsilon_target };
    Reason reason = Reason::horizon;
    std::size_t step = 0;  // number of steps applied
    double t = 0.0;
};

struct EvolveResult {
    std::vector<MarkedPoint> marks;
    StopReport report;
};

/// Runs a fixed driving path over the marks. Throws NumericalError when a
/// single step shrinks some active upsilon by more than the rule allows.
[[nodiscard]] EvolveResult evolve(const DrivingPath& path, std::vector<MarkedPoint> marks,
                                  const SleParams& params, const StopRule& stop = {});

/// Inverse of slit_step: maps a point of the plane after a step (relative
/// coordinates) back to the plane before it. Boundary points go to the slit
/// or the real line.
[[nodiscard]] complex unslit_step(complex zeta, double dU, double dt, double a);

/// gamma(t_k) for every step, by backward composition of inverse slit maps.
[[nodiscard]] CurveTrace trace(const DrivingPath& path, const SleParams& params);

/// Point on the curve at time t_{k} + s * dt_{k+1}, 0 < s <= 1 (k = step index,
/// zero-based, so step = 0, s = 1 gives gamma(t_1)).
[[nodiscard]] complex trace_point(const DrivingPath& path, const SleParams& params, std::size_t step,
                                  double s = 1.0);

/// dist(z, curve U R) using the curve pieces of the listed steps, each
/// sampled at `subdivisions` points along its slit.
[[nodiscard]] double distance_to_trace(const DrivingPath& path, const SleParams& params, complex z,
                                       std::span<const std::size_t> steps, int subdivisions = 4);

/// Same over all steps.
[[nodiscard]] double distance_to_trace(const DrivingPath& path, const SleParams& params, complex z,
                                       int subdivisions = 4);

/// CSV dump with header "t,re,im".
void write_trace_csv(const CurveTrace& curve, std::ostream& out);

// ---------------------------------------------------------------------------
// Adaptive sampler

struct FlowOptions {
    /// dt = step_fraction * min |Z|^2 over the marks that control the step.
    double step_fraction = 0.01;
    double max_dt = kInf;
    double min_dt = 1e-300;
    /// A committed step may not take an active upsilon below this fraction of
    /// its previous value; otherwise the step is bisected along a Brownian bridge.
    double max_upsilon_drop = 0.5;
    int max_bisect = 20;
    /// Capture tolerance given to the tilt target. The tilted angle is pushed
    /// away from 0 and pi but can linger near them for a long while, so it
    /// gets a far smaller bound than ordinary marks.
    double tilt_capture_tol = 1e-14;
    bool record_path = false;
};

/// Loewner flow driven by Brownian motion generated on the fly, with steps
/// adapted to the marks. With a tilt target the driving B (U = -B) acquires
/// the drift -beta X / (X^2 + Y^2) of that mark, the Girsanov drift of its
/// Green's martingale dM = -beta X / |Z|^2 M dB.
class Flow {
public:
    Flow(const SleParams& params, std::vector<MarkedPoint> marks, std::uint64_t key, FlowOptions options = {});

    /// Girsanov tilt toward marks_[index]; nullopt for the chordal law.
    void set_tilt(std::optional<std::size_t> index);
    [[nodiscard]] std::optional<std::size_t> tilt() const noexcept { return tilt_; }

    /// Whether an active mark limits the step size (all do by default).
    void set_controls_step(std::size_t index, bool controls);

    /// Per-mark upsilon levels; a step in which two marks first cross their
    /// levels together is bisected so the crossing order is resolved.
    void set_levels(std::vector<double> levels) { levels_ = std::move(levels); }

    /// Freezes a mark (status cutoff); it no longer evolves or controls steps.
    void retire(std::size_t index);

    /// Advances by one adaptive step (possibly several bisected sub-steps).
    /// Returns false when no active mark controls the step size.
    bool step();

    /// New independent continuation of the current state.
    [[nodiscard]] Flow fork(std::uint64_t key) const;

    [[nodiscard]] double time() const noexcept { return t_; }
    [[nodiscard]] std::size_t steps() const noexcept { return steps_; }
    [[nodiscard]] std::size_t substeps() const noexcept { return substeps_; }
    [[nodiscard]] std::size_t bisections() const noexcept { return bisections_; }
    [[nodiscard]] const std::vector<MarkedPoint>& marks() const noexcept { return marks_; }
    [[nodiscard]] const MarkedPoint& mark(std::size_t i) const { return marks_.at(i); }
    [[nodiscard]] const SleParams& params() const noexcept { return params_; }
    [[nodiscard]] const DrivingPath& path() const noexcept { return path_; }
    /// log of the Girsanov density accumulated by the tilt (diagnostic).
    [[nodiscard]] double log_weight() const noexcept { return log_weight_; }
    /// Marks captured during the most recent call to step().
    [[nodiscard]] const std::vector<std::size_t>& captured_last_step() const noexcept { return captured_; }

private:
    void advance(double dt, double dW, int depth);
    [[nodiscard]] double next_dt() const;

    SleParams params_;
    std::vector<MarkedPoint> marks_;
    std::vector<char> controls_;
    std::vector<double> levels_;
    CounterRng rng_;
    FlowOptions options_;
    std::optional<std::size_t> tilt_;
    DrivingPath path_;
    std::vector<MarkedPoint> scratch_;
    std::vector<std::size_t> captured_;
    double t_ = 0.0;
    double log_weight_ = 0.0;
    std::size_t steps_ = 0;
    std::size_t substeps_ = 0;
    std::size_t bisections_ = 0;
};

}  // namespace slelab
