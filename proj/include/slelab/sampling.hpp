#pragma once

#include "slelab/loewner.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace slelab {

/// Knobs shared by every Monte Carlo driver.
struct SamplingOptions {
    FlowOptions flow{};
    unsigned workers = 1;
    std::size_t block_size = 256;
    /// Runs that must reach t = infinity become eligible to stop at
    /// horizon_factor * |z|^2 (see HorizonWatch).
    double horizon_factor = 1e7;
    /// Relative upsilon drop over a dyadic epoch below which a value counts as settled.
    double settle_tolerance = 1e-3;
    /// Upper bound on adaptive steps per run; exceeding it discards the run.
    std::size_t max_steps = 400000;
    /// Clone count when a two-point path reaches its first threshold.
    std::size_t clones = 8;
};

/// Stand-in for t = infinity. Upsilon only decreases, so once t >= t_max a run
/// may stop at the end of the first dyadic epoch [t, 2t] over which no tracked
/// upsilon fell by more than `tolerance` relative.
class HorizonWatch {
public:
    HorizonWatch(double t_max, double tolerance) : t_max_(t_max), tol_(tolerance), next_(0.5 * t_max) {}

    /// Call after every step; `upsilons` holds the tracked values (inactive
    /// marks may be included, their values are frozen).
    bool settled(double t, std::span<const double> upsilons) {
        if (t < next_) return false;
        bool quiet = !snapshot_.empty() && snapshot_.size() == upsilons.size();
        for (std::size_t i = 0; quiet && i < upsilons.size(); ++i) {
            if (snapshot_[i] - upsilons[i] > tol_ * snapshot_[i]) quiet = false;
        }
        if (quiet && t >= t_max_) return true;
        snapshot_.assign(upsilons.begin(), upsilons.end());
        next_ = 2.0 * t;
        return false;
    }

private:
    double t_max_;
    double tol_;
    double next_;
    std::vector<double> snapshot_;
};

}  // namespace slelab
