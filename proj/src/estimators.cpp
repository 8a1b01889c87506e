#include "slelab/estimators.hpp"

#include "slelab/greens.hpp"
#include "slelab/parallel.hpp"
#include "slelab/two_sided.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>

namespace slelab {

namespace {

nlohmann::json point_json(complex z) { return nlohmann::json::array({z.real(), z.imag()}); }

std::size_t block_count(std::size_t n, const SamplingOptions& o) {
    const std::size_t bs = std::max<std::size_t>(1, o.block_size);
    return (n + bs - 1) / bs;
}

std::pair<std::size_t, std::size_t> block_range(std::size_t b, std::size_t n, const SamplingOptions& o) {
    const std::size_t bs = std::max<std::size_t>(1, o.block_size);
    return {b * bs, std::min(n, (b + 1) * bs)};
}

void require_point(complex z, const char* what) {
    if (!(z.imag() > 0.0) || !std::isfinite(z.real()) || !std::isfinite(z.imag())) {
        throw DomainError(std::string(what) + " must be a finite point of the upper half-plane");
    }
}

void require_decreasing(std::span<const double> ladder, const char* what) {
    if (ladder.empty()) throw DomainError(std::string(what) + " is empty");
    for (std::size_t i = 0; i < ladder.size(); ++i) {
        if (!(ladder[i] > 0.0)) throw DomainError(std::string(what) + " values must be positive");
        if (i > 0 && !(ladder[i] < ladder[i - 1])) {
            throw DomainError(std::string(what) + " must be strictly decreasing");
        }
    }
}

double horizon_for(const SamplingOptions& o, std::initializer_list<complex> pts) {
    double r2 = 0.0;
    for (complex p : pts) r2 = std::max(r2, std::norm(p));
    return o.horizon_factor * r2;
}

}  // namespace

// ---------------------------------------------------------------------------
// One point

ScanResult one_point_limit(const SleParams& params, complex z, std::span<const double> r_ladder, std::size_t n,
                           std::uint64_t seed, const SamplingOptions& options) {
    require_point(z, "one_point_limit: z");
    require_decreasing(r_ladder, "one_point_limit: r ladder");
    if (r_ladder.front() > 0.75) throw DomainError("one_point_limit: r values must lie in (0, 3/4]");
    if (n == 0) throw DomainError("one_point_limit: n must be positive");

    const std::size_t m = r_ladder.size();
    const double y0 = z.imag();
    const double stop_level = r_ladder.back() * y0;
    const double t_max = horizon_for(options, {z});
    const double t_early = t_max / 64.0;

    struct Partial {
        std::vector<Accumulator> hit, drift;
        std::size_t discarded = 0;
        std::size_t captured = 0;
        double steps = 0.0;
    };
    auto parts = run_blocks(block_count(n, options), options.workers, [&](std::size_t b) {
        Partial p;
        p.hit.resize(m);
        p.drift.resize(m);
        const auto [lo, hi] = block_range(b, n, options);
        for (std::size_t i = lo; i < hi; ++i) {
            Flow flow(params, {MarkedPoint::at(z)}, stream_key(seed, i), options.flow);
            HorizonWatch horizon(t_max, options.settle_tolerance);
            std::optional<double> early;
            bool discard = false;
            for (;;) {
                const MarkedPoint& mk = flow.mark(0);
                const double u = mk.upsilon();
                if (!early && flow.time() >= t_early) early = u;
                if (u <= stop_level || !mk.active()) break;
                if (horizon.settled(flow.time(), {&u, 1})) break;
                if (flow.steps() >= options.max_steps) {
                    discard = true;
                    break;
                }
                flow.step();
            }
            p.steps += static_cast<double>(flow.steps());
            if (discard) {
                ++p.discarded;
                continue;
            }
            if (flow.mark(0).status == MarkStatus::swallowed) ++p.captured;
            const double u = flow.mark(0).upsilon();
            const double ue = early.value_or(u);
            for (std::size_t k = 0; k < m; ++k) {
                const double lvl = r_ladder[k] * y0;
                const double now = u <= lvl ? 1.0 : 0.0;
                p.hit[k].add(now);
                p.drift[k].add(now - (ue <= lvl ? 1.0 : 0.0));
            }
        }
        return p;
    });

    Partial total;
    total.hit.resize(m);
    total.drift.resize(m);
    for (const auto& p : parts) {
        for (std::size_t k = 0; k < m; ++k) {
            total.hit[k].merge(p.hit[k]);
            total.drift[k].merge(p.drift[k]);
        }
        total.discarded += p.discarded;
        total.captured += p.captured;
        total.steps += p.steps;
    }

    ScanResult out;
    out.axis_name = "r";
    out.reference_name = "c_star*r^(2-d)*S0^beta";
    const double s0b = std::pow(std::sin(std::arg(z)), params.beta);
    nlohmann::json drift = nlohmann::json::array();
    nlohmann::json warnings = nlohmann::json::array();
    for (std::size_t k = 0; k < m; ++k) {
        McEstimate e = McEstimate::from(total.hit[k]);
        e.n_discarded = total.discarded;
        e.successes = static_cast<std::size_t>(std::llround(total.hit[k].mean() * static_cast<double>(e.n)));
        out.axis.push_back(r_ladder[k]);
        out.reference.push_back(params.c_star * std::pow(r_ladder[k], 2.0 - params.d) * s0b);
        const double dm = total.drift[k].mean();
        drift.push_back({{"r", r_ladder[k]}, {"late_minus_early", dm}});
        if (e.std_err > 0.0 && dm > e.std_err) {
            std::ostringstream msg;
            msg << "horizon too short at r = " << r_ladder[k] << ": estimate still rising by " << dm
                << " (> 1 stderr) between horizon/64 and horizon";
            warnings.push_back(msg.str());
        }
        out.estimates.push_back(std::move(e));
    }
    if (m >= 2) out.refit();
    out.meta = {{"estimator", "one_point_limit"},
                {"kappa", params.kappa},
                {"z", point_json(z)},
                {"n", n},
                {"seed", seed},
                {"t_max", t_max},
                {"n_discarded", total.discarded},
                {"n_captured", total.captured},
                {"mean_steps", total.steps / static_cast<double>(n)},
                {"theory_exponent", 2.0 - params.d},
                {"horizon_drift", drift},
                {"warnings", warnings}};
    return out;
}

// ---------------------------------------------------------------------------
// Two points, direct

McEstimate two_point_direct(const SleParams& params, complex z, complex w, double eps, double delta, std::size_t n,
                            std::uint64_t seed, const SamplingOptions& options) {
    require_point(z, "two_point_direct: z");
    require_point(w, "two_point_direct: w");
    if (z == w) throw DomainError("two_point_direct: z and w must differ");
    if (!(eps > 0.0 && eps < z.imag())) throw DomainError("two_point_direct: need 0 < eps < upsilon_0(z) = Im z");
    if (!(delta > 0.0 && delta < w.imag())) {
        throw DomainError("two_point_direct: need 0 < delta < upsilon_0(w) = Im w");
    }
    const double sep = std::abs(z - w);
    if (!(2.0 * eps < sep && 2.0 * delta < sep)) throw DomainError("two_point_direct: eps and delta must be below |z-w|/2");
    if (n == 0) throw DomainError("two_point_direct: n must be positive");
    const std::size_t K = std::max<std::size_t>(1, options.clones);
    const double t_max = horizon_for(options, {z, w});

    struct Partial {
        Accumulator acc;
        std::size_t reached_xi = 0;
        std::size_t successes = 0;
        std::size_t discarded = 0;
        std::size_t clone_limit = 0;
    };
    auto parts = run_blocks(block_count(n, options), options.workers, [&](std::size_t b) {
        Partial p;
        const auto [lo, hi] = block_range(b, n, options);
        for (std::size_t i = lo; i < hi; ++i) {
            Flow flow(params, {MarkedPoint::at(z), MarkedPoint::at(w)}, stream_key(seed, i), options.flow);
            flow.set_levels({eps, delta});
            HorizonWatch horizon(t_max, options.settle_tolerance);
            enum class Phase { running, xi, fail, discard } phase = Phase::running;
            while (phase == Phase::running) {
                const MarkedPoint& zm = flow.mark(0);
                const MarkedPoint& wm = flow.mark(1);
                const double u[2] = {zm.upsilon(), wm.upsilon()};
                if (u[1] <= delta || !wm.active()) {
                    phase = Phase::fail;  // chi came first (or together), or w is gone
                } else if (u[0] <= eps) {
                    phase = Phase::xi;
                } else if (!zm.active() || horizon.settled(flow.time(), u)) {
                    phase = Phase::fail;
                } else if (flow.steps() >= options.max_steps) {
                    phase = Phase::discard;
                } else {
                    flow.step();
                }
            }
            if (phase == Phase::discard) {
                ++p.discarded;
                continue;
            }
            if (phase == Phase::fail) {
                p.acc.add(0.0);
                continue;
            }
            ++p.reached_xi;
            flow.retire(0);
            std::size_t wins = 0;
            for (std::size_t k = 0; k < K; ++k) {
                Flow clone = flow.fork(stream_key(seed, i, k + 1));
                HorizonWatch h2(t_max, options.settle_tolerance);
                for (;;) {
                    const MarkedPoint& wm = clone.mark(1);
                    const double u = wm.upsilon();
                    if (u <= delta) {
                        ++wins;
                        break;
                    }
                    if (!wm.active() || h2.settled(clone.time(), {&u, 1})) break;
                    if (clone.steps() >= options.max_steps) {
                        ++p.clone_limit;
                        break;
                    }
                    clone.step();
                }
            }
            p.successes += wins;
            p.acc.add(static_cast<double>(wins) / static_cast<double>(K));
        }
        return p;
    });

    Partial total;
    for (const auto& p : parts) {
        total.acc.merge(p.acc);
        total.reached_xi += p.reached_xi;
        total.successes += p.successes;
        total.discarded += p.discarded;
        total.clone_limit += p.clone_limit;
    }
    const double scale = std::pow(eps, params.d - 2.0) * std::pow(delta, params.d - 2.0);
    McEstimate est = McEstimate::from(total.acc, scale);
    est.n_discarded = total.discarded;
    est.successes = total.successes;
    nlohmann::json warnings = nlohmann::json::array();
    if (total.successes < 100) {
        warnings.push_back("fewer than 100 successes; the confidence interval is unreliable");
    }
    est.meta = {{"estimator", "two_point_direct"},
                {"kappa", params.kappa},
                {"z", point_json(z)},
                {"w", point_json(w)},
                {"eps", eps},
                {"delta", delta},
                {"n_requested", n},
                {"clones", K},
                {"paths_reaching_xi", total.reached_xi},
                {"clones_hitting_step_limit", total.clone_limit},
                {"probability", total.acc.mean()},
                {"seed", seed},
                {"warnings", warnings}};
    return est;
}

// ---------------------------------------------------------------------------
// Two points, factorized

McEstimate two_point_factorized(const SleParams& params, complex z, complex w, double eps_cutoff, std::size_t n,
                                std::uint64_t seed, const SamplingOptions& options) {
    const McEstimate inner = estimate_inner_green(params, z, w, eps_cutoff, n, seed, options);
    const double scale = params.c_star * params.c_star * green_halfplane(z, params);
    McEstimate est = inner;
    est.mean = scale * inner.mean;
    est.std_err = scale * inner.std_err;
    est.ci_lo = est.mean - 1.96 * est.std_err;
    est.ci_hi = est.mean + 1.96 * est.std_err;
    est.meta["estimator"] = "two_point_factorized";
    est.meta["inner_green"] = inner.mean;
    est.meta["inner_green_stderr"] = inner.std_err;
    est.meta["prefactor"] = scale;
    return est;
}

CrossValidation cross_validate(const McEstimate& direct, const McEstimate& factorized, double cushion) {
    CrossValidation cv;
    cv.direct = direct;
    cv.factorized = factorized;
    cv.difference = std::abs(direct.mean - factorized.mean);
    cv.combined_stderr = std::hypot(direct.std_err, factorized.std_err);
    cv.tolerance = 3.0 * cv.combined_stderr + cushion * std::abs(factorized.mean);
    cv.agrees = cv.difference <= cv.tolerance;
    return cv;
}

nlohmann::json to_json(const CrossValidation& cv) {
    return {{"direct", to_json(cv.direct)},
            {"factorized", to_json(cv.factorized)},
            {"difference", cv.difference},
            {"combined_stderr", cv.combined_stderr},
            {"tolerance", cv.tolerance},
            {"relative_difference", cv.factorized.mean != 0.0 ? cv.difference / cv.factorized.mean : 0.0},
            {"agrees", cv.agrees}};
}

// ---------------------------------------------------------------------------
// Euclidean distances to the curve

namespace {

// Growth theorem for the disk map D -> H_t sending 0 to z, |F'(0)| = 2 upsilon:
// a point at pseudo-hyperbolic distance rho from Z in the current plane lies
// at least 2 upsilon rho / (1 + rho)^2 from z.
double growth_bound(double upsilon, double rho) { return 2.0 * upsilon * rho / ((1.0 + rho) * (1.0 + rho)); }

double pseudo_hyperbolic(complex zeta, complex Z) { return std::abs(zeta - Z) / std::abs(zeta - std::conj(Z)); }

// The same bound minimised over the slit {dU + i s : 0 <= s <= h} of one step.
double slit_distance_bound(const MarkedPoint& m, double dU, double h) {
    const double x0 = dU - m.Z.real();
    const double y = m.Z.imag();
    const double s = std::clamp(std::hypot(x0, y), 0.0, h);
    const double num = x0 * x0 + (s - y) * (s - y);
    const double den = x0 * x0 + (s + y) * (s + y);
    return growth_bound(m.upsilon(), std::sqrt(num / den));
}

// Steps during which sin arg Z of the mark stays below this are skipped when
// reconstructing distances: the new piece is then hyperbolically far from the
// mark and sits behind curve that is already closer. Checked against the
// unfiltered distance in the tests.
constexpr double kVisibleSine = 1e-2;

// dist(z0, curve U R), or any value above `relevant` when the distance
// exceeds it. Pulls candidate slit points back to the original plane one step
// at a time and drops a point as soon as the growth bound at an intermediate
// time shows it cannot beat the current best.
double traced_distance(const DrivingPath& path, const SleParams& params, complex z0, double relevant) {
    std::vector<MarkedPoint> before;
    before.reserve(path.size());
    MarkedPoint m = MarkedPoint::at(z0);
    double t = 0.0;
    for (std::size_t k = 0; k < path.size() && m.active(); ++k) {
        before.push_back(m);
        t += path.dt[k];
        apply_step({&m, 1}, path.dU[k], path.dt[k], params.a, t);
    }
    double best = z0.imag();
    for (std::size_t k = 0; k < before.size(); ++k) {
        const MarkedPoint& mk = before[k];
        const double h = std::sqrt(2.0 * params.a * path.dt[k]);
        if (mk.sine() < kVisibleSine || slit_distance_bound(mk, path.dU[k], h) > std::min(relevant, best)) continue;
        for (int q = 1; q <= 4; ++q) {
            complex zeta(path.dU[k], h * std::sqrt(q / 4.0));
            bool dropped = false;
            for (std::size_t j = k; j-- > 0;) {
                zeta = unslit_step(zeta, path.dU[j], path.dt[j], params.a);
                if ((j & 7) == 0 && j > 0) {
                    const MarkedPoint& mj = before[j];
                    if (growth_bound(mj.upsilon(), pseudo_hyperbolic(zeta, mj.Z)) > std::min(relevant, best)) {
                        dropped = true;
                        break;
                    }
                }
            }
            if (!dropped) best = std::min(best, std::abs(zeta - z0));
        }
    }
    return best;
}

// Per-ladder outcome for one mark: hit[i] = dist <= ladder[i].
struct LadderOutcome {
    std::vector<char> hit;
    bool traced = false;
};

LadderOutcome classify(const DrivingPath& path, const SleParams& params, complex z0, double ups,
                       std::span<const double> ladder) {
    // inrad / 2 <= upsilon <= 2 inrad
    LadderOutcome out;
    out.hit.assign(ladder.size(), 0);
    bool ambiguous = false;
    for (std::size_t i = 0; i < ladder.size(); ++i) {
        if (2.0 * ups <= ladder[i]) {
            out.hit[i] = 1;
        } else if (ups < 2.0 * ladder[i]) {
            ambiguous = true;
        }
    }
    if (!ambiguous) return out;
    out.traced = true;
    const double dist = traced_distance(path, params, z0, ladder.front());
    for (std::size_t i = 0; i < ladder.size(); ++i) out.hit[i] = dist <= ladder[i] ? 1 : 0;
    return out;
}

struct JointCounts {
    std::vector<Accumulator> cells;  // row-major eps x delta
    std::size_t discarded = 0;
    std::size_t traced = 0;
};

JointCounts joint_distance_counts(const SleParams& params, complex z, complex w, std::span<const double> eps,
                                  std::span<const double> delta, std::size_t n, std::uint64_t seed,
                                  const SamplingOptions& options) {
    const std::size_t ne = eps.size(), nd = delta.size();
    const double t_max = horizon_for(options, {z, w});
    auto parts = run_blocks(block_count(n, options), options.workers, [&](std::size_t b) {
        JointCounts p;
        p.cells.resize(ne * nd);
        const auto [lo, hi] = block_range(b, n, options);
        FlowOptions fo = options.flow;
        fo.record_path = true;
        for (std::size_t i = lo; i < hi; ++i) {
            Flow flow(params, {MarkedPoint::at(z), MarkedPoint::at(w)}, stream_key(seed, i), fo);
            HorizonWatch horizon(t_max, options.settle_tolerance);
            const double done_at[2] = {0.5 * eps.back(), 0.5 * delta.back()};
            bool discard = false;
            for (;;) {
                for (std::size_t j = 0; j < 2; ++j) {
                    // every ladder event is already certain for this mark
                    if (flow.mark(j).active() && flow.mark(j).upsilon() <= done_at[j]) flow.retire(j);
                }
                const double u[2] = {flow.mark(0).upsilon(), flow.mark(1).upsilon()};
                if (!flow.mark(0).active() && !flow.mark(1).active()) break;
                if (horizon.settled(flow.time(), u)) break;
                if (flow.steps() >= options.max_steps) {
                    discard = true;
                    break;
                }
                flow.step();
            }
            if (discard) {
                ++p.discarded;
                continue;
            }
            // a joint cell needs both marks, so a certain miss of either settles the path
            if (flow.mark(0).upsilon() >= 2.0 * eps.front() || flow.mark(1).upsilon() >= 2.0 * delta.front()) {
                for (auto& cell : p.cells) cell.add(0.0);
                continue;
            }
            const LadderOutcome oz = classify(flow.path(), params, z, flow.mark(0).upsilon(), eps);
            LadderOutcome ow;
            if (oz.hit.front()) {
                ow = classify(flow.path(), params, w, flow.mark(1).upsilon(), delta);
            } else {
                ow.hit.assign(nd, 0);
            }
            if (oz.traced || ow.traced) ++p.traced;
            for (std::size_t a = 0; a < ne; ++a) {
                for (std::size_t c = 0; c < nd; ++c) p.cells[a * nd + c].add(oz.hit[a] && ow.hit[c] ? 1.0 : 0.0);
            }
        }
        return p;
    });
    JointCounts total;
    total.cells.resize(ne * nd);
    for (const auto& p : parts) {
        for (std::size_t c = 0; c < total.cells.size(); ++c) total.cells[c].merge(p.cells[c]);
        total.discarded += p.discarded;
        total.traced += p.traced;
    }
    return total;
}

McEstimate cell_estimate(const Accumulator& acc, std::size_t discarded) {
    McEstimate e = McEstimate::from(acc);
    e.n_discarded = discarded;
    e.successes = static_cast<std::size_t>(std::llround(acc.mean() * static_cast<double>(acc.count())));
    return e;
}

}  // namespace

double curve_distance(const DrivingPath& path, const SleParams& params, complex z0, double relevant) {
    return traced_distance(path, params, z0, relevant);
}

BeffaraScan beffara_scan(const SleParams& params, complex z, complex w, std::span<const double> eps_ladder,
                         std::span<const double> delta_ladder, std::size_t n, std::uint64_t seed,
                         const SamplingOptions& options) {
    require_point(z, "beffara_scan: z");
    require_point(w, "beffara_scan: w");
    if (z.imag() < 1.0 || w.imag() < 1.0) throw DomainError("beffara_scan: need Im z >= 1 and Im w >= 1");
    if (z == w) throw DomainError("beffara_scan: z and w must differ");
    require_decreasing(eps_ladder, "beffara_scan: eps ladder");
    require_decreasing(delta_ladder, "beffara_scan: delta ladder");
    if (n == 0) throw DomainError("beffara_scan: n must be positive");

    const JointCounts counts = joint_distance_counts(params, z, w, eps_ladder, delta_ladder, n, seed, options);
    const std::size_t ne = eps_ladder.size(), nd = delta_ladder.size();
    const double p2 = 2.0 - params.d;

    BeffaraScan out;
    out.eps.assign(eps_ladder.begin(), eps_ladder.end());
    out.delta.assign(delta_ladder.begin(), delta_ladder.end());
    out.paths_traced = counts.traced;
    out.grid.assign(ne, std::vector<McEstimate>(nd));
    std::vector<std::vector<double>> regressors;
    std::vector<double> ys, sig;
    double rmin = kInf, rmax = 0.0;
    std::size_t min_successes = n;
    for (std::size_t a = 0; a < ne; ++a) {
        for (std::size_t c = 0; c < nd; ++c) {
            McEstimate e = cell_estimate(counts.cells[a * nd + c], counts.discarded);
            const double ratio = e.mean / (std::pow(eps_ladder[a], p2) * std::pow(delta_ladder[c], p2));
            rmin = std::min(rmin, ratio);
            rmax = std::max(rmax, ratio);
            min_successes = std::min(min_successes, e.successes);
            regressors.push_back({eps_ladder[a], delta_ladder[c]});
            ys.push_back(e.mean);
            sig.push_back(e.std_err);
            out.grid[a][c] = std::move(e);
        }
    }
    out.ratio_spread = rmin > 0.0 ? rmax / rmin : kInf;

    auto make_scan = [&](bool along_eps) {
        ScanResult s;
        s.axis_name = along_eps ? "eps" : "delta";
        s.reference_name = along_eps ? "P(eps_0,delta_0)*(eps/eps_0)^(2-d)" : "P(eps_0,delta_0)*(delta/delta_0)^(2-d)";
        const std::size_t len = along_eps ? ne : nd;
        const double anchor = out.grid[0][0].mean;
        for (std::size_t k = 0; k < len; ++k) {
            const double x = along_eps ? eps_ladder[k] : delta_ladder[k];
            const double x0 = along_eps ? eps_ladder[0] : delta_ladder[0];
            s.axis.push_back(x);
            s.estimates.push_back(along_eps ? out.grid[k][0] : out.grid[0][k]);
            s.reference.push_back(anchor * std::pow(x / x0, p2));
        }
        if (len >= 2) {
            try {
                s.refit();
            } catch (const NumericalError&) {
                // too few positive cells; the fit stays at zero
            }
        }
        return s;
    };
    out.eps_scan = make_scan(true);
    out.delta_scan = make_scan(false);
    if (ne >= 2 && nd >= 2) {
        try {
            const LinearFit jf = fit_log_linear(regressors, ys, sig);
            out.eps_exponent = jf.coef[1];
            out.eps_exponent_stderr = jf.stderr_[1];
            out.delta_exponent = jf.coef[2];
            out.delta_exponent_stderr = jf.stderr_[2];
        } catch (const NumericalError&) {
        }
    } else {
        out.eps_exponent = out.eps_scan.fit.exponent;
        out.eps_exponent_stderr = out.eps_scan.fit.exponent_stderr;
        out.delta_exponent = out.delta_scan.fit.exponent;
        out.delta_exponent_stderr = out.delta_scan.fit.exponent_stderr;
    }
    nlohmann::json warnings = nlohmann::json::array();
    if (min_successes < 100) warnings.push_back("some grid cells have fewer than 100 successes");
    out.meta = {{"estimator", "beffara_scan"},
                {"kappa", params.kappa},
                {"z", point_json(z)},
                {"w", point_json(w)},
                {"n", n},
                {"seed", seed},
                {"n_discarded", counts.discarded},
                {"paths_traced", counts.traced},
                {"theory_exponent", p2},
                {"warnings", warnings}};
    return out;
}

nlohmann::json to_json(const BeffaraScan& b) {
    nlohmann::json grid = nlohmann::json::array();
    for (std::size_t a = 0; a < b.eps.size(); ++a) {
        for (std::size_t c = 0; c < b.delta.size(); ++c) {
            nlohmann::json cell = to_json(b.grid[a][c]);
            cell["eps"] = b.eps[a];
            cell["delta"] = b.delta[c];
            grid.push_back(cell);
        }
    }
    return {{"eps", b.eps},
            {"delta", b.delta},
            {"grid", grid},
            {"eps_scan", to_json(b.eps_scan)},
            {"delta_scan", to_json(b.delta_scan)},
            {"eps_exponent", b.eps_exponent},
            {"eps_exponent_stderr", b.eps_exponent_stderr},
            {"delta_exponent", b.delta_exponent},
            {"delta_exponent_stderr", b.delta_exponent_stderr},
            {"ratio_spread", b.ratio_spread},
            {"paths_traced", b.paths_traced},
            {"meta", b.meta}};
}

ScanResult beffara_distance_scan(const SleParams& params, complex z, std::span<const complex> ws, double eps,
                                 double delta, std::size_t n, std::uint64_t seed, const SamplingOptions& options) {
    require_point(z, "beffara_distance_scan: z");
    if (ws.empty()) throw DomainError("beffara_distance_scan: no points");
    if (!(eps > 0.0 && delta > 0.0)) throw DomainError("beffara_distance_scan: eps and delta must be positive");
    if (n == 0) throw DomainError("beffara_distance_scan: n must be positive");
    ScanResult out;
    out.axis_name = "|z-w|";
    out.reference_name = "P(first)*(|z-w|/|z-w_first|)^(d-2)";
    std::size_t discarded = 0, traced = 0;
    for (std::size_t k = 0; k < ws.size(); ++k) {
        require_point(ws[k], "beffara_distance_scan: w");
        if (ws[k].imag() < 1.0 || z.imag() < 1.0) throw DomainError("beffara_distance_scan: need Im >= 1");
        const double sep = std::abs(ws[k] - z);
        if (k > 0 && !(sep > out.axis.back())) {
            throw DomainError("beffara_distance_scan: |z-w| must be strictly increasing");
        }
        const double e[] = {eps};
        const double d[] = {delta};
        const JointCounts c = joint_distance_counts(params, z, ws[k], e, d, n, stream_key(seed, k), options);
        out.axis.push_back(sep);
        out.estimates.push_back(cell_estimate(c.cells[0], c.discarded));
        discarded += c.discarded;
        traced += c.traced;
    }
    for (double sep : out.axis) {
        out.reference.push_back(out.estimates[0].mean * std::pow(sep / out.axis[0], params.d - 2.0));
    }
    if (out.axis.size() >= 2) {
        try {
            out.refit();
        } catch (const NumericalError&) {
        }
    }
    nlohmann::json pts = nlohmann::json::array();
    for (complex w : ws) pts.push_back(point_json(w));
    out.meta = {{"estimator", "beffara_distance_scan"},
                {"kappa", params.kappa},
                {"z", point_json(z)},
                {"w", pts},
                {"eps", eps},
                {"delta", delta},
                {"n", n},
                {"seed", seed},
                {"n_discarded", discarded},
                {"paths_traced", traced},
                {"theory_exponent", params.d - 2.0}};
    return out;
}

// ---------------------------------------------------------------------------
// Chordal versus conditioned measure

RnConsistency rn_consistency(const SleParams& params, complex z, double eps, std::size_t n_chordal,
                             std::size_t n_two_sided, std::uint64_t seed, const SamplingOptions& options) {
    require_point(z, "rn_consistency: z");
    if (!(eps > 0.0 && eps < z.imag())) throw DomainError("rn_consistency: need 0 < eps < Im z");
    if (n_chordal == 0 || n_two_sided == 0) throw DomainError("rn_consistency: sample counts must be positive");
    const double eta = std::sqrt(eps * z.imag());
    const double levels[] = {eta};

    struct ChordalPart {
        Accumulator weight, functional;
        std::vector<double> thetas;
        std::size_t reached = 0;
    };
    auto cparts = run_blocks(block_count(n_chordal, options), options.workers, [&](std::size_t b) {
        ChordalPart p;
        const auto [lo, hi] = block_range(b, n_chordal, options);
        for (std::size_t i = lo; i < hi; ++i) {
            const ChordalCutoffRun run = sample_chordal_cutoff(params, z, eps, stream_key(seed, i, 0), options, levels);
            if (!run.reached) {
                p.weight.add(0.0);
                p.functional.add(0.0);
                continue;
            }
            ++p.reached;
            // the stopped value of upsilon, which overshoots eps by a fraction of a step
            const double wgt = rn_weight(run.state, run.state.upsilon(), params);
            p.weight.add(wgt);
            p.functional.add(wgt * run.levels[0].state.sine());
            p.thetas.push_back(run.state.theta());
        }
        return p;
    });

    struct TwoSidedPart {
        Accumulator functional;
        std::vector<double> thetas;
        std::vector<std::pair<double, double>> weighted;
        std::vector<double> weights;
        std::size_t discarded = 0;
    };
    auto tparts = run_blocks(block_count(n_two_sided, options), options.workers, [&](std::size_t b) {
        TwoSidedPart p;
        const auto [lo, hi] = block_range(b, n_two_sided, options);
        for (std::size_t i = lo; i < hi; ++i) {
            const TwoSidedRun run = sample_two_sided(params, z, eps, {}, stream_key(seed, i, 1), options, levels);
            if (!run.ok()) {
                ++p.discarded;
                continue;
            }
            p.functional.add(run.levels[0].state.sine());
            const MarkedPoint& m = run.marks[0];
            p.thetas.push_back(m.theta());
            const double wgt = std::pow(m.sine(), -params.beta);
            p.weighted.emplace_back(m.theta(), wgt);
            p.weights.push_back(wgt);
        }
        return p;
    });

    ChordalPart ct;
    for (auto& p : cparts) {
        ct.weight.merge(p.weight);
        ct.functional.merge(p.functional);
        ct.thetas.insert(ct.thetas.end(), p.thetas.begin(), p.thetas.end());
        ct.reached += p.reached;
    }
    TwoSidedPart tt;
    for (auto& p : tparts) {
        tt.functional.merge(p.functional);
        tt.thetas.insert(tt.thetas.end(), p.thetas.begin(), p.thetas.end());
        tt.weighted.insert(tt.weighted.end(), p.weighted.begin(), p.weighted.end());
        tt.weights.insert(tt.weights.end(), p.weights.begin(), p.weights.end());
        tt.discarded += p.discarded;
    }

    const auto half_sine_cdf = [](double x) { return 0.5 * (1.0 - std::cos(x)); };
    RnConsistency out;
    out.weight_mean = McEstimate::from(ct.weight);
    out.weight_mean.successes = ct.reached;
    out.weighted_functional = McEstimate::from(ct.functional);
    out.direct_functional = McEstimate::from(tt.functional);
    out.direct_functional.n_discarded = tt.discarded;
    out.intermediate_radius = eta;
    out.reached = ct.reached;
    if (!ct.thetas.empty()) out.ks_conditioned = ks_statistic(ct.thetas, half_sine_cdf);
    if (!tt.thetas.empty()) {
        out.ks_two_sided = ks_statistic(tt.thetas, [&](double x) { return invariant_cdf(params, x); });
        out.ks_reweighted = ks_statistic_weighted(tt.weighted, half_sine_cdf);
        out.reweighted_ess = effective_sample_size(tt.weights);
    }
    out.meta = {{"estimator", "rn_consistency"},
                {"kappa", params.kappa},
                {"z", point_json(z)},
                {"eps", eps},
                {"n_chordal", n_chordal},
                {"n_two_sided", n_two_sided},
                {"two_sided_discarded", tt.discarded},
                {"seed", seed}};
    return out;
}

nlohmann::json to_json(const RnConsistency& r) {
    return {{"weight_mean", to_json(r.weight_mean)},
            {"weighted_functional", to_json(r.weighted_functional)},
            {"direct_functional", to_json(r.direct_functional)},
            {"intermediate_radius", r.intermediate_radius},
            {"ks_conditioned", r.ks_conditioned},
            {"ks_reweighted", r.ks_reweighted},
            {"ks_two_sided", r.ks_two_sided},
            {"reached", r.reached},
            {"reweighted_ess", r.reweighted_ess},
            {"meta", r.meta}};
}

}  // namespace slelab
