#include "slelab/two_sided.hpp"

#include "slelab/greens.hpp"
#include "slelab/parallel.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace slelab {

namespace {

constexpr double kPi = std::numbers::pi;

double theta_substep(double theta, double h, double dW, int depth, CounterRng& rng, double two_a) {
    const double cot = std::cos(theta) / std::sin(theta);
    const double next = theta + two_a * cot * h + dW;
    const bool exits = !(next > 0.0 && next < kPi);
    if ((exits || std::abs(cot) * h > 0.1) && depth < 20) {
        const double dW1 = 0.5 * dW + 0.5 * std::sqrt(h) * rng.normal();
        const double mid = theta_substep(theta, 0.5 * h, dW1, depth + 1, rng, two_a);
        return theta_substep(mid, 0.5 * h, dW - dW1, depth + 1, rng, two_a);
    }
    if (exits) {
        std::ostringstream msg;
        msg << "sample_theta: step from theta = " << theta << " leaves (0, pi) after 20 halvings; dt is too coarse";
        throw NumericalError(msg.str());
    }
    return next;
}

void record_levels(std::vector<LevelHit>& hits, const MarkedPoint& m, std::size_t path_index) {
    for (auto& h : hits) {
        if (!h.reached && m.upsilon() <= h.level) {
            h.reached = true;
            h.state = m;
            h.path_index = path_index;
        }
    }
}

std::vector<LevelHit> make_hits(std::span<const double> levels) {
    std::vector<LevelHit> hits;
    for (double l : levels) {
        if (!(l > 0.0)) throw DomainError("levels must be positive");
        hits.push_back({l, false, {}, 0});
    }
    return hits;
}

nlohmann::json point_json(complex z) { return nlohmann::json::array({z.real(), z.imag()}); }

}  // namespace

ThetaPath sample_theta(const SleParams& params, double theta0, double t_total, double dt, std::uint64_t key) {
    if (!(theta0 > 0.0 && theta0 < kPi)) throw DomainError("sample_theta: theta0 must lie in (0, pi)");
    if (!(dt > 0.0)) throw DomainError("sample_theta: dt must be positive");
    if (!(t_total >= 0.0)) throw DomainError("sample_theta: t_total must be nonnegative");
    const auto n = static_cast<std::size_t>(std::llround(t_total / dt));
    ThetaPath out;
    out.dt_radial = dt;
    out.thetas.reserve(n + 1);
    out.thetas.push_back(theta0);
    CounterRng rng(key);
    const double sd = std::sqrt(dt);
    const double two_a = 2.0 * params.a;
    double theta = theta0;
    for (std::size_t k = 0; k < n; ++k) {
        theta = theta_substep(theta, dt, sd * rng.normal(), 0, rng, two_a);
        out.thetas.push_back(theta);
    }
    return out;
}

std::vector<double> theta_equilibrium_samples(const SleParams& params, std::size_t chains, std::size_t per_chain,
                                              double burn_in, double spacing, double dt, std::uint64_t seed) {
    if (per_chain == 0 || chains == 0) return {};
    const auto burn_steps = static_cast<std::size_t>(std::llround(burn_in / dt));
    const auto gap = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(spacing / dt)));
    const double t_total = dt * static_cast<double>(burn_steps + gap * (per_chain - 1));
    std::vector<double> out;
    out.reserve(chains * per_chain);
    for (std::size_t c = 0; c < chains; ++c) {
        const ThetaPath p = sample_theta(params, kPi / 2, t_total, dt, stream_key(seed, c));
        for (std::size_t j = 0; j < per_chain; ++j) out.push_back(p.thetas[burn_steps + j * gap]);
    }
    return out;
}

TwoSidedRun sample_two_sided(const SleParams& params, complex z, double eps_cutoff, std::span<const complex> aux,
                             std::uint64_t key, const SamplingOptions& options, std::span<const double> levels) {
    if (!(z.imag() > 0.0)) throw DomainError("sample_two_sided: z must lie in the upper half-plane");
    if (!(eps_cutoff > 0.0 && eps_cutoff <= z.imag())) {
        throw DomainError("sample_two_sided: need 0 < eps_cutoff <= Im z");
    }
    std::vector<MarkedPoint> marks{MarkedPoint::at(z)};
    for (complex w : aux) marks.push_back(MarkedPoint::at(w));

    TwoSidedRun run;
    run.target = z;
    run.levels = make_hits(levels);

    Flow flow(params, std::move(marks), key, options.flow);
    flow.set_tilt(0);
    record_levels(run.levels, flow.mark(0), 0);
    for (;;) {
        const MarkedPoint& zm = flow.mark(0);
        if (zm.upsilon() <= eps_cutoff) {
            run.terminal = TwoSidedRun::Terminal::cutoff;
            break;
        }
        if (!zm.active()) {
            run.terminal = TwoSidedRun::Terminal::z_swallowed;
            break;
        }
        if (flow.steps() >= options.max_steps) {
            run.terminal = TwoSidedRun::Terminal::step_limit;
            break;
        }
        flow.step();
        record_levels(run.levels, flow.mark(0), flow.path().size());
    }
    run.marks = flow.marks();
    run.weight_log = flow.log_weight();
    run.t = flow.time();
    run.steps = flow.steps();
    if (options.flow.record_path) run.driving = flow.path();
    return run;
}

ChordalCutoffRun sample_chordal_cutoff(const SleParams& params, complex z, double eps, std::uint64_t key,
                                       const SamplingOptions& options, std::span<const double> levels) {
    if (!(z.imag() > 0.0)) throw DomainError("sample_chordal_cutoff: z must lie in the upper half-plane");
    if (!(eps > 0.0 && eps <= z.imag())) throw DomainError("sample_chordal_cutoff: need 0 < eps <= Im z");
    ChordalCutoffRun run;
    run.levels = make_hits(levels);
    Flow flow(params, {MarkedPoint::at(z)}, key, options.flow);
    HorizonWatch horizon(options.horizon_factor * std::norm(z), options.settle_tolerance);
    record_levels(run.levels, flow.mark(0), 0);
    for (;;) {
        const MarkedPoint& zm = flow.mark(0);
        if (zm.upsilon() <= eps) {
            run.reached = true;
            break;
        }
        const double u = zm.upsilon();
        if (!zm.active() || flow.steps() >= options.max_steps || horizon.settled(flow.time(), {&u, 1})) break;
        flow.step();
        record_levels(run.levels, flow.mark(0), flow.path().size());
    }
    run.state = flow.mark(0);
    run.t = flow.time();
    run.steps = flow.steps();
    return run;
}

double rn_weight(const MarkedPoint& mark_z, double eps, const SleParams& params) {
    return std::pow(eps, params.d - 2.0) * std::pow(mark_z.sine(), params.beta) / green_halfplane(mark_z.z0, params);
}

McEstimate estimate_inner_green(const SleParams& params, complex z, complex w, double eps_cutoff,
                                std::size_t n_samples, std::uint64_t seed, const SamplingOptions& options) {
    if (!(z.imag() > 0.0 && w.imag() > 0.0)) throw DomainError("estimate_inner_green: points must lie in H");
    if (z == w) throw DomainError("estimate_inner_green: z and w must differ");
    if (!(eps_cutoff > 0.0 && eps_cutoff < z.imag())) {
        throw DomainError("estimate_inner_green: need 0 < eps_cutoff < Im z");
    }
    if (n_samples == 0) throw DomainError("estimate_inner_green: n_samples must be positive");

    struct Partial {
        Accumulator acc;
        std::size_t discarded = 0;
        std::size_t w_swallowed = 0;
    };
    const std::size_t bs = std::max<std::size_t>(1, options.block_size);
    const std::size_t n_blocks = (n_samples + bs - 1) / bs;
    const complex aux[] = {w};
    auto parts = run_blocks(n_blocks, options.workers, [&](std::size_t b) {
        Partial p;
        const std::size_t end = std::min(n_samples, (b + 1) * bs);
        for (std::size_t i = b * bs; i < end; ++i) {
            const TwoSidedRun run = sample_two_sided(params, z, eps_cutoff, aux, stream_key(seed, i), options);
            if (!run.ok()) {
                ++p.discarded;
                continue;
            }
            const MarkedPoint& wm = run.marks[1];
            if (wm.status == MarkStatus::swallowed) ++p.w_swallowed;
            p.acc.add(green_from_state(wm, params).value);
        }
        return p;
    });
    Partial total;
    for (const auto& p : parts) {
        total.acc.merge(p.acc);
        total.discarded += p.discarded;
        total.w_swallowed += p.w_swallowed;
    }
    if (static_cast<double>(total.discarded) > 0.01 * static_cast<double>(n_samples)) {
        std::ostringstream msg;
        msg << "estimate_inner_green: " << total.discarded << " of " << n_samples
            << " runs lost z before the cutoff (limit 1%); reduce the step fraction";
        throw NumericalError(msg.str());
    }
    McEstimate est = McEstimate::from(total.acc);
    est.n_discarded = total.discarded;
    est.meta = {{"estimator", "inner_green"},
                {"kappa", params.kappa},
                {"z", point_json(z)},
                {"w", point_json(w)},
                {"eps_cutoff", eps_cutoff},
                {"n_requested", n_samples},
                {"w_swallowed", total.w_swallowed},
                {"seed", seed}};
    return est;
}

}  // namespace slelab
