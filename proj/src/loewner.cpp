#include "slelab/loewner.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace slelab {

// ---------------------------------------------------------------------------
// DrivingPath

DrivingPath DrivingPath::uniform(double step, std::vector<double> increments) {
    if (!(step > 0.0)) throw DomainError("DrivingPath: step must be positive");
    for (double v : increments) {
        if (!std::isfinite(v)) throw DomainError("DrivingPath: increments must be finite");
    }
    DrivingPath p;
    p.dt.assign(increments.size(), step);
    p.dU = std::move(increments);
    return p;
}

DrivingPath DrivingPath::brownian(double step, std::size_t n, std::uint64_t key) {
    const CounterRng rng(key);
    std::vector<double> inc(n);
    const double sd = std::sqrt(step);
    for (std::size_t k = 0; k < n; ++k) inc[k] = sd * rng.normal_at(k);
    return uniform(step, std::move(inc));
}

double DrivingPath::t_max() const noexcept {
    double t = 0.0;
    for (double h : dt) t += h;
    return t;
}

DrivingPath DrivingPath::refined(std::uint64_t key) const {
    const CounterRng rng(key);
    DrivingPath out;
    out.dt.reserve(2 * size());
    out.dU.reserve(2 * size());
    for (std::size_t k = 0; k < size(); ++k) {
        const double half = 0.5 * dt[k];
        const double mid = 0.5 * dU[k] + 0.5 * std::sqrt(dt[k]) * rng.normal_at(k);
        out.push(half, mid);
        out.push(half, dU[k] - mid);
    }
    return out;
}

DrivingPath DrivingPath::scaled(double r) const {
    DrivingPath out = *this;
    for (auto& h : out.dt) h *= r * r;
    for (auto& u : out.dU) u *= r;
    return out;
}

// ---------------------------------------------------------------------------
// Marks and elementary maps

MarkedPoint MarkedPoint::at(complex z0) {
    if (!(z0.imag() > 0.0)) throw DomainError("MarkedPoint: point must lie in the upper half-plane");
    MarkedPoint m;
    m.z0 = z0;
    m.Z = z0;
    return m;
}

namespace {

// Principal square root without the overflow guards of std::sqrt; every
// argument here is of moderate size.
complex principal_sqrt(complex c) {
    const double x = c.real();
    const double y = c.imag();
    const double r = std::sqrt(x * x + y * y);
    if (r == 0.0) return {};
    const double t = std::sqrt(0.5 * (r + std::abs(x)));
    if (x >= 0.0) return {t, 0.5 * y / t};
    return {0.5 * std::abs(y) / t, std::copysign(t, y)};
}

double modulus(complex c) { return std::sqrt(std::norm(c)); }

}  // namespace

SlitStep slit_step(complex Z, double dU, double dt, double a, double capture_tol) {
    const double wx = Z.real() - dU;
    const double y = Z.imag();
    // -( (w)^2 + 2 a dt ); i * principal sqrt of it lands in the upper half-plane
    const complex neg_rad(-(wx * wx - y * y + 2.0 * a * dt), -2.0 * wx * y);
    const complex s = principal_sqrt(neg_rad);
    SlitStep out;
    out.z = complex(-s.imag(), s.real());
    out.captured = !(out.z.imag() > 0.0 && out.z.imag() >= capture_tol * modulus(out.z));
    return out;
}

double deriv_step(complex Z_before, double dU, double dt, double a) {
    const complex w(Z_before.real() - dU, Z_before.imag());
    const SlitStep next = slit_step(Z_before, dU, dt, a, 0.0);
    return std::abs(w) / std::abs(next.z);
}

std::size_t apply_step(std::span<MarkedPoint> marks, double dU, double dt, double a, double t_after) {
    std::size_t captured = 0;
    for (auto& m : marks) {
        if (!m.active()) continue;
        const SlitStep next = slit_step(m.Z, dU, dt, a, m.capture_tol);
        if (next.captured) {
            // the state just before capture is the one that survives (upsilon at T_z-)
            m.status = MarkStatus::swallowed;
            m.t_event = t_after;
            ++captured;
            continue;
        }
        const double wabs = modulus({m.Z.real() - dU, m.Z.imag()});
        m.abs_g_prime *= wabs / modulus(next.z);
        m.Z = next.z;
    }
    return captured;
}

// ---------------------------------------------------------------------------
// Fixed-path evolution

EvolveResult evolve(const DrivingPath& path, std::vector<MarkedPoint> marks, const SleParams& params,
                    const StopRule& stop) {
    for (const auto& m : marks) {
        if (!m.active()) throw DomainError("evolve: all marks must start active");
    }
    if (stop.mark && *stop.mark >= marks.size()) throw DomainError("evolve: stop mark out of range");

    EvolveResult res;
    std::vector<double> before(marks.size());
    double t = 0.0;
    std::size_t k = 0;
    auto target_hit = [&] {
        return stop.mark && marks[*stop.mark].upsilon() <= stop.upsilon_target;
    };
    if (target_hit()) {
        res.report = {StopReport::Reason::upsilon_target, 0, 0.0};
        res.marks = std::move(marks);
        return res;
    }
    for (; k < path.size(); ++k) {
        if (t + path.dt[k] > stop.horizon * (1.0 + 1e-12)) break;
        for (std::size_t i = 0; i < marks.size(); ++i) before[i] = marks[i].upsilon();
        t += path.dt[k];
        apply_step(marks, path.dU[k], path.dt[k], params.a, t);
        for (std::size_t i = 0; i < marks.size(); ++i) {
            if (marks[i].active() && marks[i].upsilon() < stop.max_upsilon_drop * before[i]) {
                std::ostringstream msg;
                msg << "evolve: step " << k << " shrinks upsilon of mark " << i << " from " << before[i]
                    << " to " << marks[i].upsilon() << "; dt = " << path.dt[k] << " is too coarse";
                throw NumericalError(msg.str());
            }
        }
        if (target_hit()) {
            res.report = {StopReport::Reason::upsilon_target, k + 1, t};
            res.marks = std::move(marks);
            return res;
        }
    }
    res.report = {StopReport::Reason::horizon, k, t};
    res.marks = std::move(marks);
    return res;
}

// ---------------------------------------------------------------------------
// Trace reconstruction

namespace {

// Inverse of the slit map of height sqrt(2 a dt) based at 0, on the branch
// that maps the closed upper half-plane into itself.
complex inverse_slit(complex zeta, double height) {
    if (zeta.imag() <= 0.0) zeta = complex(zeta.real(), 0.0);
    complex w = principal_sqrt((zeta - height) * (zeta + height));
    if (w.imag() < 0.0 || (w.imag() == 0.0 && (w.real() < 0.0) != (zeta.real() < 0.0))) w = -w;
    if (w.imag() < 0.0) w = complex(w.real(), 0.0);
    return w;
}

}  // namespace

complex unslit_step(complex zeta, double dU, double dt, double a) {
    return inverse_slit(zeta, std::sqrt(2.0 * a * dt)) + dU;
}

complex trace_point(const DrivingPath& path, const SleParams& params, std::size_t step, double s) {
    if (step >= path.size()) throw DomainError("trace_point: step out of range");
    if (!(s > 0.0 && s <= 1.0)) throw DomainError("trace_point: fraction must lie in (0, 1]");
    complex zeta(path.dU[step], std::sqrt(2.0 * params.a * s * path.dt[step]));
    for (std::size_t j = step; j-- > 0;) {
        zeta = inverse_slit(zeta, std::sqrt(2.0 * params.a * path.dt[j])) + path.dU[j];
    }
    return zeta;
}

CurveTrace trace(const DrivingPath& path, const SleParams& params) {
    if (path.empty()) throw DomainError("trace: path is empty");
    CurveTrace out;
    out.times.reserve(path.size() + 1);
    out.points.reserve(path.size() + 1);
    out.times.push_back(0.0);
    out.points.emplace_back(0.0, 0.0);
    double t = 0.0;
    for (std::size_t k = 0; k < path.size(); ++k) {
        t += path.dt[k];
        const complex p = trace_point(path, params, k);
        if (!std::isfinite(p.real()) || !std::isfinite(p.imag())) {
            std::ostringstream msg;
            msg << "trace: branch failure at step " << k;
            throw NumericalError(msg.str());
        }
        out.times.push_back(t);
        out.points.push_back(p);
    }
    return out;
}

double distance_to_trace(const DrivingPath& path, const SleParams& params, complex z,
                         std::span<const std::size_t> steps, int subdivisions) {
    if (subdivisions < 1) throw DomainError("distance_to_trace: subdivisions must be >= 1");
    double best = std::max(z.imag(), 0.0);
    for (std::size_t k : steps) {
        for (int m = 1; m <= subdivisions; ++m) {
            const double s = static_cast<double>(m) / subdivisions;
            best = std::min(best, std::abs(trace_point(path, params, k, s) - z));
        }
    }
    return best;
}

double distance_to_trace(const DrivingPath& path, const SleParams& params, complex z, int subdivisions) {
    std::vector<std::size_t> all(path.size());
    for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
    return distance_to_trace(path, params, z, all, subdivisions);
}

void write_trace_csv(const CurveTrace& curve, std::ostream& out) {
    const auto old = out.precision(17);
    out << "t,re,im\n";
    for (std::size_t k = 0; k < curve.points.size(); ++k) {
        out << curve.times[k] << ',' << curve.points[k].real() << ',' << curve.points[k].imag() << '\n';
    }
    out.precision(old);
}

// ---------------------------------------------------------------------------
// Adaptive flow

Flow::Flow(const SleParams& params, std::vector<MarkedPoint> marks, std::uint64_t key, FlowOptions options)
    : params_(params),
      marks_(std::move(marks)),
      controls_(marks_.size(), 1),
      rng_(key),
      options_(options) {
    if (!(options_.step_fraction > 0.0)) throw DomainError("Flow: step_fraction must be positive");
    for (const auto& m : marks_) {
        if (!m.active()) throw DomainError("Flow: all marks must start active");
    }
}

void Flow::set_tilt(std::optional<std::size_t> index) {
    if (index) marks_.at(*index).capture_tol = options_.tilt_capture_tol;
    tilt_ = index;
}

void Flow::set_controls_step(std::size_t index, bool controls) { controls_.at(index) = controls ? 1 : 0; }

void Flow::retire(std::size_t index) {
    auto& m = marks_.at(index);
    if (m.active()) {
        m.status = MarkStatus::cutoff;
        m.t_event = t_;
    }
}

double Flow::next_dt() const {
    double r2 = kInf;
    for (std::size_t i = 0; i < marks_.size(); ++i) {
        if (!marks_[i].active() || !controls_[i]) continue;
        r2 = std::min(r2, std::norm(marks_[i].Z));
    }
    if (!std::isfinite(r2)) return 0.0;
    return std::clamp(options_.step_fraction * r2, options_.min_dt, options_.max_dt);
}

bool Flow::step() {
    captured_.clear();
    const double dt = next_dt();
    if (!(dt > 0.0)) return false;
    const double dW = std::sqrt(dt) * rng_.normal();
    advance(dt, dW, 0);
    ++steps_;
    return true;
}

void Flow::advance(double dt, double dW, int depth) {
    double drift = 0.0;
    if (tilt_ && marks_[*tilt_].active()) {
        const complex Z = marks_[*tilt_].Z;
        drift = -params_.beta * Z.real() / std::norm(Z);
    }
    const double dB = dW + drift * dt;
    const double dU = -dB;

    scratch_ = marks_;
    apply_step(scratch_, dU, dt, params_.a, t_ + dt);

    if (depth < options_.max_bisect) {
        bool refine = false;
        int crossings = 0;
        for (std::size_t i = 0; i < marks_.size() && !refine; ++i) {
            if (!marks_[i].active()) continue;
            const double before = marks_[i].upsilon();
            const double after = scratch_[i].upsilon();
            if (scratch_[i].active() && after < options_.max_upsilon_drop * before) refine = true;
            if (i < levels_.size() && before > levels_[i] && after <= levels_[i]) ++crossings;
        }
        if (refine || crossings >= 2) {
            ++bisections_;
            const double dW1 = 0.5 * dW + 0.5 * std::sqrt(dt) * rng_.normal();
            advance(0.5 * dt, dW1, depth + 1);
            advance(0.5 * dt, dW - dW1, depth + 1);
            return;
        }
    }

    for (std::size_t i = 0; i < marks_.size(); ++i) {
        if (marks_[i].active() && !scratch_[i].active()) captured_.push_back(i);
    }
    marks_.swap(scratch_);
    t_ += dt;
    ++substeps_;
    if (drift != 0.0) log_weight_ += drift * dW + 0.5 * drift * drift * dt;
    if (options_.record_path) path_.push(dt, dU);
}

Flow Flow::fork(std::uint64_t key) const {
    Flow copy = *this;
    copy.rng_ = CounterRng(key);
    copy.captured_.clear();
    return copy;
}

}  // namespace slelab
