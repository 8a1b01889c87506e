#include "slelab/loewner.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace slelab;

namespace {

// Classical RK4 for dz/dt = a / z together with dL/dt = -a / z^2 (L = log g').
struct OdeState {
    complex z;
    complex log_deriv;
};

OdeState loewner_ode(complex z0, double a, double t, int n) {
    OdeState s{z0, 0.0};
    const double h = t / n;
    auto f = [a](complex z) { return a / z; };
    auto g = [a](complex z) { return -a / (z * z); };
    for (int i = 0; i < n; ++i) {
        const complex k1 = f(s.z), l1 = g(s.z);
        const complex k2 = f(s.z + 0.5 * h * k1), l2 = g(s.z + 0.5 * h * k1);
        const complex k3 = f(s.z + 0.5 * h * k2), l3 = g(s.z + 0.5 * h * k2);
        const complex k4 = f(s.z + h * k3), l4 = g(s.z + h * k3);
        s.z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        s.log_deriv += h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
    }
    return s;
}

}  // namespace

TEST_SUITE("loewner") {

TEST_CASE("slit step examples") {
    const complex i(0.0, 1.0);
    CHECK(std::abs(slit_step(i, 0.0, 0.0, 0.7).z - i) < 1e-15);

    const double a = 0.75;
    CHECK(slit_step(i, 0.0, 1.0 / (2.0 * a), a).captured);

    const SlitStep s = slit_step(2.0 * i, 0.0, 0.5, 1.0);
    CHECK_FALSE(s.captured);
    CHECK(std::abs(s.z - complex(0.0, std::sqrt(3.0))) < 1e-14);
}

TEST_CASE("slit step solves the Loewner ODE with constant driving") {
    CounterRng rng(11);
    for (int rep = 0; rep < 40; ++rep) {
        const complex Z(4.0 * rng.uniform() - 2.0, 0.3 + 2.0 * rng.uniform());
        const double dU = 0.4 * rng.uniform() - 0.2;
        const double dt = 0.05 * rng.uniform();
        const double a = 0.3 + 1.5 * rng.uniform();
        const OdeState ode = loewner_ode(Z - dU, a, dt, 4000);
        CHECK(std::abs(slit_step(Z, dU, dt, a).z - ode.z) < 1e-10);
        CHECK(deriv_step(Z, dU, dt, a) == doctest::Approx(std::exp(ode.log_deriv.real())).epsilon(1e-9));
    }
}

TEST_CASE("derivative factor examples") {
    CHECK(deriv_step(complex(0.3, 0.8), 0.1, 0.0, 0.5) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(deriv_step(complex(0.0, 2.0), 0.0, 0.5, 1.0) == doctest::Approx(2.0 / std::sqrt(3.0)).epsilon(1e-14));
}

TEST_CASE("accumulated derivative matches the ODE along a path") {
    const SleParams p = make_params(3.0);
    const DrivingPath path = DrivingPath::brownian(1e-3, 60, 5);
    const complex z0(0.2, 0.6);
    const EvolveResult r = evolve(path, {MarkedPoint::at(z0)}, p);
    complex z = z0;
    complex log_deriv = 0.0;
    for (std::size_t k = 0; k < path.size(); ++k) {
        const OdeState s = loewner_ode(z - path.dU[k], p.a, path.dt[k], 400);
        z = s.z;
        log_deriv += s.log_deriv;
    }
    CHECK(std::abs(r.marks[0].Z - z) < 1e-10);
    CHECK(r.marks[0].abs_g_prime == doctest::Approx(std::exp(log_deriv.real())).epsilon(1e-9));
}

TEST_CASE("zero driving has a closed form") {
    const SleParams p = make_params(8.0 / 3.0);
    const std::size_t n = 200;
    const double dt = 0.9 / (2.0 * p.a) / n;
    const DrivingPath path = DrivingPath::uniform(dt, std::vector<double>(n, 0.0));
    for (complex z0 : {complex(0.0, 1.0), complex(1.0, 1.0), complex(-0.5, 2.0)}) {
        const EvolveResult r = evolve(path, {MarkedPoint::at(z0)}, p);
        const double t = r.report.t;
        complex exact = std::sqrt(z0 * z0 + 2.0 * p.a * t);
        if (exact.imag() < 0.0) exact = -exact;
        CHECK(std::abs(r.marks[0].Z - exact) < 1e-12);
        CHECK(r.marks[0].abs_g_prime == doctest::Approx(std::abs(z0) / std::abs(exact)).epsilon(1e-12));
    }
    // z = i: Z_t = i sqrt(1 - 2 a t), upsilon = 1 - 2 a t, hit at t = 1 / (2a)
    double last = 1.0;
    std::vector<MarkedPoint> marks{MarkedPoint::at({0.0, 1.0})};
    for (std::size_t k = 0; k < n; ++k) {
        apply_step(marks, 0.0, dt, p.a, dt * (k + 1));
        const double u = marks[0].upsilon();
        CHECK(u <= last);
        CHECK(u == doctest::Approx(1.0 - 2.0 * p.a * dt * (k + 1)).epsilon(1e-11));
        last = u;
    }
}

TEST_CASE("evolve stopping") {
    const SleParams p = make_params(4.0);
    const MarkedPoint m = MarkedPoint::at({0.3, 1.2});
    SUBCASE("zero-length path") {
        const EvolveResult r = evolve(DrivingPath{}, {m}, p);
        CHECK(r.report.reason == StopReport::Reason::horizon);
        CHECK(r.report.t == 0.0);
        CHECK(r.marks[0].Z == m.Z);
        CHECK(r.marks[0].abs_g_prime == 1.0);
    }
    SUBCASE("horizon") {
        const EvolveResult r = evolve(DrivingPath::brownian(0.01, 100, 3), {m}, p, {.horizon = 0.5});
        CHECK(r.report.step == 50);
        CHECK(r.report.t == doctest::Approx(0.5));
    }
    SUBCASE("upsilon target") {
        const DrivingPath path = DrivingPath::uniform(1e-3, std::vector<double>(2000, 0.0));
        StopRule rule;
        rule.mark = 0;
        rule.upsilon_target = 0.5;
        const EvolveResult r = evolve(path, {MarkedPoint::at({0.0, 1.0})}, p, rule);
        CHECK(r.report.reason == StopReport::Reason::upsilon_target);
        CHECK(r.marks[0].upsilon() <= 0.5);
        CHECK(r.marks[0].upsilon() > 0.49);
    }
    SUBCASE("coarse step near a mark") {
        const SleParams q = make_params(2.0);
        const DrivingPath path = DrivingPath::uniform(0.00495, {0.0});
        CHECK_THROWS_AS((void)evolve(path, {MarkedPoint::at({0.0, 0.1})}, q), NumericalError);
    }
}

TEST_CASE("far marks barely move") {
    const SleParams p = make_params(8.0 / 3.0);
    const EvolveResult r = evolve(DrivingPath::brownian(1e-3, 1000, 8), {MarkedPoint::at({0.0, 1000.0})}, p);
    CHECK(std::abs(r.marks[0].upsilon() / 1000.0 - 1.0) < 1e-3);
    CHECK(std::abs(r.marks[0].sine() - 1.0) < 1e-3);
}

TEST_CASE("Brownian scaling") {
    const SleParams p = make_params(6.0);
    const DrivingPath path = DrivingPath::brownian(1e-3, 800, 21);
    const std::vector<complex> pts{{0.1, 0.5}, {-1.0, 0.3}, {2.0, 2.0}};
    std::vector<MarkedPoint> base, big;
    const double r = 3.0;
    for (complex z : pts) {
        base.push_back(MarkedPoint::at(z));
        big.push_back(MarkedPoint::at(r * z));
    }
    const EvolveResult a = evolve(path, base, p);
    const EvolveResult b = evolve(path.scaled(r), big, p);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        REQUIRE(a.marks[i].status == b.marks[i].status);
        CHECK(b.marks[i].upsilon() == doctest::Approx(r * a.marks[i].upsilon()).epsilon(1e-10));
        CHECK(b.marks[i].sine() == doctest::Approx(a.marks[i].sine()).epsilon(1e-10));
    }
}

TEST_CASE("driving paths") {
    CHECK_THROWS_AS((void)DrivingPath::uniform(0.0, {1.0}), DomainError);
    CHECK_THROWS_AS((void)DrivingPath::uniform(0.1, {std::nan("")}), DomainError);
    const DrivingPath p = DrivingPath::brownian(0.01, 100, 4);
    CHECK(p.t_max() == doctest::Approx(1.0));
    const DrivingPath q = p.refined(9);
    CHECK(q.size() == 200);
    CHECK(q.t_max() == doctest::Approx(1.0));
    double u = 0.0, v = 0.0;
    for (double x : p.dU) u += x;
    for (double x : q.dU) v += x;
    CHECK(u == doctest::Approx(v).epsilon(1e-12));
    const DrivingPath again = DrivingPath::brownian(0.01, 100, 4);
    CHECK(again.dU == p.dU);
}

TEST_CASE("trace reconstruction") {
    const SleParams p = make_params(8.0 / 3.0);
    SUBCASE("single vertical slit") {
        const CurveTrace c = trace(DrivingPath::uniform(0.2, {0.0}), p);
        REQUIRE(c.points.size() == 2);
        CHECK(std::abs(c.points[0]) == 0.0);
        CHECK(std::abs(c.points[1] - complex(0.0, std::sqrt(2.0 * p.a * 0.2))) < 1e-14);
    }
    SUBCASE("zero driving stays on the imaginary axis") {
        const CurveTrace c = trace(DrivingPath::uniform(0.01, std::vector<double>(100, 0.0)), p);
        for (complex z : c.points) CHECK(std::abs(z.real()) < 1e-9);
        CHECK(c.points.back().imag() == doctest::Approx(std::sqrt(2.0 * p.a)).epsilon(1e-12));
    }
    SUBCASE("forward flow carries a trace point to the slit it came from") {
        const DrivingPath path = DrivingPath::brownian(1e-3, 300, 17);
        for (std::size_t k : {10u, 100u, 299u}) {
            const complex g = trace_point(path, p, k);
            CHECK(g.imag() >= 0.0);
            complex Z = g;
            for (std::size_t j = 0; j < k; ++j) Z = slit_step(Z, path.dU[j], path.dt[j], p.a, 0.0).z;
            const complex expect(path.dU[k], std::sqrt(2.0 * p.a * path.dt[k]));
            CHECK(std::abs(Z - expect) < 1e-7);
        }
    }
    SUBCASE("csv") {
        std::ostringstream os;
        write_trace_csv(trace(DrivingPath::uniform(0.1, {0.0, 0.0}), p), os);
        CHECK(os.str().rfind("t,re,im\n0,0,0\n", 0) == 0);
    }
    CHECK_THROWS_AS((void)trace(DrivingPath{}, p), DomainError);
}

TEST_CASE("Koebe sandwich against the traced curve") {
    for (double kappa : {2.0, 8.0 / 3.0, 6.0}) {
        const SleParams p = make_params(kappa);
        CounterRng pick(static_cast<std::uint64_t>(kappa * 100));
        for (int rep = 0; rep < 40; ++rep) {
            FlowOptions fo;
            fo.record_path = true;
            const complex z0(2.0 * pick.uniform() - 1.0, 0.3 + pick.uniform());
            Flow flow(p, {MarkedPoint::at(z0)}, stream_key(77, rep, static_cast<std::uint64_t>(kappa)), fo);
            const auto stop = static_cast<std::size_t>(50 + 1500 * pick.uniform());
            while (flow.steps() < stop && flow.mark(0).active()) flow.step();
            const MarkedPoint& m = flow.mark(0);
            if (!m.active()) continue;
            const double dist = distance_to_trace(flow.path(), p, z0, 8);
            CHECK(m.upsilon() <= 2.0 * dist * 1.1);
            CHECK(m.upsilon() >= 0.5 * dist / 1.1);
        }
    }
}

TEST_CASE("adaptive flow") {
    const SleParams p = make_params(4.0);
    const std::vector<MarkedPoint> marks{MarkedPoint::at({0.0, 1.0}), MarkedPoint::at({1.0, 0.5})};
    Flow a(p, marks, 99), b(p, marks, 99);
    std::vector<double> last{1.0, 0.5};
    for (int k = 0; k < 500; ++k) {
        a.step();
        b.step();
        for (std::size_t i = 0; i < 2; ++i) {
            CHECK(a.mark(i).upsilon() <= last[i] * (1.0 + 1e-12));
            last[i] = a.mark(i).upsilon();
        }
    }
    CHECK(a.mark(0).Z == b.mark(0).Z);
    CHECK(a.time() == b.time());

    Flow c = a.fork(1), d = a.fork(2);
    CHECK(c.mark(0).Z == a.mark(0).Z);
    c.step();
    d.step();
    CHECK(c.mark(0).Z != d.mark(0).Z);

    a.retire(1);
    const MarkedPoint frozen = a.mark(1);
    for (int k = 0; k < 50; ++k) a.step();
    CHECK(a.mark(1).Z == frozen.Z);
    CHECK(a.mark(1).status == MarkStatus::cutoff);
}

}  // TEST_SUITE
