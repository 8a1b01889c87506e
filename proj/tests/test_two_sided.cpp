#include "slelab/greens.hpp"
#include "slelab/two_sided.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace slelab;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_SUITE("two_sided") {

TEST_CASE("angle sampler basics") {
    const SleParams p = make_params(8.0 / 3.0);
    const ThetaPath zero = sample_theta(p, kPi / 2, 0.0, 1e-3, 1);
    REQUIRE(zero.thetas.size() == 1);
    CHECK(zero.thetas[0] == kPi / 2);
    CHECK_THROWS_AS((void)sample_theta(p, 0.0, 1.0, 1e-3, 1), DomainError);
    CHECK_THROWS_AS((void)sample_theta(p, 1.0, 1.0, 0.0, 1), DomainError);

    const ThetaPath path = sample_theta(p, 0.05, 50.0, 1e-3, 2);
    CHECK(path.thetas.size() == 50001);
    for (double t : path.thetas) {
        CHECK(t > 0.0);
        CHECK(t < kPi);
    }
}

TEST_CASE("angle drift over single steps") {
    const SleParams p = make_params(8.0 / 3.0);
    const double dt = 1e-3;
    Accumulator inc;
    for (int i = 0; i < 100000; ++i) inc.add(sample_theta(p, kPi / 4, dt, dt, stream_key(3, i)).thetas[1] - kPi / 4);
    CHECK(std::abs(inc.mean() - 2.0 * p.a * dt) < 4.0 * inc.stderr_of_mean());
    CHECK(inc.mean() > 0.0);
}

TEST_CASE("long-run angle law") {
    for (double kappa : {2.0, 6.0}) {
        const SleParams p = make_params(kappa);
        const auto s = theta_equilibrium_samples(p, 10, 1000, 5.0, 0.5, 1e-3, 4);
        CHECK(s.size() == 10000);
        CHECK(ks_statistic(s, [&](double t) { return invariant_cdf(p, t); }) < 0.03);
    }
}

TEST_CASE("Radon-Nikodym weight examples") {
    const SleParams p = make_params(8.0 / 3.0);
    const MarkedPoint start = MarkedPoint::at({0.0, 1.0});
    CHECK(rn_weight(start, 1.0, p) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(rn_weight(start, 0.01, p) == doctest::Approx(21.544).epsilon(1e-4));
}

TEST_CASE("conditioned runs") {
    const SleParams p = make_params(4.0);
    const complex z(0.0, 1.0);

    const TwoSidedRun zero = sample_two_sided(p, z, 1.0, {}, 1);
    CHECK(zero.ok());
    CHECK(zero.steps == 0);
    CHECK(zero.marks[0].Z == z);
    CHECK(zero.marks[0].abs_g_prime == 1.0);
    CHECK_THROWS_AS((void)sample_two_sided(p, z, 1.5, {}, 1), DomainError);
    CHECK_THROWS_AS((void)sample_two_sided(p, z, 0.0, {}, 1), DomainError);

    std::vector<double> thetas;
    std::size_t lost = 0;
    for (std::size_t i = 0; i < 3000; ++i) {
        const TwoSidedRun r = sample_two_sided(p, z, 0.01, {}, stream_key(6, i));
        if (!r.ok()) {
            ++lost;
            continue;
        }
        CHECK(r.marks[0].upsilon() <= 0.01);
        thetas.push_back(r.marks[0].theta());
    }
    CHECK(lost <= 3);
    CHECK(ks_statistic(thetas, [&](double t) { return invariant_cdf(p, t); }) < 0.04);
}

TEST_CASE("chordal cutoff runs") {
    const SleParams p = make_params(8.0 / 3.0);
    const ChordalCutoffRun at_start = sample_chordal_cutoff(p, {0.0, 1.0}, 1.0, 1);
    CHECK(at_start.reached);
    CHECK(at_start.steps == 0);
    std::size_t reached = 0;
    for (std::size_t i = 0; i < 300; ++i) {
        const ChordalCutoffRun r = sample_chordal_cutoff(p, {0.0, 1.0}, 0.1, stream_key(2, i));
        if (r.reached) {
            ++reached;
            CHECK(r.state.upsilon() <= 0.1);
        }
    }
    // P{rho_eps < inf} is close to c_* eps^{2-d}, about 0.32 here
    CHECK(reached > 60);
    CHECK(reached < 140);
}

TEST_CASE("inner Green's function") {
    const SleParams p = make_params(8.0 / 3.0);
    const complex z(0.0, 1.0);

    const complex far(0.0, 1e6);
    const McEstimate f = estimate_inner_green(p, z, far, 0.01, 200, 1);
    CHECK(f.mean == doctest::Approx(green_halfplane(far, p)).epsilon(0.01));

    const complex w(2.0, 1.0);
    const McEstimate a = estimate_inner_green(p, z, w, 0.01, 2000, 2);
    const McEstimate b = estimate_inner_green(p, z, w, 0.005, 2000, 3);
    CHECK(a.mean > 0.0);
    CHECK(std::isfinite(a.mean));
    CHECK(a.n_discarded == 0);
    CHECK(std::abs(a.mean - b.mean) < 3.0 * std::hypot(a.std_err, b.std_err));

    CHECK_THROWS_AS((void)estimate_inner_green(p, z, z, 0.01, 10, 1), DomainError);
    CHECK_THROWS_AS((void)estimate_inner_green(p, z, w, 1.0, 10, 1), DomainError);
}

}  // TEST_SUITE
