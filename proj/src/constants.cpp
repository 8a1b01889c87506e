#include "slelab/constants.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>

#include <cmath>
#include <sstream>

namespace slelab {

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

QuadratureResult sine_power_quadrature(double p) {
    if (!(p > 0.0) || !std::isfinite(p)) {
        throw DomainError("sine_power_integral: exponent must be positive and finite");
    }
    using boost::math::quadrature::gauss_kronrod;
    auto integrand = [p](double x) { return std::pow(std::sin(x), p); };
    double error = 0.0;
    // symmetric about pi/2; the endpoint x^p behavior is confined to one end
    const double half = gauss_kronrod<double, 61>::integrate(integrand, 0.0, kPi / 2.0, 12, 1e-13, &error);
    return {2.0 * half, 2.0 * error};
}

double sine_power_integral(double p) { return sine_power_quadrature(p).value; }

SleParams make_params(double kappa) {
    if (!(kappa > 0.0 && kappa < 8.0)) {
        std::ostringstream msg;
        msg << "kappa = " << kappa << " is outside the supported domain 0 < kappa < 8";
        throw DomainError(msg.str());
    }
    SleParams p;
    p.kappa = kappa;
    p.a = 2.0 / kappa;
    p.d = 1.0 + kappa / 8.0;
    p.beta = 8.0 / kappa - 1.0;
    const double integral = sine_power_integral(4.0 * p.a);
    p.c_4a = 1.0 / integral;
    p.c_star = 2.0 * p.c_4a;
    return p;
}

double invariant_density(const SleParams& params, double theta) {
    if (!(theta > 0.0 && theta < kPi)) {
        throw DomainError("invariant_density: theta must lie in (0, pi)");
    }
    return params.c_4a * std::pow(std::sin(theta), 4.0 * params.a);
}

double invariant_cdf(const SleParams& params, double theta) {
    if (theta <= 0.0) return 0.0;
    if (theta >= kPi) return 1.0;
    // u = sin^2 x turns int_0^theta sin^p into half an incomplete beta integral
    const double half = 0.5 * boost::math::ibeta(2.0 * params.a + 0.5, 0.5, std::pow(std::sin(theta), 2));
    return theta <= kPi / 2.0 ? half : 1.0 - half;
}

}  // namespace slelab
