#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>

namespace slelab {

template <class F>
double invariant_average(const SleParams& params, F&& fn) {
    using boost::math::quadrature::gauss_kronrod;
    const double p = 4.0 * params.a;
    auto integrand = [&](double x) { return fn(x) * std::pow(std::sin(x), p); };
    const double half = std::numbers::pi / 2.0;
    // split at pi/2 so endpoint behavior of fn on each side is isolated
    const double left = gauss_kronrod<double, 31>::integrate(integrand, 0.0, half, 30, 1e-13);
    const double right = gauss_kronrod<double, 31>::integrate(integrand, half, std::numbers::pi, 30, 1e-13);
    return params.c_4a * (left + right);
}

}  // namespace slelab
