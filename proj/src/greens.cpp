#include "slelab/greens.hpp"

#include <cmath>

namespace slelab {

double green_value(double upsilon, double sine, const SleParams& params) {
    return std::pow(upsilon, params.d - 2.0) * std::pow(sine, params.beta);
}

double green_halfplane(complex z, const SleParams& params) {
    if (!(z.imag() > 0.0)) throw DomainError("green_halfplane: point must lie in the upper half-plane");
    return green_value(z.imag(), z.imag() / std::abs(z), params);
}

GreensValue green_from_state(const MarkedPoint& mark, const SleParams& params) {
    GreensValue g{mark.upsilon(), mark.sine(), 0.0};
    if (mark.status == MarkStatus::swallowed) return g;
    g.value = green_value(g.upsilon, g.sine, params);
    return g;
}

std::pair<double, double> scaling_check(complex z, double r, const SleParams& params) {
    if (!(r > 0.0)) throw DomainError("scaling_check: dilation factor must be positive");
    const double lhs = green_halfplane(z, params);
    const double rhs = std::pow(r, 2.0 - params.d) * green_halfplane(r * z, params);
    return {lhs, rhs};
}

double pde_residual_one_point(double x, double y, double h, const SleParams& params) {
    if (!(y > 0.0)) throw DomainError("pde_residual_one_point: y must be positive");
    if (!(std::abs(x) / y < 50.0)) throw DomainError("pde_residual_one_point: |x|/y must be below 50");
    if (!(h > 0.0) || !(h < 0.5 * y)) {
        throw DomainError("pde_residual_one_point: stencil leaves the half-plane (need 0 < h < y/2)");
    }
    auto G = [&](double u, double v) { return green_halfplane(complex(u, v), params); };
    const double g0 = G(x, y);
    const double gxp = G(x + h, y), gxm = G(x - h, y);
    const double gyp = G(x, y + h), gym = G(x, y - h);
    const double gx = (gxp - gxm) / (2.0 * h);
    const double gy = (gyp - gym) / (2.0 * h);
    const double gxx = (gxp - 2.0 * g0 + gxm) / (h * h);
    const double r2 = x * x + y * y;
    const double a = params.a;
    return a * (params.d - 2.0) * (x * x - y * y) / (r2 * r2) * g0 + a * (x * gx - y * gy) / r2 + 0.5 * gxx;
}

}  // namespace slelab
