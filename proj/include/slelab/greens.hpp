#pragma once

#include "slelab/constants.hpp"
#include "slelab/loewner.hpp"

#include <utility>

namespace slelab {

/// G = upsilon^{d-2} sine^beta for a point with conformal radius `upsilon`
/// and boundary-angle sine `sine`.
struct GreensValue {
    double upsilon = 0.0;
    double sine = 0.0;
    double value = 0.0;
};

/// Green's function of chordal SLE from 0 to infinity in the half-plane:
/// Im(z)^{d-2} sin(arg z)^beta.
[[nodiscard]] double green_halfplane(complex z, const SleParams& params);

/// upsilon^{d-2} sine^beta.
[[nodiscard]] double green_value(double upsilon, double sine, const SleParams& params);

/// M_t(z) = G_{H_t}(z; gamma(t), infinity) from the mark's state. A swallowed
/// mark can no longer be reached and carries value 0.
[[nodiscard]] GreensValue green_from_state(const MarkedPoint& mark, const SleParams& params);

/// Dilation covariance G(z) = r^{2-d} G(r z); returns (lhs, rhs).
[[nodiscard]] std::pair<double, double> scaling_check(complex z, double r, const SleParams& params);

/// One-point generator applied to G by central differences of spacing h:
///   a(d-2)(x^2-y^2)/(x^2+y^2)^2 G + a(x G_x - y G_y)/(x^2+y^2) + G_xx / 2.
/// Zero in the continuum because G(Z_t)|g_t'|^{2-d} is a local martingale.
[[nodiscard]] double pde_residual_one_point(double x, double y, double h, const SleParams& params);

}  // namespace slelab
