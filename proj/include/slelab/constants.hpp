#pragma once

#include <numbers>
#include <stdexcept>
#include <string>

namespace slelab {

/// Raised when a parameter lies outside the domain an operation supports.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Raised when a discretization is too coarse or a numerical routine fails.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// kappa and every constant derived from it.
///
/// Time is half-plane capacity growing at rate a = 2/kappa, so the driving
/// function is a *standard* Brownian motion (variance t). This differs from
/// the common rate-2 convention, where the driving variance is kappa * t.
struct SleParams {
    double kappa = 0.0;
    double a = 0.0;      // 2 / kappa
    double d = 0.0;      // 1 + kappa / 8, dimension of the curve
    double beta = 0.0;   // 8 / kappa - 1 = 4a - 1
    double c_4a = 0.0;   // 1 / int_0^pi sin^{4a}
    double c_star = 0.0; // 2 / int_0^pi sin^{4a} = 2 c_4a

    /// 2 - d, the one-point exponent.
    [[nodiscard]] double one_point_exponent() const noexcept { return 2.0 - d; }
};

/// Builds the parameter set for 0 < kappa < 8. The normalizing integral is
/// evaluated once here so hot loops never touch quadrature.
[[nodiscard]] SleParams make_params(double kappa);

/// Stationary density c_4a sin^{4a}(theta) of the conditioned angle process.
[[nodiscard]] double invariant_density(const SleParams& params, double theta);

/// Cumulative distribution of invariant_density on (0, pi).
[[nodiscard]] double invariant_cdf(const SleParams& params, double theta);

/// int_0^pi sin^p(x) dx by adaptive Gauss-Kronrod quadrature, p > 0.
[[nodiscard]] double sine_power_integral(double p);

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;  // Kronrod error estimate
};

[[nodiscard]] QuadratureResult sine_power_quadrature(double p);

/// int_0^pi F(x) f(x) dx for the invariant density f; I_F in the one-point
/// asymptotics. F must be integrable against sin^{4a}.
template <class F>
[[nodiscard]] double invariant_average(const SleParams& params, F&& fn);

}  // namespace slelab

#include "slelab/detail/constants_impl.hpp"
