#pragma once

#include <json.hpp>

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace slelab {

/// Streaming mean/variance (Welford) with exact-formula merging (Chan et al.).
class Accumulator {
public:
    void add(double x) noexcept;
    void merge(const Accumulator& other) noexcept;

    [[nodiscard]] std::size_t count() const noexcept { return n_; }
    [[nodiscard]] double mean() const noexcept { return mean_; }
    /// Unbiased sample variance; 0 for fewer than two samples.
    [[nodiscard]] double variance() const noexcept;
    [[nodiscard]] double stderr_of_mean() const noexcept;

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// Monte Carlo estimate with its sampling error.
struct McEstimate {
    std::size_t n = 0;
    double mean = 0.0;
    double std_err = 0.0;  // sample std / sqrt(n)
    double ci_lo = 0.0;   // mean - 1.96 stderr
    double ci_hi = 0.0;
    std::size_t n_discarded = 0;
    std::size_t successes = 0;  // event count where meaningful
    nlohmann::json meta = nlohmann::json::object();

    /// Estimate of scale * X from an accumulator of X.
    [[nodiscard]] static McEstimate from(const Accumulator& acc, double scale = 1.0);
    [[nodiscard]] double relative_error() const noexcept { return mean != 0.0 ? std_err / mean : 0.0; }
};

[[nodiscard]] nlohmann::json to_json(const McEstimate& e);

/// Weighted least-squares fit log y = log c + p log x.
struct PowerFit {
    double exponent = 0.0;
    double exponent_stderr = 0.0;
    double log_prefactor = 0.0;
};

/// Fits y ~ c x^p with weights (y / sigma_y)^2 in log space. Points with
/// y <= 0 are skipped; throws if fewer than two usable points remain. A zero
/// sigma falls back to unit weights for all points.
[[nodiscard]] PowerFit fit_power_law(std::span<const double> x, std::span<const double> y,
                                     std::span<const double> sigma_y);

/// Weighted least squares for log y = b_0 + sum_k b_k log x_k, weights
/// (y / sigma_y)^2. Row i of `x` holds the regressors of point i.
struct LinearFit {
    std::vector<double> coef;    // b_0, b_1, ...
    std::vector<double> stderr_; // matching standard errors
};

[[nodiscard]] LinearFit fit_log_linear(const std::vector<std::vector<double>>& x, std::span<const double> y,
                                       std::span<const double> sigma_y);

/// A sequence of estimates along a scanned parameter.
struct ScanResult {
    std::string axis_name;
    std::vector<double> axis;
    std::vector<McEstimate> estimates;
    PowerFit fit;
    /// Reference curve evaluated on the axis (empty when none applies).
    std::string reference_name;
    std::vector<double> reference;
    nlohmann::json meta = nlohmann::json::object();

    /// Fits the estimates against the axis and stores the result in `fit`.
    void refit();
};

[[nodiscard]] nlohmann::json to_json(const ScanResult& s);

/// sup |F_n - F| for the empirical distribution of `samples`.
[[nodiscard]] double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

/// Same with nonnegative sample weights (normalized internally).
[[nodiscard]] double ks_statistic_weighted(std::vector<std::pair<double, double>> samples,
                                           const std::function<double(double)>& cdf);

/// Kish effective sample size of a weight vector.
[[nodiscard]] double effective_sample_size(std::span<const double> weights);

}  // namespace slelab
