#include "slelab/stats.hpp"

#include "slelab/constants.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace slelab {

void Accumulator::add(double x) noexcept {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
}

void Accumulator::merge(const Accumulator& other) noexcept {
    if (other.n_ == 0) return;
    if (n_ == 0) {
        *this = other;
        return;
    }
    const double na = static_cast<double>(n_);
    const double nb = static_cast<double>(other.n_);
    const double n = na + nb;
    const double delta = other.mean_ - mean_;
    mean_ += delta * nb / n;
    m2_ += other.m2_ + delta * delta * na * nb / n;
    n_ += other.n_;
}

double Accumulator::variance() const noexcept {
    return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
}

double Accumulator::stderr_of_mean() const noexcept {
    return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
}

McEstimate McEstimate::from(const Accumulator& acc, double scale) {
    McEstimate e;
    e.n = acc.count();
    e.mean = scale * acc.mean();
    e.std_err = std::abs(scale) * acc.stderr_of_mean();
    e.ci_lo = e.mean - 1.96 * e.std_err;
    e.ci_hi = e.mean + 1.96 * e.std_err;
    return e;
}

nlohmann::json to_json(const McEstimate& e) {
    return {
        {"n", e.n},
        {"mean", e.mean},
        {"stderr", e.std_err},
        {"ci95", {e.ci_lo, e.ci_hi}},
        {"n_discarded", e.n_discarded},
        {"successes", e.successes},
        {"meta", e.meta},
    };
}

PowerFit fit_power_law(std::span<const double> x, std::span<const double> y, std::span<const double> sigma_y) {
    if (x.size() != y.size() || (!sigma_y.empty() && sigma_y.size() != y.size())) {
        throw DomainError("fit_power_law: mismatched input lengths");
    }
    bool unit = sigma_y.empty();
    for (std::size_t i = 0; i < y.size() && !unit; ++i) {
        if (y[i] > 0.0 && !(sigma_y[i] > 0.0)) unit = true;
    }
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(y[i] > 0.0) || !(x[i] > 0.0)) continue;
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        // var(log y) ~ (sigma / y)^2
        const double w = unit ? 1.0 : (y[i] * y[i]) / (sigma_y[i] * sigma_y[i]);
        sw += w;
        sx += w * lx;
        sy += w * ly;
        sxx += w * lx * lx;
        sxy += w * lx * ly;
        ++used;
    }
    if (used < 2) throw NumericalError("fit_power_law: fewer than two positive points");
    const double det = sw * sxx - sx * sx;
    if (!(std::abs(det) > 0.0)) throw NumericalError("fit_power_law: degenerate abscissae");
    PowerFit fit;
    fit.exponent = (sw * sxy - sx * sy) / det;
    fit.log_prefactor = (sxx * sy - sx * sxy) / det;
    fit.exponent_stderr = unit ? 0.0 : std::sqrt(sw / det);
    return fit;
}

LinearFit fit_log_linear(const std::vector<std::vector<double>>& x, std::span<const double> y,
                         std::span<const double> sigma_y) {
    if (x.size() != y.size() || sigma_y.size() != y.size()) throw DomainError("fit_log_linear: mismatched lengths");
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] > 0.0 && sigma_y[i] > 0.0) rows.push_back(i);
    }
    const std::size_t k = x.empty() ? 0 : x.front().size() + 1;
    if (k == 0 || rows.size() < k) throw NumericalError("fit_log_linear: too few usable points");
    Eigen::MatrixXd A(rows.size(), k);
    Eigen::VectorXd b(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t i = rows[r];
        if (x[i].size() + 1 != k) throw DomainError("fit_log_linear: ragged regressors");
        const double sw = y[i] / sigma_y[i];
        A(r, 0) = sw;
        for (std::size_t c = 1; c < k; ++c) {
            if (!(x[i][c - 1] > 0.0)) throw DomainError("fit_log_linear: regressors must be positive");
            A(r, c) = sw * std::log(x[i][c - 1]);
        }
        b(r) = sw * std::log(y[i]);
    }
    const Eigen::MatrixXd normal = A.transpose() * A;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) throw NumericalError("fit_log_linear: singular design");
    const Eigen::VectorXd coef = ldlt.solve(A.transpose() * b);
    const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
    LinearFit fit;
    for (std::size_t c = 0; c < k; ++c) {
        fit.coef.push_back(coef(c));
        fit.stderr_.push_back(std::sqrt(std::max(cov(c, c), 0.0)));
    }
    return fit;
}

void ScanResult::refit() {
    std::vector<double> y, s;
    for (const auto& e : estimates) {
        y.push_back(e.mean);
        s.push_back(e.std_err);
    }
    fit = fit_power_law(axis, y, s);
}

nlohmann::json to_json(const ScanResult& s) {
    nlohmann::json est = nlohmann::json::array();
    for (const auto& e : s.estimates) est.push_back(to_json(e));
    nlohmann::json j = {
        {"axis_name", s.axis_name},
        {"axis", s.axis},
        {"estimates", est},
        {"fitted_exponent", s.fit.exponent},
        {"fitted_exponent_stderr", s.fit.exponent_stderr},
        {"log_prefactor", s.fit.log_prefactor},
        {"meta", s.meta},
    };
    if (!s.reference.empty()) {
        j["reference_name"] = s.reference_name;
        j["reference"] = s.reference;
    }
    return j;
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) throw DomainError("ks_statistic: no samples");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

double ks_statistic_weighted(std::vector<std::pair<double, double>> samples,
                             const std::function<double(double)>& cdf) {
    if (samples.empty()) throw DomainError("ks_statistic_weighted: no samples");
    std::sort(samples.begin(), samples.end());
    double total = 0.0;
    for (const auto& [x, w] : samples) {
        if (!(w >= 0.0)) throw DomainError("ks_statistic_weighted: weights must be nonnegative");
        total += w;
    }
    if (!(total > 0.0)) throw DomainError("ks_statistic_weighted: total weight is zero");
    double below = 0.0;
    double d = 0.0;
    for (const auto& [x, w] : samples) {
        const double f = cdf(x);
        const double above = below + w / total;
        d = std::max({d, above - f, f - below});
        below = above;
    }
    return d;
}

double effective_sample_size(std::span<const double> weights) {
    double s = 0.0, s2 = 0.0;
    for (double w : weights) {
        s += w;
        s2 += w * w;
    }
    return s2 > 0.0 ? s * s / s2 : 0.0;
}

}  // namespace slelab
