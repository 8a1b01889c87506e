#include "slelab/cli.hpp"

#include "slelab/constants.hpp"
#include "slelab/estimators.hpp"
#include "slelab/greens.hpp"
#include "slelab/rng.hpp"
#include "slelab/two_sided.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>
#include <type_traits>

#ifndef SLELAB_VERSION
#define SLELAB_VERSION "unknown"
#endif

namespace slelab {

namespace {

template <class Cfg, class F>
void for_each_field(Cfg& c, F&& f) {
    f("kappa", c.kappa, "SLE parameter, 0 < kappa < 8");
    f("z", c.z, "target point as: re im");
    f("w", c.w, "second point as: re im");
    f("r_ladder", c.r_ladder, "one-point radii, strictly decreasing");
    f("eps_ladder", c.eps_ladder, "Beffara eps ladder, strictly decreasing");
    f("delta_ladder", c.delta_ladder, "Beffara delta ladder, strictly decreasing");
    f("separations", c.separations, "Beffara |z-w| scan: w = z + s for each s");
    f("eps", c.eps, "threshold at z");
    f("delta", c.delta, "threshold at w");
    f("eps_cutoff", c.eps_cutoff, "conditioned-run cutoff for the inner Green's function");
    f("n_samples", c.n_samples, "Monte Carlo paths");
    f("n_two_sided", c.n_two_sided, "conditioned paths for rn-consistency");
    f("dt0", c.dt0, "capacity step as a fraction of |Z|^2");
    f("seed", c.seed, "master seed (default from SLELAB_SEED)");
    f("workers", c.workers, "worker threads");
    f("clones", c.clones, "splitting clone count");
    f("horizon_factor", c.horizon_factor, "t_max = horizon_factor |z|^2");
    f("x", c.x, "pde-residual: real part");
    f("y", c.y, "pde-residual: imaginary part");
    f("h", c.h, "pde-residual: largest stencil spacing");
    f("chains", c.chains, "invariant-density: independent chains");
    f("burn_in", c.burn_in, "invariant-density: radial burn-in time");
    f("spacing", c.spacing, "invariant-density: radial time between samples");
    f("theta_dt", c.theta_dt, "invariant-density: radial step");
    f("output", c.output, "output prefix");
}

std::string format_double(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

template <class T>
std::string format_value(const T& v) {
    if constexpr (std::is_same_v<T, std::string>) {
        return nlohmann::json(v).dump();
    } else if constexpr (std::is_same_v<T, double>) {
        return format_double(v);
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
        std::string out = "[";
        for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_double(v[i]);
        return out + "]";
    } else {
        return std::to_string(v);
    }
}

// Line numbers of `key = ...` entries in a config file mentioned by `message`.
std::string locate_in_config(const std::string& path, const std::string& message) {
    std::ifstream in(path);
    std::string line, where;
    for (int n = 1; std::getline(in, line); ++n) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        key.erase(0, key.find_first_not_of(" \t"));
        key.erase(key.find_last_not_of(" \t") + 1);
        if (!key.empty() && key[0] != '#' && message.find(key) != std::string::npos) {
            where += (where.empty() ? "" : ", ") + std::string("line ") + std::to_string(n) + " (" + key + ")";
        }
    }
    return where;
}

complex point(const std::vector<double>& p) { return {p[0], p[1]}; }

nlohmann::json config_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["experiment"] = cfg.experiment;
    for_each_field(cfg, [&](const char* name, const auto& v, const char*) { j[name] = v; });
    return j;
}

SamplingOptions sampling_options(const ExperimentConfig& cfg) {
    SamplingOptions o;
    o.flow.step_fraction = cfg.dt0;
    o.workers = std::max(1u, cfg.workers);
    o.clones = cfg.clones;
    o.horizon_factor = cfg.horizon_factor;
    return o;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw DomainError(what);
}

void require_ladder(const std::vector<double>& l, const std::string& name, double upper) {
    require(!l.empty(), name + ": ladder is empty");
    for (std::size_t i = 0; i < l.size(); ++i) {
        require(l[i] > 0.0 && l[i] <= upper, name + ": entries must lie in (0, " + format_double(upper) + "]");
        if (i) require(l[i] < l[i - 1], name + ": must be strictly decreasing");
    }
}

ScanResult theta_histogram(const SleParams& params, const std::vector<double>& samples, std::size_t bins) {
    constexpr double kPi = std::numbers::pi;
    const double width = kPi / static_cast<double>(bins);
    std::vector<std::size_t> counts(bins, 0);
    for (double t : samples) ++counts[std::min(bins - 1, static_cast<std::size_t>(t / width))];
    const double n = static_cast<double>(samples.size());
    ScanResult s;
    s.axis_name = "theta";
    s.reference_name = "C_4a sin^4a (bin average)";
    for (std::size_t b = 0; b < bins; ++b) {
        const double lo = width * static_cast<double>(b);
        const double p = static_cast<double>(counts[b]) / n;
        McEstimate e;
        e.n = samples.size();
        e.mean = p / width;
        e.std_err = std::sqrt(p * (1.0 - p) / n) / width;
        e.ci_lo = e.mean - 1.96 * e.std_err;
        e.ci_hi = e.mean + 1.96 * e.std_err;
        s.axis.push_back(lo + 0.5 * width);
        s.estimates.push_back(e);
        s.reference.push_back((invariant_cdf(params, lo + width) - invariant_cdf(params, lo)) / width);
    }
    s.meta = {{"note", "stderr treats the samples as independent"}};
    return s;
}

}  // namespace

ExperimentConfig parse_args(const std::vector<std::string>& args) {
    ExperimentConfig cfg;
    CLI::App app{"Monte Carlo laboratory for chordal and two-sided radial SLE", "slelab"};
    app.set_help_flag("--help", "print this help and exit");
    app.set_version_flag("--version", SLELAB_VERSION);
    auto* config_opt = app.set_config("--config", "", "read `key = value` settings from this file");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.add_option("experiment", cfg.experiment, "experiment to run")
        ->check(CLI::IsMember(std::vector<std::string>(std::begin(kExperiments), std::end(kExperiments))));
    for_each_field(cfg, [&](const char* name, auto& v, const char* help) {
        auto* opt = app.add_option(std::string("--") + name, v, help);
        using T = std::remove_reference_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::vector<double>>) {
            if (std::string(name) == "z" || std::string(name) == "w") opt->expected(2);
        }
        if (std::string(name) == "seed") opt->envname("SLELAB_SEED");
    });

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        throw HelpRequested{app.help()};
    } catch (const CLI::CallForVersion&) {
        throw HelpRequested{SLELAB_VERSION "\n"};
    } catch (const CLI::ParseError& e) {
        std::string msg = e.what();
        if (config_opt->count() > 0) {
            const std::string path = config_opt->as<std::string>();
            const std::string where = locate_in_config(path, msg);
            msg = "config " + path + (where.empty() ? "" : " " + where) + ": " + msg;
        }
        throw ConfigError(msg);
    }
    if (cfg.experiment.empty()) throw ConfigError("no experiment given; choose one of the listed experiments");
    return cfg;
}

std::string config_to_str(const ExperimentConfig& cfg) {
    std::string out = "experiment = " + format_value(cfg.experiment) + "\n";
    for_each_field(cfg, [&](const char* name, const auto& v, const char*) {
        out += std::string(name) + " = " + format_value(v) + "\n";
    });
    return out;
}

void validate(const ExperimentConfig& cfg) {
    const auto& ex = cfg.experiment;
    require(std::find(std::begin(kExperiments), std::end(kExperiments), ex) != std::end(kExperiments),
            "experiment: unknown name '" + ex + "'");
    const SleParams params = make_params(cfg.kappa);
    (void)params;
    require(cfg.z.size() == 2 && cfg.w.size() == 2, "z, w: points take two values (re im)");
    const complex z = point(cfg.z), w = point(cfg.w);
    require(cfg.dt0 > 0.0 && cfg.dt0 <= 0.1, "dt0: must lie in (0, 0.1]");
    require(cfg.horizon_factor > 0.0, "horizon_factor: must be positive");
    const bool mc = ex != "c-star" && ex != "pde-residual";
    if (mc) require(cfg.n_samples > 0, "n_samples: must be positive");
    const bool uses_z = mc && ex != "invariant-density";
    if (uses_z) require(z.imag() > 0.0, "z: must lie in the upper half-plane");

    if (ex == "pde-residual") {
        require(cfg.y > 0.0, "y: must be positive");
        require(std::abs(cfg.x) / cfg.y < 50.0, "x: |x|/y must stay below 50");
        require(cfg.h > 0.0 && 2.0 * cfg.h < cfg.y, "h: need 0 < 2h < y");
    } else if (ex == "invariant-density") {
        require(cfg.chains > 0 && cfg.chains <= cfg.n_samples, "chains: need 1 <= chains <= n_samples");
        require(cfg.theta_dt > 0.0 && cfg.spacing >= cfg.theta_dt && cfg.burn_in >= 0.0,
                "theta_dt, spacing, burn_in: need 0 < theta_dt <= spacing and burn_in >= 0");
    } else if (ex == "one-point") {
        require_ladder(cfg.r_ladder, "r_ladder", 0.75);
    } else if (ex == "rn-consistency") {
        require(cfg.eps > 0.0 && cfg.eps < z.imag(), "eps: need 0 < eps < Im z");
        require(cfg.n_two_sided > 0, "n_two_sided: must be positive");
    } else if (ex == "inner-green" || ex == "two-point-factorized") {
        require(w.imag() > 0.0 && z != w, "w: must lie in the upper half-plane and differ from z");
        require(cfg.eps_cutoff > 0.0 && cfg.eps_cutoff < z.imag(), "eps_cutoff: need 0 < eps_cutoff < Im z");
    }
    if (ex == "two-point-direct" || ex == "two-point-crossval") {
        require(w.imag() > 0.0 && z != w, "w: must lie in the upper half-plane and differ from z");
        require(cfg.eps > 0.0 && cfg.eps < z.imag(), "eps: need 0 < eps < Im z");
        require(cfg.delta > 0.0 && cfg.delta < w.imag(), "delta: need 0 < delta < Im w");
        require(2.0 * cfg.eps < std::abs(z - w) && 2.0 * cfg.delta < std::abs(z - w),
                "eps, delta: the two targets must be separated by more than twice each threshold");
        require(cfg.clones > 0, "clones: must be positive");
    }
    if (ex == "two-point-crossval") {
        require(cfg.eps_cutoff > 0.0 && cfg.eps_cutoff < z.imag(), "eps_cutoff: need 0 < eps_cutoff < Im z");
    }
    if (ex == "beffara-scan") {
        require(z.imag() >= 1.0, "z: need Im z >= 1");
        if (cfg.separations.empty()) {
            require(w.imag() >= 1.0 && z != w, "w: need Im w >= 1 and w != z");
            require_ladder(cfg.eps_ladder, "eps_ladder", 1.0);
            require_ladder(cfg.delta_ladder, "delta_ladder", 1.0);
        } else {
            for (std::size_t i = 0; i < cfg.separations.size(); ++i) {
                require(cfg.separations[i] > 0.0, "separations: entries must be positive");
                if (i) require(cfg.separations[i] > cfg.separations[i - 1], "separations: must be increasing");
            }
            require(cfg.eps > 0.0 && cfg.delta > 0.0, "eps, delta: must be positive");
        }
    }
}

RunOutput run_experiment(const ExperimentConfig& cfg) {
    const SleParams params = make_params(cfg.kappa);
    const SamplingOptions opts = sampling_options(cfg);
    const complex z = point(cfg.z), w = point(cfg.w);
    const auto& ex = cfg.experiment;
    RunOutput out;
    auto& j = out.summary;

    if (ex == "c-star") {
        const QuadratureResult q = sine_power_quadrature(4.0 * params.a);
        j = {{"c_star", params.c_star},
             {"quadrature_error", 2.0 * q.error / (q.value * q.value)},
             {"c_4a", params.c_4a},
             {"a", params.a},
             {"d", params.d},
             {"beta", params.beta}};
    } else if (ex == "pde-residual") {
        const double g = green_halfplane({cfg.x, cfg.y}, params);
        nlohmann::json table = nlohmann::json::array();
        double prev = 0.0;
        for (int k = 0; k < 4; ++k) {
            const double h = cfg.h / std::pow(2.0, k);
            const double r = pde_residual_one_point(cfg.x, cfg.y, h, params);
            nlohmann::json row = {{"h", h}, {"residual", r}, {"relative", std::abs(r) / g}};
            if (k) row["ratio"] = prev / std::abs(r);
            table.push_back(row);
            prev = std::abs(r);
        }
        j = {{"green", g}, {"table", table}};
    } else if (ex == "invariant-density") {
        const std::size_t per_chain = (cfg.n_samples + cfg.chains - 1) / cfg.chains;
        const auto samples = theta_equilibrium_samples(params, cfg.chains, per_chain, cfg.burn_in, cfg.spacing,
                                                       cfg.theta_dt, cfg.seed);
        const double ks = ks_statistic(samples, [&](double t) { return invariant_cdf(params, t); });
        j = {{"ks", ks}, {"samples", samples.size()}};
        out.tables.emplace_back("", theta_histogram(params, samples, 50));
    } else if (ex == "one-point") {
        ScanResult s = one_point_limit(params, z, cfg.r_ladder, cfg.n_samples, cfg.seed, opts);
        j = to_json(s);
        out.tables.emplace_back("", std::move(s));
    } else if (ex == "rn-consistency") {
        j = to_json(rn_consistency(params, z, cfg.eps, cfg.n_samples, cfg.n_two_sided, cfg.seed, opts));
    } else if (ex == "inner-green") {
        j = to_json(estimate_inner_green(params, z, w, cfg.eps_cutoff, cfg.n_samples, cfg.seed, opts));
    } else if (ex == "two-point-direct") {
        j = to_json(two_point_direct(params, z, w, cfg.eps, cfg.delta, cfg.n_samples, cfg.seed, opts));
    } else if (ex == "two-point-factorized") {
        j = to_json(two_point_factorized(params, z, w, cfg.eps_cutoff, cfg.n_samples, cfg.seed, opts));
    } else if (ex == "two-point-crossval") {
        const McEstimate direct = two_point_direct(params, z, w, cfg.eps, cfg.delta, cfg.n_samples, cfg.seed, opts);
        const McEstimate fac =
            two_point_factorized(params, z, w, cfg.eps_cutoff, cfg.n_samples, stream_key(cfg.seed, 1), opts);
        j = to_json(cross_validate(direct, fac));
    } else if (ex == "beffara-scan") {
        if (cfg.separations.empty()) {
            BeffaraScan b = beffara_scan(params, z, w, cfg.eps_ladder, cfg.delta_ladder, cfg.n_samples, cfg.seed, opts);
            j = to_json(b);
            out.tables.emplace_back("", std::move(b.eps_scan));
            out.tables.emplace_back("_delta", std::move(b.delta_scan));
        } else {
            std::vector<complex> ws;
            for (double s : cfg.separations) ws.push_back(z + s);
            ScanResult s = beffara_distance_scan(params, z, ws, cfg.eps, cfg.delta, cfg.n_samples, cfg.seed, opts);
            j = to_json(s);
            out.tables.emplace_back("", std::move(s));
        }
    }
    return out;
}

void emit_plot_data(const ScanResult& result, std::ostream& out) {
    if (result.axis.empty() || result.axis.size() != result.estimates.size()) {
        throw DomainError("emit_plot_data: the scan has no points");
    }
    const bool ref = result.reference.size() == result.axis.size();
    out << "# axis: " << result.axis_name << "\n";
    out << "# p_hat: Monte Carlo estimate, stderr: its standard error\n";
    if (ref) out << "# reference: " << result.reference_name << "\n";
    out << result.axis_name << ",p_hat,stderr" << (ref ? ",reference" : "") << "\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < result.axis.size(); ++i) {
        out << result.axis[i] << ',' << result.estimates[i].mean << ',' << result.estimates[i].std_err;
        if (ref) out << ',' << result.reference[i];
        out << '\n';
    }
}

void emit_plot_data(const ScanResult& result, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::ios_base::failure("cannot open " + path + " for writing");
    emit_plot_data(result, f);
    f.flush();
    if (!f) throw std::ios_base::failure("write to " + path + " failed");
}

int run(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        validate(cfg);
        const auto t0 = std::chrono::steady_clock::now();
        RunOutput r = run_experiment(cfg);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        nlohmann::json summary = {{"experiment", cfg.experiment},
                                  {"result", r.summary},
                                  {"config", config_json(cfg)},
                                  {"seed", cfg.seed},
                                  {"version", SLELAB_VERSION},
                                  {"wall_seconds", wall}};
        if (cfg.output.empty()) {
            out << summary.dump(2) << "\n";
        } else {
            std::ofstream f(cfg.output + ".json");
            if (!f) throw std::ios_base::failure("cannot open " + cfg.output + ".json for writing");
            f << summary.dump(2) << "\n";
            for (const auto& [suffix, table] : r.tables) emit_plot_data(table, cfg.output + suffix + ".csv");
        }
        if (cfg.experiment == "c-star") {
            err << "c_star = " << format_double(r.summary["c_star"].get<double>()) << " +- "
                << r.summary["quadrature_error"].get<double>() << "\n";
        }
        return 0;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::ios_base::failure& e) {
        err << "i/o error: " << e.what() << "\n";
        return 4;
    }
}

int main_entry(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    ExperimentConfig cfg;
    try {
        cfg = parse_args(args);
    } catch (const HelpRequested& h) {
        std::cout << h.text;
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return run(cfg, std::cout, std::cerr);
}

}  // namespace slelab
