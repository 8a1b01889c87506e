#include "slelab/cli.hpp"
#include "slelab/constants.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace slelab;

namespace {

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "slelab_cli_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p);
    f << text;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream f(p);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config round trip") {
    ExperimentConfig cfg;
    cfg.experiment = "two-point-crossval";
    cfg.kappa = 8.0 / 3.0;
    cfg.z = {0.1, 1.3};
    cfg.w = {2.0, 0.9};
    cfg.r_ladder = {0.5, 0.25};
    cfg.separations = {1.0, 2.0, 4.0};
    cfg.eps = 0.07;
    cfg.seed = 123456789012345ULL;
    cfg.workers = 3;
    cfg.output = "out dir/run";
    const auto path = scratch("round.toml");
    write_file(path, config_to_str(cfg));
    const ExperimentConfig parsed = parse_args({"--config", path.string()});
    CHECK(parsed == cfg);

    write_file(path, config_to_str(parsed));
    CHECK(parse_args({"--config", path.string()}) == parsed);
}

TEST_CASE("flags override the config file") {
    const auto path = scratch("override.toml");
    write_file(path, "experiment = \"one-point\"\nkappa = 4\nn_samples = 77\nz = [0.5, 2]\n");
    const ExperimentConfig c = parse_args({"--config", path.string(), "--kappa", "6", "--w", "3", "1.5"});
    CHECK(c.experiment == "one-point");
    CHECK(c.kappa == 6.0);
    CHECK(c.n_samples == 77);
    CHECK(c.z == std::vector<double>{0.5, 2.0});
    CHECK(c.w == std::vector<double>{3.0, 1.5});
    CHECK(parse_args({"c-star", "--config", path.string()}).experiment == "c-star");
}

TEST_CASE("parse errors") {
    CHECK_THROWS_AS((void)parse_args({"no-such-experiment"}), ConfigError);
    CHECK_THROWS_AS((void)parse_args({"c-star", "--kappa", "abc"}), ConfigError);
    CHECK_THROWS_AS((void)parse_args({"c-star", "--z", "1"}), ConfigError);
    CHECK_THROWS_AS((void)parse_args({}), ConfigError);
    CHECK_THROWS_AS((void)parse_args({"--help"}), HelpRequested);

    const auto path = scratch("bad.toml");
    write_file(path, "experiment = \"c-star\"\n# note\nkappa = 2\nkapa = 3\n");
    try {
        (void)parse_args({"--config", path.string()});
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 4") != std::string::npos);
        CHECK(msg.find("kapa") != std::string::npos);
    }
}

TEST_CASE("seed from the environment") {
    ::setenv("SLELAB_SEED", "4242", 1);
    CHECK(parse_args({"c-star"}).seed == 4242);
    CHECK(parse_args({"c-star", "--seed", "5"}).seed == 5);
    ::unsetenv("SLELAB_SEED");
    CHECK(parse_args({"c-star"}).seed == ExperimentConfig{}.seed);
}

TEST_CASE("c-star and domain errors") {
    ExperimentConfig cfg;
    cfg.experiment = "c-star";
    cfg.kappa = 8.0 / 3.0;
    std::ostringstream out, err;
    CHECK(run(cfg, out, err) == 0);
    const auto j = nlohmann::json::parse(out.str());
    CHECK(std::abs(j.at("result").at("c_star").get<double>() - 1.5) < 1e-12);
    CHECK(j.at("result").at("quadrature_error").get<double>() < 1e-10);
    CHECK(j.at("version").get<std::string>().size() > 0);
    CHECK(j.at("config").at("kappa").get<double>() == cfg.kappa);
    CHECK(err.str().find("c_star = 1.5") != std::string::npos);

    cfg.kappa = 9.0;
    std::ostringstream out2, err2;
    CHECK(run(cfg, out2, err2) != 0);
    CHECK(err2.str().find("kappa < 8") != std::string::npos);
}

TEST_CASE("validation precedes sampling") {
    ExperimentConfig cfg;
    cfg.experiment = "two-point-direct";
    cfg.eps = 1.5;
    CHECK_THROWS_AS(validate(cfg), DomainError);
    cfg.experiment = "one-point";
    cfg.r_ladder = {0.1, 0.2};
    CHECK_THROWS_AS(validate(cfg), DomainError);
    cfg.experiment = "beffara-scan";
    cfg.z = {0.0, 0.5};
    CHECK_THROWS_AS(validate(cfg), DomainError);
    cfg.z = {0.0, 1.0, 2.0};
    CHECK_THROWS_AS(validate(cfg), DomainError);
}

TEST_CASE("pde-residual table") {
    ExperimentConfig cfg;
    cfg.experiment = "pde-residual";
    cfg.kappa = 4.0;
    cfg.x = 0.3;
    cfg.y = 1.0;
    cfg.h = 1e-2;
    std::ostringstream out, err;
    REQUIRE(run(cfg, out, err) == 0);
    const auto table = nlohmann::json::parse(out.str()).at("result").at("table");
    REQUIRE(table.size() == 4);
    CHECK(table[1].at("ratio").get<double>() == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("plot data") {
    ScanResult empty;
    std::ostringstream os;
    CHECK_THROWS_AS(emit_plot_data(empty, os), DomainError);

    ExperimentConfig cfg;
    cfg.experiment = "one-point";
    cfg.kappa = 4.0;
    cfg.n_samples = 300;
    cfg.seed = 8;
    cfg.output = scratch("op").string();
    std::ostringstream out, err;
    REQUIRE(run(cfg, out, err) == 0);
    const std::string first = read_file(cfg.output + ".csv");
    CHECK(first.rfind("# axis: r\n", 0) == 0);
    CHECK(first.find("r,p_hat,stderr,reference\n") != std::string::npos);
    CHECK(first.find("0.20000000000000001,") != std::string::npos);

    const auto summary = nlohmann::json::parse(read_file(cfg.output + ".json"));
    CHECK(summary.at("seed").get<std::uint64_t>() == 8);
    CHECK(summary.at("config").at("n_samples").get<std::size_t>() == 300);

    REQUIRE(run(cfg, out, err) == 0);
    CHECK(read_file(cfg.output + ".csv") == first);

    cfg.output = "/nonexistent-dir/x";
    CHECK(run(cfg, out, err) == 4);
}

}  // TEST_SUITE
