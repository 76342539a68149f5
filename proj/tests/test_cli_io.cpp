#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>
#include <string>

#include "frontlab/cli_io.hpp"
#include "frontlab/errors.hpp"

using namespace frontlab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("frontlab_test_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string config_error_key(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "<no error>";
}

ExperimentConfig into(const fs::path& out) {
    ExperimentConfig c;
    c.output.path = out.string();
    return c;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(FRONTLAB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("empty config gives the documented defaults") {
    const ExperimentConfig c = parse_config(std::nullopt);
    CHECK(c.nonlinearity.theta == 0.25);
    CHECK(c.dim == 2);
    CHECK(c.grid.dr == 0.05);
    CHECK(c.time.t_final == 400.0);
    CHECK(c.grid.J == 256);
    CHECK(c.time.t_start == 1.0);
    CHECK(config_from_json(json::object()).certificate.T_start == 1e3);
}

TEST_CASE("flags override the file; nested and dotted keys agree") {
    const fs::path dir = scratch("precedence");
    {
        std::ofstream(dir / "c.json") << R"({"nonlinearity": {"theta": 0.25}, "time.t_final": 50})";
    }
    const ExperimentConfig c = parse_config(dir / "c.json", {{"nonlinearity.theta", "0.3"}});
    CHECK(c.nonlinearity.theta == 0.3);
    CHECK(c.time.t_final == 50.0);

    const json nested = {{"grid", {{"J", 64}, {"dr", 0.1}}}};
    const json dotted = {{"grid.J", 64}, {"grid.dr", 0.1}};
    CHECK(config_hash(config_from_json(nested)) == config_hash(config_from_json(dotted)));

    // Later overrides win.
    CHECK(parse_config(std::nullopt, {{"dim", "3"}, {"dim", "1"}}).dim == 1);
}

TEST_CASE("config errors name the key") {
    CHECK(config_error_key([] { config_from_json({{"nonlinearity", {{"theta", 0.6}}}}); }) == "nonlinearity.theta");
    try {
        config_from_json({{"nonlinearity.theta", 0.6}});
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("(0, 1/2)") != std::string::npos);
    }
    CHECK(config_error_key([] { config_from_json({{"grid", {{"Jx", 3}}}}); }) == "grid.Jx");
    CHECK(config_error_key([] { config_from_json({{"bogus", 1}}); }) == "bogus");
    CHECK(config_error_key([] { config_from_json({{"grid.J", 2.5}}); }) == "grid.J");
    CHECK(config_error_key([] { config_from_json({{"nonlinearity.theta", "x"}}); }) == "nonlinearity.theta");
    CHECK(config_error_key([] { config_from_json({{"dim", {{"x", 1}}}}); }) == "dim");
    CHECK(config_error_key([] { parse_config(std::nullopt, {{"grid.dr", "0.05x"}}); }) == "grid.dr");
    CHECK(config_error_key([] { parse_config(std::nullopt, {{"no.such", "1"}}); }) == "no.such");
    CHECK(config_error_key([] { config_from_json({{"time.t_start", 0.0}}); }) == "time.t_start");
    CHECK(config_error_key([] { config_from_json({{"datum.r2", 1.0}}); }) == "datum.r2");
    CHECK(config_error_key([] { config_from_json({{"certificate.system", "42"}}); }) == "certificate.system");
    CHECK(config_error_key([] { parse_config(fs::path("/nonexistent/c.json")); }) == "--config");
    // Optional fields accept null and their value type.
    CHECK_FALSE(config_from_json({{"fit.window_lo", nullptr}}).fit.window_lo.has_value());
    CHECK(*parse_config(std::nullopt, {{"certificate.search_start", "true"}}).certificate.search_start);
}

TEST_CASE("config round-trips through JSON and the hash ignores output and threads") {
    ExperimentConfig c;
    c.nonlinearity.theta = 0.3;
    c.fit.window_lo = 100.0;
    c.certificate.search_start = false;
    const ExperimentConfig back = config_from_json(config_to_json(c));
    CHECK(config_to_json(back) == config_to_json(c));
    CHECK(config_hash(back) == config_hash(c));

    ExperimentConfig moved = c;
    moved.output.dir = "elsewhere";
    moved.threads = 7;
    CHECK(config_hash(moved) == config_hash(c));
    ExperimentConfig changed = c;
    changed.nonlinearity.theta = 0.31;
    CHECK(config_hash(changed) != config_hash(c));
}

TEST_CASE("FNV-1a 64 matches the published test vectors") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
    CHECK(hash_hex(0xaf63dc4c8601ec8cULL) == "af63dc4c8601ec8c");
}

TEST_CASE("17 significant digits round-trip every double") {
    CHECK(format_number(0.1) == "0.10000000000000001");
    CHECK(format_number(0.1, 15) == "0.1");
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> mant(-1.0, 1.0);
    std::uniform_int_distribution<int> ex(-300, 300);
    for (int i = 0; i < 10000; ++i) {
        const double x = std::ldexp(mant(rng), ex(rng));
        CHECK(std::stod(format_number(x)) == x);
    }
}

TEST_CASE("CSV write and read are exact") {
    const fs::path dir = scratch("csv");
    std::vector<double> a{1.0 / 3.0, -2e-300, 12345.678901234567}, b{0.0, 1e300, -0.5};
    write_csv(dir / "x.csv", {"a", "b"}, {&a, &b});
    CHECK(slurp(dir / "x.csv").starts_with("a,b\n"));
    const CsvTable t = read_csv(dir / "x.csv");
    CHECK(t.column("a") == a);
    CHECK(t.column("b") == b);
    CHECK(config_error_key([&] { t.column("c"); }) == "input");
    {
        std::ofstream(dir / "bad.csv") << "a,b\n1,zz\n";
    }
    CHECK(config_error_key([&] { read_csv(dir / "bad.csv"); }) == "input");
    std::vector<double> short_col{1.0};
    CHECK_THROWS_AS(write_csv(dir / "y.csv", {"a", "b"}, {&a, &short_col}), std::invalid_argument);
}

TEST_CASE("run directories are timestamp_hash and never reused") {
    const fs::path base = scratch("rundirs");
    const fs::path d1 = make_run_directory(base, 0xabcULL);
    const fs::path d2 = make_run_directory(base, 0xabcULL);
    CHECK(std::regex_match(d1.filename().string(), std::regex(R"(\d{8}T\d{6}_0000000000000abc(_\d+)?)")));
    CHECK(d1 != d2);
    CHECK(fs::is_directory(d1));
    CHECK(fs::is_directory(d2));

    ExperimentConfig c;
    c.output.dir = (base / "auto").string();
    const RunReport r = run_experiment(c, Subcommand::profile);
    CHECK(r.directory.parent_path() == base / "auto");
    CHECK(r.directory.filename().string().ends_with(hash_hex(config_hash(c))));
    CHECK(fs::exists(r.directory / "report.json"));
    CHECK(fs::exists(r.directory / "config.json"));
}

TEST_CASE("profile subcommand: speed in the report, byte-identical reruns") {
    const fs::path dir = scratch("profile");
    const RunReport a = run_experiment(into(dir / "a"), Subcommand::profile);
    const RunReport b = run_experiment(into(dir / "b"), Subcommand::profile);
    CHECK(std::abs(a.json["results"]["c_star"].get<double>() - 0.3535534) < 1e-7);
    CHECK(a.pass());
    CHECK(slurp(dir / "a" / "profile.csv").starts_with("xi,u,du\n"));
    CHECK(slurp(dir / "a" / "profile.csv") == slurp(dir / "b" / "profile.csv"));
    CHECK(slurp(dir / "a" / "report.json") == slurp(dir / "b" / "report.json"));
    const json echo = json::parse(slurp(dir / "a" / "config.json"));
    CHECK(echo == config_to_json(into(dir / "a")));
    const json rep = json::parse(slurp(dir / "a" / "report.json"));
    CHECK(rep.contains("config_hash"));
    CHECK(rep["versions"].contains("cli_io"));

    // An explicit file name puts the companions beside it with the stem as prefix.
    const RunReport f = run_experiment(into(dir / "c" / "wave.csv"), Subcommand::profile);
    CHECK(fs::exists(dir / "c" / "wave.csv"));
    CHECK(fs::exists(dir / "c" / "wave_report.json"));
    CHECK(fs::exists(dir / "c" / "wave_config.json"));
}

TEST_CASE("simulate1d then fit: k_fit and its target in the reports") {
    const fs::path dir = scratch("sim1d");
    ExperimentConfig c = into(dir / "run");
    c.time.t_final = 40.0;
    c.time.field_every = 20.0;
    const RunReport sim = run_experiment(c, Subcommand::simulate1d);
    const CsvTable fronts = read_csv(dir / "run" / "fronts.csv");
    CHECK(fronts.header == std::vector<std::string>{"t", "r_level", "delay"});
    CHECK(fronts.column("t").size() == 39);  // t = 2..40
    const CsvTable snaps = read_csv(dir / "run" / "snapshots.csv");
    CHECK(snaps.header == std::vector<std::string>{"t", "r", "u"});
    CHECK(snaps.column("t").front() == 20.0);
    CHECK(snaps.column("t").back() == 40.0);
    CHECK(sim.json["results"]["fit"].contains("k_fit"));

    ExperimentConfig f = into(dir / "run" / "fit.json");
    f.fit.fronts_path = (dir / "run" / "fronts.csv").string();
    const RunReport fit = run_experiment(f, Subcommand::fit);
    const json fj = json::parse(slurp(dir / "run" / "fit.json"));
    for (const char* key : {"c_fit", "k_fit", "s_fit", "residual_rms", "window", "mode"}) CHECK(fj.contains(key));
    CHECK(fj["mode"] == "fixed_speed");
    CHECK(fit.json["results"]["k_target"].get<double>() == doctest::Approx(1.0 / 0.35355339059327373).epsilon(1e-9));
    CHECK(fj["k_fit"] == sim.json["results"]["fit"]["k_fit"]);

    // Seeded noise: same seed, same fit.
    f.fit.noise = 0.05;
    f.seed = 11;
    f.output.path = (dir / "n1.json").string();
    run_experiment(f, Subcommand::fit);
    f.output.path = (dir / "n2.json").string();
    run_experiment(f, Subcommand::fit);
    CHECK(slurp(dir / "n1.json") == slurp(dir / "n2.json"));
    CHECK(slurp(dir / "n1.json") != slurp(dir / "run" / "fit.json"));
}

TEST_CASE("simulate2d writes the documented files, independent of the thread count") {
    const fs::path dir = scratch("sim2d");
    ExperimentConfig c;
    c.datum.a = 12.0;
    c.datum.b = 8.0;
    c.grid.J = 32;
    c.time.t_final = 12.0;
    c.time.snapshot_every = 2.0;
    c.time.field_every = 6.0;
    c.threads = 1;
    c.output.path = (dir / "one").string();
    const RunReport one = run_experiment(c, Subcommand::simulate2d);
    c.threads = 3;
    c.output.path = (dir / "three").string();
    run_experiment(c, Subcommand::simulate2d);
    for (const char* name : {"shift.csv", "diagnostics.csv", "field_t6.csv", "field_t12.csv", "report.json"}) {
        CAPTURE(name);
        REQUIRE(fs::exists(dir / "one" / name));
        CHECK(slurp(dir / "one" / name) == slurp(dir / "three" / name));
    }
    CHECK(read_csv(dir / "one" / "shift.csv").header == std::vector<std::string>{"theta_rad", "s_value"});
    CHECK(read_csv(dir / "one" / "diagnostics.csv").header ==
          std::vector<std::string>{"t", "grad_theta_max", "sup_err_vs_shifted_wave", "min_V_window"});
    CHECK(read_csv(dir / "one" / "diagnostics.csv").column("t").size() == 6);
    CHECK(read_csv(dir / "one" / "field_t6.csv").header == std::vector<std::string>{"r", "theta", "u"});
    CHECK(one.json["results"]["s_range"].get<double>() > 0.0);

    ExperimentConfig bad = c;
    bad.dim = 3;
    CHECK(config_error_key([&] { run_experiment(bad, Subcommand::simulate2d); }) == "dim");
}

TEST_CASE("certify writes cert.json with the mandated keys and certificate.csv") {
    const fs::path dir = scratch("certify");
    const RunReport r = run_experiment(into(dir / "d"), Subcommand::certify);
    const json cert = json::parse(slurp(dir / "d" / "cert.json"));
    for (const char* key :
         {"params", "envelope_pass", "K", "residual_min", "condition_4_12_pass", "condition_4_14_pass"}) {
        CHECK(cert.contains(key));
    }
    CHECK(cert["envelope_pass"] == true);
    CHECK(cert["params"]["delta"] == 1.0);
    CHECK(r.pass());
    const CsvTable t = read_csv(dir / "d" / "certificate.csv");
    CHECK(t.header == std::vector<std::string>{"t", "q", "xi"});
    CHECK(t.column("t").size() == 1001);

    ExperimentConfig g = into(dir / "g");
    g.certificate.system = "310";
    g.certificate.eps = 0.02;
    run_experiment(g, Subcommand::certify);
    const json growth = json::parse(slurp(dir / "g" / "cert.json"));
    CHECK(growth["growth_exponent"].get<double>() > 0.0);
    CHECK(growth["K"].is_null());
}

TEST_CASE("module errors carry the subcommand") {
    const fs::path dir = scratch("errors");
    std::vector<double> t{2, 3, 4}, r{1, 2, 3};
    write_csv(dir / "few.csv", {"t", "r_level"}, {&t, &r});
    ExperimentConfig f = into(dir / "fit.json");
    f.fit.fronts_path = (dir / "few.csv").string();
    try {
        run_experiment(f, Subcommand::fit);
        CHECK(false);
    } catch (const NumericalError& e) {
        CHECK(e.kind() == NumericalError::Kind::fit);
        CHECK(std::string(e.what()).starts_with("fit: "));
    }
    ExperimentConfig none = into(dir / "fit2.json");
    CHECK(config_error_key([&] { run_experiment(none, Subcommand::fit); }) == "fit.fronts_path");
}

TEST_CASE("report aggregates checks and fails on any failed run") {
    const fs::path dir = scratch("report");
    run_experiment(into(dir / "runs" / "p"), Subcommand::profile);
    const RunReport ok = run_experiment(into(dir / "sum_ok"), Subcommand::report, {dir / "runs"});
    CHECK(ok.pass());
    CHECK(ok.json["results"]["runs"].size() == 1);

    ExperimentConfig short_run = into(dir / "runs" / "s");
    short_run.time.t_final = 40.0;  // far too short for the logarithmic law
    run_experiment(short_run, Subcommand::simulate1d);
    const RunReport bad = run_experiment(into(dir / "sum_bad"), Subcommand::report, {dir / "runs"});
    CHECK_FALSE(bad.pass());
    CHECK(bad.json["results"]["failed_runs"] == 1);
}

TEST_CASE("tool exit codes") {
    const fs::path dir = scratch("exit");
    const std::string out = " --out " + (dir / "x").string();
    CHECK(run_cli("profile --theta 0.25" + out) == 0);
    CHECK(run_cli("profile --theta 0.6" + out) == 2);
    CHECK(run_cli("profile --no-such-flag") == 2);
    CHECK(run_cli("--set grid.J=abc profile" + out) == 2);
    {
        std::ofstream(dir / "few.csv") << "t,r_level\n2,1\n3,2\n";
    }
    CHECK(run_cli("fit --fronts " + (dir / "few.csv").string() + " --out " + (dir / "f.json").string()) == 3);
    CHECK(run_cli("report --in " + (dir / "x").string() + " --out " + (dir / "r").string()) == 0);
    CHECK(run_cli("simulate1d --t-final 30 --out " + (dir / "s").string()) == 0);
    CHECK(run_cli("report --in " + (dir / "s").string() + " --out " + (dir / "r2").string()) == 4);
}
