#include "catch_amalgamated.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kinlim/cli.hpp"

namespace fs = std::filesystem;
using kinlim::json;

namespace {

struct RunResult {
    int code = -1;
    std::string output;
};

std::string cli_path() {
    const char* p = std::getenv("KINLIM_CLI");
    return p ? p : "./kinlim";
}

fs::path scratch() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "kinlim_test_cli";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

RunResult run(const std::string& args) {
    const fs::path log = scratch() / "log.txt";
    const std::string cmd = "env -u KINLIM_OUTPUT_DIR " + cli_path() + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    r.output = ss.str();
    return r;
}

fs::path write_config(const std::string& name, const json& j) {
    const fs::path p = scratch() / name;
    std::ofstream(p) << j.dump(2);
    return p;
}

json dispersion_config(const fs::path& out) {
    return {{"couplings", {{"family", "nn"}, {"omega0", 1.0}}},
            {"M", 16},
            {"decay", {{"t_min", 2.0}, {"t_max", 6.0}, {"samples", 10}}},
            {"seed", 3},
            {"output_dir", out.string()}};
}

}  // namespace

TEST_CASE("dispersion command writes the extrema") {
    const fs::path out = scratch() / "disp";
    const auto cfg = write_config("disp.json", dispersion_config(out));
    const RunResult r = run("dispersion --config " + cfg.string());
    INFO(r.output);
    REQUIRE(r.code == 0);
    const json j = kinlim::read_json((out / "dispersion.json").string());
    CHECK(j["omega_min"].get<double>() == 1.0);
    CHECK(j["omega_max"].get<double>() == std::sqrt(13.0));
    CHECK(j["meta"]["seed"] == 3);
    CHECK(j["meta"]["version"] == kinlim::kToolVersion);
    CHECK(j["meta"]["config_hash"].get<std::string>().size() == 16);
    // Equal configs give identical artifacts.
    const std::string first = j.dump();
    REQUIRE(run("dispersion --config " + cfg.string()).code == 0);
    CHECK(kinlim::read_json((out / "dispersion.json").string()).dump() == first);
}

TEST_CASE("validation errors exit with 1") {
    json bad = dispersion_config(scratch() / "bad");
    bad["unexpected_key"] = 1;
    const RunResult r = run("dispersion --config " + write_config("bad.json", bad).string());
    CHECK(r.code == 1);
    CHECK(r.output.find("unexpected_key") != std::string::npos);

    json nested = dispersion_config(scratch() / "bad");
    nested["couplings"]["typo"] = 2;
    CHECK(run("dispersion --config " + write_config("nested.json", nested).string()).code == 1);

    json wrong_type = dispersion_config(scratch() / "bad");
    wrong_type["M"] = "sixteen";
    CHECK(run("dispersion --config " + write_config("type.json", wrong_type).string()).code == 1);

    const std::string missing = (scratch() / "no_such_config.json").string();
    const RunResult m = run("dispersion --config " + missing);
    CHECK(m.code == 1);
    CHECK(m.output.find(missing) != std::string::npos);

    CHECK(run("frobnicate --config x.json").code == 1);
    std::ofstream(scratch() / "broken.json") << "{ not json";
    CHECK(run("dispersion --config " + (scratch() / "broken.json").string()).code == 1);
}

TEST_CASE("runtime failures exit with 2") {
    const fs::path blocker = scratch() / "blocker";
    std::ofstream(blocker) << "a file, not a directory";
    const auto cfg = write_config("blocked.json", dispersion_config(blocker / "sub"));
    CHECK(run("dispersion --config " + cfg.string()).code == 2);
}

TEST_CASE("validate-only writes nothing") {
    const fs::path out = scratch() / "dry";
    const auto cfg = write_config("dry.json", dispersion_config(out));
    const RunResult r = run("dispersion --validate-only --config " + cfg.string());
    CHECK(r.code == 0);
    CHECK_FALSE(fs::exists(out / "dispersion.json"));
    // Every subcommand validates the shipped default study layout.
    const fs::path study = write_config("study.json", kinlim::default_study_json());
    CHECK(run("compare --validate-only --config " + study.string()).code == 0);
    // A box too small for the wrap-around guard is a validation error.
    json small = kinlim::default_study_json();
    small["L"] = {16, 16, 16};
    const RunResult g = run("compare --validate-only --config " + write_config("small.json", small).string());
    CHECK(g.code == 1);
    CHECK(g.output.find("wrap-around guard") != std::string::npos);
}

TEST_CASE("output directory precedence") {
    const fs::path cfg_dir = scratch() / "from_config";
    const fs::path env_dir = scratch() / "from_env";
    const fs::path flag_dir = scratch() / "from_flag";
    const auto cfg = write_config("prec.json", dispersion_config(cfg_dir));
    const std::string base = cli_path() + " dispersion --config " + cfg.string() + " > /dev/null 2>&1";
    REQUIRE(std::system(("KINLIM_OUTPUT_DIR=" + env_dir.string() + " " + base).c_str()) == 0);
    CHECK(fs::exists(env_dir / "dispersion.json"));
    CHECK_FALSE(fs::exists(cfg_dir / "dispersion.json"));
    const std::string with_flag = cli_path() + " dispersion --config " + cfg.string() + " --output-dir " +
                                  flag_dir.string() + " > /dev/null 2>&1";
    REQUIRE(std::system(("KINLIM_OUTPUT_DIR=" + env_dir.string() + " " + with_flag).c_str()) == 0);
    CHECK(fs::exists(flag_dir / "dispersion.json"));
}

TEST_CASE("cumulants command") {
    const fs::path out = scratch() / "cum";
    const json cfg{{"law", "rademacher"},
                   {"n_max", 6},
                   {"samples", 20000},
                   {"patterns", json::array({json::array({{0, 0, 0}, {0, 0, 0}, {1, 0, 0}, {1, 0, 0}})})},
                   {"seed", 2},
                   {"output_dir", out.string()}};
    REQUIRE(run("cumulants --config " + write_config("cum.json", cfg).string()).code == 0);
    const json j = kinlim::read_json((out / "cumulants.json").string());
    CHECK(j["meta"]["seed"] == 2);
}

TEST_CASE("shipped default study config matches the built-in study") {
    const json shipped = kinlim::read_json(KINLIM_SOURCE_DIR "/configs/default_study.json");
    CHECK(shipped == kinlim::default_study_json());
}
