#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "reglab/cli.hpp"

using namespace reglab;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("reglab_cli_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string preset(const std::string& name) { return (fs::path(REGLAB_PRESET_DIR) / name).string(); }

// Writes a copy of a shipped preset with one substring replaced.
fs::path edited_preset(const fs::path& dir, const std::string& name, const std::string& from, const std::string& to) {
    std::string text = slurp(preset(name));
    const auto at = text.find(from);
    REQUIRE(at != std::string::npos);
    text.replace(at, from.size(), to);
    const fs::path p = dir / name;
    std::ofstream(p) << text;
    return p;
}

}  // namespace

TEST_CASE("usage errors") {
    const Run unknown = cli({"frobnicate"});
    CHECK(unknown.code == kExitUsage);
    CHECK(unknown.err.find("Usage") != std::string::npos);

    CHECK(cli({}).code == kExitUsage);
    CHECK(cli({"verify", "bogus"}).code == kExitUsage);
    CHECK(cli({"verify"}).code == kExitUsage);
    CHECK(cli({"roundtrip", "--format", "xml"}).code == kExitUsage);
    CHECK(cli({"roundtrip", "--config", "/nonexistent.ini"}).code == kExitUsage);

    const Run help = cli({"--help"});
    CHECK(help.code == kExitPass);
    CHECK(help.out.find("verify") != std::string::npos);
}

TEST_CASE("config errors are usage errors") {
    const fs::path dir = scratch("badcfg");
    const fs::path cfg = dir / "bad.ini";
    std::ofstream(cfg) << "[measurement]\nsigma = -1\n";
    const Run r = cli({"--config", cfg.string(), "roundtrip"});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("measurement.sigma > 0") != std::string::npos);

    const fs::path few = edited_preset(dir, "sde_failure.ini", "trials = 2000", "trials = 10");
    CHECK(cli({"--config", few.string(), "--out", dir.string()}).code == kExitUsage);
}

TEST_CASE("projection report layout") {
    const fs::path dir = scratch("projection");
    const fs::path cfg = edited_preset(dir, "projection.ini", "trials = 20", "trials = 2");
    const Run r = cli({"--config", cfg.string(), "--out", dir.string()});
    CHECK(r.code == kExitPass);
    const std::string csv = slurp(dir / "projection.csv");
    CHECK(csv.rfind("sigma,trial,err_projection,err_raw,runtime_s\n", 0) == 0);
    CHECK(csv.find("\nresult,all_verdicts,") != std::string::npos);

    // A failing verdict gives exit 1 and a failure summary.
    const fs::path strict = edited_preset(dir, "projection.ini", "max_error = 0.05", "max_error = 1e-12");
    const Run f = cli({"--config", strict.string(), "--out", dir.string()});
    CHECK(f.code == kExitVerdictFailed);
    const auto summary = nlohmann::json::parse(f.err.substr(0, f.err.find('\n')));
    CHECK(summary["failed"].size() >= 1);
}

TEST_CASE("no-timing reruns are byte-identical") {
    const fs::path a = scratch("rerun_a"), b = scratch("rerun_b"), c = scratch("rerun_c");
    const auto run = [](const fs::path& dir, const char* workers) {
        return cli({"--config", preset("roundtrip.ini"), "--out", dir.string(), "--no-timing", "--workers", workers})
            .code;
    };
    CHECK(run(a, "2") == kExitPass);
    CHECK(run(b, "2") == kExitPass);
    CHECK(run(c, "1") == kExitPass);
    const std::string ca = slurp(a / "roundtrip.csv");
    CHECK_FALSE(ca.empty());
    CHECK(ca == slurp(b / "roundtrip.csv"));

    // Across worker counts only the echoed worker parameter differs.
    const auto without_workers = [](std::string s) {
        const auto at = s.find("param,workers,");
        return s.erase(at, s.find('\n', at) - at + 1);
    };
    CHECK(without_workers(ca) == without_workers(slurp(c / "roundtrip.csv")));
}

TEST_CASE("json output and trajectories") {
    const fs::path dir = scratch("json");
    const Run r = cli({"--config", preset("reguidance.ini"), "--out", dir.string(), "--format", "json",
                       "--dump-trajectories", "--seed", "5"});
    CHECK(r.code == kExitPass);
    const auto doc = nlohmann::json::parse(slurp(dir / "reguidance.json"));
    CHECK(doc["experiment"] == "reguidance");
    CHECK(fs::exists(dir / "reguidance_traj_latent.csv"));
    CHECK(fs::exists(dir / "reguidance_traj_guided.csv"));
    CHECK(slurp(dir / "reguidance_traj_guided.csv").rfind("t,x_0,", 0) == 0);
}

TEST_CASE("score check through the binary") {
    const fs::path dir = scratch("binary");
    const std::string cmd = std::string(REGLAB_CLI_PATH) + " score-check --out " + dir.string() + " > /dev/null";
    CHECK(std::system(cmd.c_str()) == 0);
    CHECK(fs::exists(dir / "score-check.csv"));
    const std::string bad = std::string(REGLAB_CLI_PATH) + " nonsense > /dev/null 2>&1";
    const int status = std::system(bad.c_str());
    CHECK(WEXITSTATUS(status) == kExitUsage);
}
