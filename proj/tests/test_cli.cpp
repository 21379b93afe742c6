#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kCli = PRIMER_CLI_PATH;
const fs::path kConfigs = PRIMER_CONFIG_DIR;

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "primer_cli_tests";
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunResult run(const std::string& args) {
    const fs::path out = scratch("stdout.txt"), err = scratch("stderr.txt");
    const std::string cmd = kCli.string() + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

std::string config(const std::string& name) { return "--config " + (kConfigs / name).string(); }

fs::path write_config(const std::string& name, const nlohmann::json& j) {
    const fs::path p = scratch(name);
    std::ofstream(p) << j.dump(2);
    return p;
}

nlohmann::json read_config(const std::string& name) { return nlohmann::json::parse(slurp(kConfigs / name)); }

std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

// Second line of a solve/sweep table: i_f dv1 dv2 dv_sum lambda0 mu0 E extra theta_f t_f.
std::vector<std::string> table_row(const std::string& out, int index = 0) {
    std::istringstream in(out);
    std::string line;
    std::getline(in, line);
    for (int i = 0; i <= index; ++i) std::getline(in, line);
    return split_ws(line);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
    return out;
}

std::vector<std::string> csv_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) {
        if (!l.empty()) lines.push_back(l);
    }
    return lines;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("solve kind I coplanar") {
    const fs::path json_out = scratch("solution.json");
    fs::remove(json_out);
    const auto r = run("solve " + config("kind1_coplanar.json") + " --format json --out " + json_out.string());
    REQUIRE(r.code == 0);
    const auto row = table_row(r.out);
    REQUIRE(row.size() == 10);
    CHECK(std::abs(std::stod(row[3]) - 3795.94) <= 4.0);
    const auto j = nlohmann::json::parse(slurp(json_out));
    CHECK(j["converged"] == true);
    CHECK(j["arcs"].size() == 4);
}

TEST_CASE("solve kind II coplanar") {
    const auto r = run("solve " + config("kind2_i0.json"));
    REQUIRE(r.code == 0);
    const auto row = table_row(r.out);
    REQUIRE(row.size() == 10);
    CHECK(std::abs(std::stod(row[7]) / -184.57 - 1.0) <= 0.02);
}

TEST_CASE("configuration errors exit with 2") {
    auto j = read_config("kind1_coplanar.json");
    j["final"].erase("rf_km");
    const auto r = run("solve --config " + write_config("missing_rf.json", j).string());
    CHECK(r.code == 2);
    CHECK(r.err.find("final.rf_km") != std::string::npos);

    CHECK(run("solve --config /nonexistent.json").code == 2);
    CHECK(run("solve " + config("kind1_coplanar.json") + " --kind VII").code == 2);
    CHECK(run("frobnicate").code == 2);
}

TEST_CASE("non-convergence exits with 3") {
    auto j = read_config("kind1_coplanar.json");
    j["solver"] = {{"max_iter", 1}};
    j.erase("guess");
    const auto r = run("solve --config " + write_config("one_iteration.json", j).string());
    CHECK(r.code == 3);
}

TEST_CASE("propagate converged parameters") {
    const fs::path csv = scratch("transfer.csv");
    const auto r = run("propagate " + config("table6_i0_params.json") + " --out " + csv.string());
    REQUIRE(r.code == 0);
    const auto lines = csv_lines(slurp(csv));
    REQUIRE(lines.size() > 2000);
    CHECK(lines.front() == "t,r,vr,vtheta,theta,chi,dv,lambda,mu,nu,psi_dv,p,kappa,engine");
    const auto last = split_csv(lines.back());
    CHECK(std::abs(std::stod(last[1]) - 11595e3) <= 1e3);
}

TEST_CASE("propagate a zero-adjoint coast") {
    const fs::path csv = scratch("coast.csv");
    const auto r = run("propagate " + config("coast_100s.json") + " --out " + csv.string());
    REQUIRE(r.code == 0);
    const auto lines = csv_lines(slurp(csv));
    CHECK(lines.size() == 102);
    CHECK(std::stod(split_csv(lines.back())[6]) == 0.0);
}

TEST_CASE("propagation failures exit with 4 and leave no output") {
    const fs::path csv = scratch("never.csv");
    fs::remove(csv);
    // Zero adjoints never leave the departure orbit, whose apogee is below the target radius.
    const auto r = run("propagate " + config("coast_100s.json") + " --kind I --out " + csv.string());
    CHECK(r.code == 4);
    CHECK_FALSE(fs::exists(csv));
}

TEST_CASE("singleton sweep matches solve") {
    const auto solved = run("solve " + config("kind1_coplanar.json"));
    const auto swept = run("sweep " + config("kind1_coplanar.json") + " --chi 0");
    REQUIRE(solved.code == 0);
    REQUIRE(swept.code == 0);
    CHECK(table_row(swept.out) == table_row(solved.out));
}

TEST_CASE("verify") {
    SUBCASE("converged transfer passes") {
        const auto r = run("verify " + config("table6_i0_params.json"));
        CHECK(r.code == 0);
        CHECK(r.out.find("all invariants within limits") != std::string::npos);
    }
    SUBCASE("corrupted dlambda/dt is reported") {
        const auto r = run("verify " + config("table6_i0_params.json") + " --dlam-scale 1.001");
        CHECK(r.code == 5);
        CHECK(r.out.find("VIOLATION") != std::string::npos);
    }
    SUBCASE("zero-adjoint coast passes") {
        const auto r = run("verify " + config("coast_100s.json"));
        CHECK(r.code == 0);
    }
}

TEST_CASE("dataset dump") {
    const auto r = run("dataset --format json");
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j.contains("table6"));
    const auto csv = run("dataset --format csv");
    CHECK(csv.code == 0);
    CHECK(csv.out.find("3795.94") != std::string::npos);
}

}
