#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>
#include <json.hpp>

#include "ifsw/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path fixtures = IFSW_FIXTURE_DIR;

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("ifsw-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path write_config(const std::string& name, const std::string& text) const {
        const fs::path p = dir_ / name;
        std::ofstream(p) << text;
        return p;
    }

    // Runs the built executable; stderr goes to dir/stderr.txt.
    int run(const std::string& args, const std::string& env = "") const {
        const std::string cmd =
            env + " \"" + std::string(IFSW_CLI_PATH) + "\" " + args + " 2> \"" + (dir_ / "stderr.txt").string() + "\"";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string stderr_text() const { return slurp(dir_ / "stderr.txt"); }

    static std::string slurp(const fs::path& p) {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    static json report(const fs::path& p) { return json::parse(slurp(p)); }

    fs::path dir_;
};

const char* unit_potential = R"({"maps": ["x/2", "x/2 + 1/2"], "potential": "1", "grid": 65})";

} // namespace

TEST_F(Cli, PressureOfUnitPotential) {
    const fs::path cfg = write_config("unit.json", unit_potential);
    const fs::path out = dir_ / "out";
    ASSERT_EQ(run("pressure \"" + cfg.string() + "\" --out \"" + out.string() + "\""), 0) << stderr_text();
    const json r = report(out / "pressure.json");
    EXPECT_EQ(r["command"], "pressure");
    EXPECT_EQ(r["exit_code"], 0);
    EXPECT_NEAR(r["result"]["value"].get<double>(), std::log(2.0), 1e-10);
    EXPECT_NEAR(r["result"]["power"]["log_rho"].get<double>(), std::log(2.0), 1e-10);
    EXPECT_EQ(r["parameters"]["seed"], 42);
    EXPECT_EQ(r["parameters"]["N_max"], 60);
}

TEST_F(Cli, EigenWithoutEigenfunctionExitsTwo) {
    const fs::path out = dir_ / "out";
    EXPECT_EQ(run("eigen \"" + (fixtures / "reflection-exp.json").string() + "\" -o \"" + out.string() + "\""), 2);
    const json r = report(out / "eigen.json");
    EXPECT_EQ(r["exit_code"], 2);
    EXPECT_NE(r["result"]["diagnostic"].get<std::string>().find("no positive eigenfunction"), std::string::npos);
    EXPECT_GT(r["result"]["a_N_spread"]["spread"].get<double>(), 0.1);
    EXPECT_TRUE(fs::exists(out / "eigenfunction.csv"));
    EXPECT_NE(stderr_text().find("no positive eigenfunction"), std::string::npos);
}

TEST_F(Cli, VerifyDyadicExpPasses) {
    const fs::path out = dir_ / "out";
    ASSERT_EQ(run("verify \"" + (fixtures / "dyadic-exp.json").string() + "\" -o \"" + out.string() + "\""), 0)
        << stderr_text();
    const json r = report(out / "verify.json");
    EXPECT_TRUE(r["result"]["passed"].get<bool>());
    for (const auto& c : r["result"]["checks"]) EXPECT_NE(c["status"], "fail") << c["name"];
}

TEST_F(Cli, ConfigErrorsNameTheField) {
    const fs::path out = dir_ / "out";
    struct Case {
        const char* text;
        const char* field;
    } cases[] = {
        {R"({"maps": ["x/2", "x/2 +"], "potential": "1"})", "maps[1]"},
        {R"({"maps": ["x/2"], "potential": "1", "grid": 1})", "grid"},
        {R"({"maps": ["x/2"], "potential": "1", "colour": 3})", "colour"},
        {R"({"maps": ["x/2"]})", "potential"},
        {R"({"maps": ["x/2"], "weights": ["1", "2"]})", "weights"},
        {R"({"maps": ["x/2"], "potential": "1", "tol": -1})", "tol"},
        {R"({"maps": ["x/2"], "potential": "1", "method": "spectral"})", "method"},
    };
    int k = 0;
    for (const auto& c : cases) {
        const fs::path cfg = write_config("bad" + std::to_string(k++) + ".json", c.text);
        EXPECT_EQ(run("pressure \"" + cfg.string() + "\" -o \"" + out.string() + "\""), 1) << c.text;
        EXPECT_NE(stderr_text().find(c.field), std::string::npos) << c.text << " -> " << stderr_text();
    }
    EXPECT_EQ(run("pressure \"" + (dir_ / "missing.json").string() + "\""), 1);
    const fs::path broken = write_config("broken.json", "{ not json");
    EXPECT_EQ(run("pressure \"" + broken.string() + "\""), 1);
}

TEST_F(Cli, InvalidSystemIsConfigError) {
    const fs::path cfg = write_config("escape.json", R"({"maps": ["2*x"], "potential": "1", "grid": 33})");
    EXPECT_EQ(run("validate \"" + cfg.string() + "\" -o \"" + (dir_ / "out").string() + "\""), 1);
    const json r = report(dir_ / "out" / "validate.json");
    EXPECT_FALSE(r["result"]["valid"].get<bool>());
    EXPECT_EQ(run("pressure \"" + cfg.string() + "\" -o \"" + (dir_ / "out").string() + "\""), 1);
}

TEST_F(Cli, ReportsAreDeterministic) {
    const fs::path cfg = fixtures / "dyadic-exp.json";
    ASSERT_EQ(run("chaos-game \"" + cfg.string() + "\" --particles 20000 -o \"" + (dir_ / "a").string() + "\""), 0);
    ASSERT_EQ(run("chaos-game \"" + cfg.string() + "\" --particles 20000 -o \"" + (dir_ / "b").string() + "\""), 0);
    EXPECT_EQ(slurp(dir_ / "a" / "chaos-game.json"), slurp(dir_ / "b" / "chaos-game.json"));
    EXPECT_EQ(slurp(dir_ / "a" / "orbit.csv"), slurp(dir_ / "b" / "orbit.csv"));
    ASSERT_EQ(run("chaos-game \"" + cfg.string() + "\" --particles 20000 --threads 3 -o \"" + (dir_ / "c").string() + "\""), 0);
    EXPECT_EQ(slurp(dir_ / "a" / "orbit.csv"), slurp(dir_ / "c" / "orbit.csv"));
}

TEST_F(Cli, OutputDirectoryFromEnvironment) {
    const fs::path cfg = write_config("unit.json", unit_potential);
    const fs::path out = dir_ / "from-env";
    ASSERT_EQ(run("validate \"" + cfg.string() + "\"", "IFSW_OUTPUT_DIR=\"" + out.string() + "\""), 0);
    EXPECT_TRUE(fs::exists(out / "validate.json"));
}

TEST_F(Cli, EquilibriumAndEntropyArtifacts) {
    const fs::path cfg = fixtures / "reflection-balanced.json";
    const fs::path out = dir_ / "out";
    ASSERT_EQ(run("equilibrium \"" + cfg.string() + "\" -o \"" + out.string() + "\""), 0) << stderr_text();
    EXPECT_TRUE(fs::exists(out / "measure.csv"));
    EXPECT_TRUE(fs::exists(out / "disintegration.csv"));
    EXPECT_LE(report(out / "equilibrium.json")["result"]["gap"].get<double>(), 1e-3);
    ASSERT_EQ(run("entropy \"" + cfg.string() + "\" -o \"" + out.string() + "\""), 0) << stderr_text();
    const json e = report(out / "entropy.json");
    EXPECT_LE(e["result"]["h_a"].get<double>(), e["result"]["h_v_upper"].get<double>() + 1e-12);
    ASSERT_EQ(run("normalize \"" + cfg.string() + "\" -o \"" + out.string() + "\""), 0) << stderr_text();
    EXPECT_EQ(slurp(out / "probabilities.csv").substr(0, 12), "x1,p_0,p_1\n0");
}

TEST_F(Cli, UnknownCommandRejected) {
    const fs::path cfg = write_config("unit.json", unit_potential);
    EXPECT_NE(run("simulate \"" + cfg.string() + "\""), 0);
}

TEST(CliConfig, ParseDefaults) {
    const ifsw::RunConfig c = ifsw::parse_config(json::parse(R"({"maps": ["x"], "potential": "1"})"));
    EXPECT_EQ(c.grid, 1025u);
    EXPECT_EQ(c.tol, 1e-8);
    EXPECT_EQ(c.N_max, 60);
    EXPECT_EQ(c.particles, 1000000u);
    EXPECT_EQ(c.seed, 42u);
    EXPECT_EQ(c.schedule().sigma.size(), 20u);
}

TEST(CliConfig, TwoDimensionalMaps) {
    const ifsw::RunConfig c = ifsw::parse_config(json::parse(
        R"({"dimension": 2, "grid": 9, "maps": [["x1/2", "x2/2"], ["x1/2 + 1/2", "x2/2"]], "weights": [0.5, "1/2"]})"));
    const ifsw::BuiltSystem sys(c);
    EXPECT_TRUE(sys.validation().valid);
    EXPECT_EQ(sys.potential(), nullptr);
    try {
        ifsw::parse_config(json::parse(R"({"dimension": 2, "maps": [["x1/2"]], "potential": "1"})"));
        FAIL();
    } catch (const ifsw::ConfigError& e) {
        EXPECT_EQ(e.field(), "maps[0]");
    }
}
