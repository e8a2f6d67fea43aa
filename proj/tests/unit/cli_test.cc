// Copyright 2026 The fluxchain Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <sstream>

#include "cli.h"
#include "fluxchain/csv_io.h"
#include "json.hpp"

namespace fluxchain {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

const std::string kData = FLUXCHAIN_DATA_DIR;

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult run(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

int run_binary(const std::string &args) {
    std::string cmd = std::string(FLUXCHAIN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class CliTest : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("fluxchain_cli_" + std::to_string(::getpid()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string path(const std::string &name) const { return (dir_ / name).string(); }
    fs::path dir_;
};

TEST_F(CliTest, ExitCodes) {
    EXPECT_EQ(run_binary("nosuchcmd"), 2);
    EXPECT_EQ(run_binary(""), 2);
    EXPECT_EQ(run_binary("qfp"), 2);
    EXPECT_EQ(run_binary("qfp betasweep --sweep 0:1"), 2);
    EXPECT_EQ(run_binary("qfp betasweep --bogus"), 2);
    EXPECT_EQ(run_binary("device validate --device /nonexistent.json"), 2);
    EXPECT_EQ(run_binary("--help"), 0);
    EXPECT_EQ(run_binary("device validate"), 0);

    json bad = json::parse(read_text_file(kData + "/reference_device.json"));
    bad["qfp"]["l_qfp"] = -1e-12;
    write_text_file(path("bad.json"), bad.dump());
    EXPECT_EQ(run_binary("device validate --device " + path("bad.json")), 1);
    CliResult r = run({"device", "validate", "--device", path("bad.json")});
    EXPECT_NE(r.err.find("l_qfp"), std::string::npos);
    // t_int below the model minimum is a domain error.
    EXPECT_EQ(run({"measure", "shots", "--tint", "1e-9", "--shots", "10"}).code, 1);
}

TEST_F(CliTest, SeededScurveIsBitIdentical) {
    const std::string dev = kData + "/reference_device.json";
    for (const char *sub : {"a", "b"}) fs::create_directories(dir_ / sub);
    CliResult a = run({"qfp", "scurve", "--device", dev, "--out", path("a/s.csv"), "--seed", "7"});
    CliResult b = run({"qfp", "scurve", "--device", dev, "--out", path("b/s.csv"), "--seed", "7"});
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(read_text_file(path("a/s.csv")), read_text_file(path("b/s.csv")));
    EXPECT_EQ(read_text_file(path("a/s_scurve_fit.json")), read_text_file(path("b/s_scurve_fit.json")));
    CliResult c = run({"qfp", "scurve", "--device", dev, "--out", path("c"), "--seed", "8"});
    ASSERT_EQ(c.code, 0);
    EXPECT_NE(read_text_file(path("a/s.csv")), read_text_file(path("c/scurve.csv")));
}

TEST_F(CliTest, ManifestAndCheck) {
    CliResult r = run({"measure", "shots", "--shots", "500", "--seed", "3", "--out", path("m")});
    ASSERT_EQ(r.code, 0) << r.err;
    json m = json::parse(read_text_file(path("m/measure_shots.manifest.json")));
    EXPECT_EQ(m["subcommand"], "measure shots");
    EXPECT_EQ(m["seed"], 3);
    EXPECT_EQ(m["tool_version"], PROJECT_VERSION_STRING);
    EXPECT_TRUE(m.contains("wall_clock_seconds"));
    EXPECT_TRUE(m.contains("config_paths"));
    ASSERT_EQ(m["outputs"].size(), 1u);
    EXPECT_EQ(m["outputs"][0]["path"], "shots.csv");
    EXPECT_EQ(m["outputs"][0]["sha256"].get<std::string>().size(), 64u);

    EXPECT_EQ(run({"measure", "shots", "--shots", "500", "--seed", "3", "--out", path("m"), "--check"}).code, 0);
    EXPECT_EQ(run({"measure", "shots", "--shots", "500", "--seed", "4", "--out", path("m"), "--check"}).code, 1);
    write_text_file(path("m/shots.csv"), "tampered\n");
    EXPECT_EQ(run({"measure", "shots", "--shots", "500", "--seed", "3", "--out", path("m"), "--check"}).code, 1);
    EXPECT_EQ(run({"measure", "shots", "--shots", "500", "--seed", "3", "--out", path("none"), "--check"}).code, 1);
    EXPECT_EQ(run({"measure", "shots", "--check"}).code, 2);
    // --check writes nothing.
    EXPECT_EQ(read_text_file(path("m/shots.csv")), "tampered\n");
}

TEST_F(CliTest, CsvUsesSeventeenDigits) {
    CliResult r = run({"qfp", "betasweep", "--sweep", "0:1:3", "--out", path("b")});
    ASSERT_EQ(r.code, 0);
    CsvTable t = parse_csv(read_text_file(path("b/betasweep.csv")));
    EXPECT_EQ(t.rows.size(), 3u);
    EXPECT_EQ(t.rows[0][1], format_double(std::stod(t.rows[0][1])));
    EXPECT_EQ(t.rows[1][1], "0");
}

TEST_F(CliTest, LockAllowsOneRunPerDirectory) {
    fs::create_directories(dir_ / "l");
    write_text_file(path("l/.fluxchain.lock"), "12345\n");
    CliResult r = run({"qfp", "betasweep", "--out", path("l")});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("locked"), std::string::npos);
    fs::remove(path("l/.fluxchain.lock"));
    EXPECT_EQ(run({"qfp", "betasweep", "--out", path("l")}).code, 0);
    EXPECT_FALSE(fs::exists(path("l/.fluxchain.lock")));
}

TEST_F(CliTest, InputsAreNotMutated) {
    std::string dev = path("dev.json");
    fs::copy_file(kData + "/reference_device.json", dev);
    std::string before = read_text_file(dev);
    ASSERT_EQ(run({"measure", "shots", "--device", dev, "--shots", "1000", "--out", path("s")}).code, 0);
    ASSERT_EQ(run({"measure", "histogram", "--input", path("s/shots.csv"), "--out", path("h")}).code, 0);
    std::string shots = read_text_file(path("s/shots.csv"));
    ASSERT_EQ(run({"measure", "histogram", "--input", path("s/shots.csv"), "--out", path("h2")}).code, 0);
    EXPECT_EQ(read_text_file(dev), before);
    EXPECT_EQ(read_text_file(path("s/shots.csv")), shots);
    EXPECT_EQ(read_text_file(path("h/histogram.json")), read_text_file(path("h2/histogram.json")));
}

TEST_F(CliTest, SubcommandsProduceOutputs) {
    struct Case {
        std::vector<std::string> args;
        std::string file;
    };
    std::vector<Case> cases = {
        {{"res", "modulation"}, "modulation.csv"},
        {{"res", "shift"}, "shift.json"},
        {{"res", "fit", "--bootstrap", "20"}, "s21_fit.json"},
        {{"ham", "t1sweep"}, "t1sweep.csv"},
        {{"ham", "anticross"}, "anticrossing.json"},
        {{"anneal", "trace"}, "anneal_trace.csv"},
        {{"measure", "sweep", "--shots", "1000", "--sweep", "40:80:2"}, "fidelity_sweep.csv"},
    };
    int i = 0;
    for (auto &c : cases) {
        std::string out = path("o" + std::to_string(i++));
        c.args.insert(c.args.end(), {"--out", out});
        CliResult r = run(c.args);
        EXPECT_EQ(r.code, 0) << c.args[0] << " " << c.args[1] << ": " << r.err;
        EXPECT_TRUE(fs::exists(fs::path(out) / c.file)) << c.file;
    }
    json a = json::parse(read_text_file(path("o4/anticrossing.json")));
    EXPECT_TRUE(a["detected"].get<bool>());
    EXPECT_NEAR(a["g_ghz"].get<double>(), 0.0098, 1e-4);
}

TEST_F(CliTest, AntiCrossingWithoutCouplingReportsBound) {
    CliResult r = run({"ham", "anticross", "--g", "0", "--out", path("z")});
    ASSERT_EQ(r.code, 0) << r.err;
    json a = json::parse(read_text_file(path("z/anticrossing.json")));
    EXPECT_FALSE(a["detected"].get<bool>());
    EXPECT_GT(a["g_upper_bound_ghz"].get<double>(), 0.0);
    EXPECT_NE(a["message"].get<std::string>().find("no anti-crossing detected"), std::string::npos);
}

TEST_F(CliTest, QfpFidelityFromScurveFiles) {
    ASSERT_EQ(run({"qfp", "scurve", "--state", "L", "--out", path("l.csv"), "--seed", "1"}).code, 0);
    ASSERT_EQ(run({"qfp", "scurve", "--state", "R", "--out", path("r.csv"), "--seed", "1"}).code, 0);
    CliResult r = run({"qfp", "fidelity", "--left", path("l.csv"), "--right", path("r.csv"), "--out", path("f.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    json f = json::parse(read_text_file(path("f.json")));
    EXPECT_NEAR(f["f_sep_max"].get<double>(), 0.999, 0.001);
    EXPECT_NEAR(f["delta_phi_qub_mphi0"].get<double>(), 10.69, 0.1);
}

TEST_F(CliTest, StdoutWhenNoOut) {
    CliResult r = run({"ham", "t1sweep", "--sweep", "100:200:2"});
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.out.rfind("delta_mhz,t1_purcell_s,t1_combined_s\n", 0), 0u);
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 3);
}

}  // namespace
}  // namespace fluxchain
