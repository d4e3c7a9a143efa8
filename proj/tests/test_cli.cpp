#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>
#include <string>

#ifndef DFIG_CLI_PATH
#error "DFIG_CLI_PATH must name the dfig executable"
#endif

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

// Runs the CLI with stdout and stderr merged.
Result run(const std::string& args, const std::string& env = "") {
    Result r;
    const std::string cmd = env + (env.empty() ? "" : " ") + "'" + std::string(DFIG_CLI_PATH) + "' " + args + " 2>&1";
    FILE* p = ::popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int status = ::pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("dfig_cli_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    [[nodiscard]] std::string str() const { return "'" + path.string() + "'"; }
};

std::size_t files_in(const fs::path& dir) {
    if (!fs::exists(dir)) return 0;
    return static_cast<std::size_t>(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}));
}

}  // namespace

TEST(Cli, SimulateWritesTimeSeriesCsv) {
    TempDir d;
    const auto r = run("simulate --scenario scenario1 --out " + d.str());
    ASSERT_EQ(r.code, 0) << r.out;
    const auto csv = slurp(d.path / "scenario1_timeseries.csv");
    const auto header = csv.substr(0, csv.find('\n'));
    EXPECT_EQ(header, "t,v_w_true,v_w_meas,p_d,q_d,p,q,pf,cp,lambda,omega_r,omega_rd,beta,theta,r2,v_dr,v_qr,u1,u2,V");
    std::size_t lines = 0;
    for (char c : csv) lines += c == '\n';
    EXPECT_EQ(lines, 1u + 1201u);  // header plus 600 s at 0.5 s, both ends included
    EXPECT_NE(r.out.find("wind 0.6"), std::string::npos);
}

TEST(Cli, SameSeedGivesByteIdenticalCsvAndSvgDoesNotAlterIt) {
    TempDir a, b;
    ASSERT_EQ(run("simulate --scenario scenario4 --seed 7 --out " + a.str()).code, 0);
    const auto r = run("simulate --scenario scenario4 --seed 7 --svg p,cp,omega_r --out " + b.str());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(slurp(a.path / "scenario4_timeseries.csv"), slurp(b.path / "scenario4_timeseries.csv"));
    for (const char* sig : {"p", "cp", "omega_r"}) {
        const auto svg = slurp(b.path / ("scenario4_" + std::string(sig) + ".svg"));
        EXPECT_EQ(svg.rfind("<svg", 0), 0u) << sig;
        EXPECT_NE(svg.find("<polyline"), std::string::npos) << sig;
    }
}

TEST(Cli, SeedPrecedence) {
    TempDir env_only, flag;
    ASSERT_EQ(run("simulate --scenario scenario4 --out " + env_only.str(), "DFIG_SEED=7").code, 0);
    ASSERT_EQ(run("simulate --scenario scenario4 --seed 7 --out " + flag.str(), "DFIG_SEED=99").code, 0);
    EXPECT_EQ(slurp(env_only.path / "scenario4_timeseries.csv"), slurp(flag.path / "scenario4_timeseries.csv"));
}

TEST(Cli, DecimateAndNoCsv) {
    TempDir d, e;
    ASSERT_EQ(run("simulate --scenario scenario2 --decimate 10 --out " + d.str()).code, 0);
    const auto csv = slurp(d.path / "scenario2_timeseries.csv");
    std::size_t lines = 0;
    for (char c : csv) lines += c == '\n';
    EXPECT_EQ(lines, 1u + 121u);
    ASSERT_EQ(run("simulate --scenario scenario2 --no-csv --svg pf --out " + e.str()).code, 0);
    EXPECT_FALSE(fs::exists(e.path / "scenario2_timeseries.csv"));
    EXPECT_TRUE(fs::exists(e.path / "scenario2_pf.svg"));
}

TEST(Cli, ConfigDocumentRuns) {
    TempDir d;
    {
        std::ofstream f(d.path / "short.json");
        f << R"({"schema_version": 1, "name": "short", "duration_s": 10,
                 "wind": {"type": "steps", "steps": [{"t_s": 0, "v_w_mps": 10.8}]},
                 "demand": {"steps": [{"t_s": 0, "p_d_mw": 0.45, "pf": 0.995}]}})";
    }
    const auto r = run("simulate --config '" + (d.path / "short.json").string() + "' --out " + d.str());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_TRUE(fs::exists(d.path / "short_timeseries.csv"));
}

TEST(Cli, MalformedConfigExitsOneAndWritesNothing) {
    TempDir d;
    {
        std::ofstream f(d.path / "bad.json");
        f << R"({"schema_version": 1, "duration_s": 10, "wind": {"type": "steps", "stepz": []}})";
    }
    const auto out = d.path / "out";
    const auto r = run("simulate --config '" + (d.path / "bad.json").string() + "' --out '" + out.string() + "'");
    EXPECT_EQ(r.code, 1) << r.out;
    EXPECT_NE(r.out.find("wind"), std::string::npos);
    EXPECT_EQ(files_in(out), 0u);
}

TEST(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(run("simulate").code, 1);
    EXPECT_EQ(run("simulate --scenario scenario9").code, 1);
    EXPECT_EQ(run("simulate --scenario scenario1 --config x.json").code, 1);
    EXPECT_EQ(run("frobnicate").code, 1);
    EXPECT_EQ(run("simulate --scenario scenario1 --svg nosuchsignal --no-csv --out /tmp").code, 1);
}

TEST(Cli, UnwritableOutputExitsThree) {
    TempDir d;
    const auto blocker = d.path / "file";
    std::ofstream(blocker) << "x";
    const auto r = run("simulate --scenario scenario2 --out '" + blocker.string() + "'");
    EXPECT_EQ(r.code, 3) << r.out;
}

TEST(Cli, PlaceReachesTheRequestedSpectrum) {
    const auto r = run("analyze place --poles -15,-5,-10+5i,-10-5i");
    ASSERT_EQ(r.code, 0) << r.out;
    std::smatch m;
    ASSERT_TRUE(std::regex_search(r.out, m, std::regex("max distance to request: ([0-9.eE+-]+)")));
    EXPECT_LT(std::stod(m[1]), 1e-6);
    EXPECT_EQ(run("analyze place --poles -1,-2,-3").code, 1);
}

TEST(Cli, HessianCheckReportsAllPositiveDefinite) {
    const auto r = run("analyze hessian-check --trials 200");
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("positive definite: 200/200"), std::string::npos) << r.out;
}

TEST(Cli, CriticalRootTableIsCsv) {
    const auto r = run("analyze critical-root --beta-grid 0,10 --vw-grid 0.6,1.0");
    ASSERT_EQ(r.code, 0) << r.out;
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line.rfind("beta", 0), 0u) << line;
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++rows;
        EXPECT_GT(std::stod(line.substr(line.rfind(',') + 1)), 3500.0) << line;
    }
    EXPECT_EQ(rows, 4);
}

TEST(Cli, CpContourWritesFile) {
    TempDir d;
    const auto path = d.path / "cp.csv";
    ASSERT_EQ(run("analyze cp-contour --lambda-step 1 --beta-step 5 --out '" + path.string() + "'").code, 0);
    const auto csv = slurp(path);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "lambda,beta_deg,cp_nominal,cp_actual");
}

TEST(Cli, GridMinPrintsTheMinimizer) {
    const auto r = run("analyze grid-min --vw 1.0 --pd 0.3 --qd 0.03 --omega-step 0.05 --beta-step 2");
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("omega_rd:"), std::string::npos);
    EXPECT_NE(r.out.find("PF:"), std::string::npos);
}
