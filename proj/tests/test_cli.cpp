#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "cli.hpp"

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream o, e;
    int c = qtraj::cli::run_command(std::move(args), o, e);
    return {c, o.str(), e.str()};
}

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::size_t col(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw std::runtime_error("no column " + name);
    }
};

Csv parse_csv(const std::string& text) {
    Csv c;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    c.header = qtraj::cli::split(line, ',');
    while (std::getline(in, line)) {
        std::vector<double> r;
        for (const auto& f : qtraj::cli::split(line, ',')) r.push_back(std::stod(f));
        c.rows.push_back(r);
    }
    return c;
}

nlohmann::json last_json_line(const std::string& err) {
    auto pos = err.rfind('{');
    return nlohmann::json::parse(err.substr(pos));
}

}  // namespace

TEST(Cli, TrajectoryMatchesClassicalLine) {
    auto r = run({"trajectory", "--potential", "free", "--energy", "0.5", "--params", "A=1,B=0", "--t", "0:10"});
    ASSERT_EQ(r.code, 0) << r.err;
    auto c = parse_csv(r.out);
    ASSERT_GT(c.rows.size(), 100u);
    EXPECT_NEAR(c.rows.back()[c.col("t")], 10.0, 1e-12);
    for (const auto& row : c.rows) EXPECT_NEAR(row[c.col("x")], row[c.col("t")], 1e-12);
}

TEST(Cli, QuantizeGroundState) {
    auto r = run({"quantize", "--potential", "harmonic", "--omega", "1", "--state", "0"});
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = nlohmann::json::parse(r.out);
    EXPECT_NEAR(j["J_over_h"].get<double>(), 1.0, 1e-3);
    EXPECT_EQ(j["node_partner"], 1);
}

TEST(Cli, HbarSweepApproachesClassical) {
    auto r = run({"trajectory", "--energy", "0.5", "--params", "mu=1.2,nu=1.7", "--t", "0:10", "--hbar", "1,0.5,0.25"});
    ASSERT_EQ(r.code, 0) << r.err;
    auto c = parse_csv(r.out);
    ASSERT_EQ(c.header.front(), "hbar");
    std::vector<double> hb, dev;
    for (const auto& row : c.rows)
        if (hb.empty() || row[0] != hb.back()) {
            hb.push_back(row[0]);
            dev.push_back(row[c.col("max_deviation")]);
        }
    ASSERT_EQ(hb, (std::vector<double>{1, 0.5, 0.25}));
    EXPECT_GT(dev[0], dev[1]);
    EXPECT_GT(dev[1], dev[2]);
}

TEST(Cli, MicrostateSweepKeepsAction) {
    auto r = run({"quantize", "--potential", "harmonic", "--state", "0", "--params",
                  "a=1,b=1,c=0;a=1.125,b=2,c=1;a=1.0833333333333333,b=3,c=-1;a=1.25,b=4,c=2;a=1.2,b=5,c=-2"});
    ASSERT_EQ(r.code, 0) << r.err;
    auto c = parse_csv(r.out);
    ASSERT_EQ(c.rows.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(c.rows[i][0], static_cast<double>(i));
        EXPECT_NEAR(c.rows[i][c.col("J_over_h")], c.rows[0][c.col("J_over_h")], 1e-3);
    }
}

TEST(Cli, SweepErrors) {
    auto two = run({"trajectory", "--energy", "0.5", "--hbar", "1,0.5", "--params", "A=1,B=0;A=2,B=0"});
    EXPECT_EQ(two.code, 2);
    EXPECT_EQ(last_json_line(two.err)["module"], "cli");
    for (const char* flag : {"--hbar", "--params"}) {
        auto empty = run({"trajectory", "--energy", "0.5", flag, ""});
        EXPECT_EQ(empty.code, 2) << flag;
        EXPECT_NE(empty.err.find("empty sweep list"), std::string::npos);
    }
}

TEST(Cli, UnknownFlag) {
    auto r = run({"trajectory", "--no-such-flag", "1"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("Usage:"), std::string::npos);
    auto j = last_json_line(r.err);
    for (const char* k : {"module", "op", "message", "x"}) EXPECT_TRUE(j.contains(k)) << k;
}

TEST(Cli, InvalidConfigNamesField) {
    auto r = run({"trajectory", "--energy", "0.5", "--params", "A=1"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("params"), std::string::npos);
    auto e = run({"action", "--params", "a=1,b=1,c=0"});
    EXPECT_EQ(e.code, 2);
    EXPECT_NE(e.err.find("energy"), std::string::npos);
    auto p = run({"action", "--energy", "0.5", "--params", "a=1,b=1,c=3"});
    EXPECT_EQ(p.code, 2);
}

TEST(Cli, NumericFailureCarriesPosition) {
    auto r = run({"quantize", "--potential", "harmonic", "--state", "0", "--xmin", "-2.8", "--xmax", "2.8"});
    EXPECT_EQ(r.code, 3);
    auto j = last_json_line(r.err);
    EXPECT_EQ(j["module"], "quantization");
    EXPECT_EQ(j["op"], "partner_solution");
    EXPECT_DOUBLE_EQ(j["x"].get<double>(), -2.8);
}

TEST(Cli, Deterministic) {
    std::vector<std::string> a{"trajectory", "--energy", "0.5", "--params", "mu=0.3,nu=2", "--hbar", "1,0.5,0.25,0.125"};
    auto one = run(a);
    a.insert(a.end(), {"--threads", "1"});
    auto two = run(a);
    ASSERT_EQ(one.code, 0);
    EXPECT_EQ(one.out, two.out);
}

TEST(Cli, ConfigFileWithOverride) {
    auto path = std::filesystem::temp_directory_path() / "qtraj_cli_test.cfg";
    {
        std::ofstream f(path);
        f << "# free particle\npotential = free\nenergy = 2\nparams = A=2,B=0.5\nt = 0:2\n";
    }
    auto from_file = run({"trajectory", "--config", path.string(), "--energy", "0.5"});
    auto flags = run({"trajectory", "--potential", "free", "--energy", "0.5", "--params", "A=2,B=0.5", "--t", "0:2"});
    std::filesystem::remove(path);
    ASSERT_EQ(from_file.code, 0) << from_file.err;
    EXPECT_EQ(from_file.out, flags.out);
}

TEST(Cli, GridPointsFromEnvironment) {
    ::setenv("QSHJE_GRID_POINTS", "1001", 1);
    auto r = run({"pair", "--potential", "harmonic", "--energy", "0.7"});
    auto flag = run({"pair", "--potential", "harmonic", "--energy", "0.7", "--points", "501"});
    ::unsetenv("QSHJE_GRID_POINTS");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(parse_csv(r.out).rows.size(), 1001u);
    EXPECT_EQ(parse_csv(flag.out).rows.size(), 501u);
}

TEST(Cli, SphericalReport) {
    auto r = run({"spherical", "--energy", "0.5", "--polar-params", "mu=0.4,nu=-0.7"});
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = nlohmann::json::parse(r.out);
    EXPECT_TRUE(j["consistent"].get<bool>());
    EXPECT_LT(j["total_residual_max"].get<double>(), 1e-4);
    auto c = run({"spherical", "--energy", "0.5", "--component", "azimuthal", "--samples", "5"});
    ASSERT_EQ(c.code, 0) << c.err;
    EXPECT_EQ(parse_csv(c.out).header, (std::vector<std::string>{"coord", "action", "momentum", "residual"}));
}

TEST(Cli, CompareFloydAndResiduals) {
    auto f = run({"compare-floyd", "--energy", "0.5", "--params", "a=2,b=1,c=0.5", "--samples", "50"});
    ASSERT_EQ(f.code, 0) << f.err;
    auto c = parse_csv(f.out);
    double worst = 0;
    for (const auto& row : c.rows) worst = std::max(worst, row[c.col("rel_gap")]);
    EXPECT_GT(worst, 1e-3);
    auto r = run({"residuals", "--energy", "0.5", "--params", "mu=1.2,nu=1.7", "--samples", "20"});
    ASSERT_EQ(r.code, 0) << r.err;
    auto rc = parse_csv(r.out);
    for (const auto& row : rc.rows) EXPECT_LT(std::abs(row[rc.col("qshje_abs")]), 1e-8);
}

TEST(Cli, AcceptSubset) {
    auto r = run({"accept", "--only", "1"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("PASS criterion 1"), std::string::npos);
    EXPECT_EQ(run({"accept", "--only", "99"}).code, 2);
}
