#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "qtraj/parse.hpp"
#include "qtraj/qtraj.hpp"

using namespace qtraj;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(QTRAJ_CLI) + " " + args + " 2>/dev/null";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) r.out += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

/// Value printed after `key ` on its own line.
std::string field(const std::string& out, const std::string& key) {
  std::istringstream in(out);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + " ", 0) == 0) return line.substr(key.size() + 1);
  }
  return {};
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("qtraj_cli_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST(ParseComplex, Forms) {
  EXPECT_EQ(parse_complex("1"), complex(1.0, 0.0));
  EXPECT_EQ(parse_complex("-0.5+2i"), complex(-0.5, 2.0));
  EXPECT_EQ(parse_complex("1+0i"), complex(1.0, 0.0));
  EXPECT_EQ(parse_complex("3e-2-1i"), complex(0.03, -1.0));
  EXPECT_EQ(parse_complex("2i"), complex(0.0, 2.0));
  EXPECT_EQ(parse_complex("-i"), complex(0.0, -1.0));
  EXPECT_EQ(parse_complex("1-i"), complex(1.0, -1.0));
  EXPECT_EQ(parse_complex(".5"), complex(0.5, 0.0));
  for (const char* bad : {"", "i1", "1+", "abc", "1+2", "1 + 2i", "--1"}) {
    EXPECT_THROW(parse_complex(bad), ConfigError) << bad;
  }
}

TEST(ParseReal, Forms) {
  EXPECT_EQ(parse_real("1e-3"), 1e-3);
  EXPECT_TRUE(std::isinf(parse_real("inf")));
  EXPECT_THROW(parse_real("1x"), ConfigError);
  EXPECT_THROW(parse_real(""), ConfigError);
}

TEST(ParseInitialState, Kinds) {
  EXPECT_EQ(std::get<Coherent>(parse_initial_state("coherent:alpha=1+0.5i")).alpha, complex(1.0, 0.5));
  EXPECT_EQ(std::get<Number>(parse_initial_state("number:n=3")).n, 3u);
  EXPECT_EQ(std::get<Thermal>(parse_initial_state("thermal:nbar=3")).nbar, 3.0);
  const auto sq = std::get<Squeezed>(parse_initial_state("squeezed:alpha=1+0i,r=1.2"));
  EXPECT_EQ(sq.alpha, complex(1.0));
  EXPECT_EQ(sq.r, 1.2);
  EXPECT_EQ(std::get<Squeezed>(parse_initial_state("squeezed:r=0.4")).alpha, complex(0.0));
  const auto th = std::get<Thermal>(parse_initial_state("thermal:beta_omega=0.5"));
  EXPECT_NEAR(th.boltzmann_ratio(), std::exp(-0.5), 1e-15);
}

TEST(ParseInitialState, Rejections) {
  for (const char* bad : {"vacuum", "number", "number:n=-1", "number:n=2.5", "coherent:beta=1",
                          "coherent:alpha=1,alpha=2", "thermal:nbar=0", "thermal:nbar=1,beta_omega=1",
                          "squeezed:alpha=1", "number:n=3,", "coherent:alpha"}) {
    EXPECT_THROW(parse_initial_state(bad), ConfigError) << bad;
  }
}

TEST(Cli, GeneratingFunctionOfNumberState) {
  const Result r = run("gf --init number:n=3 --t inf");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NEAR(std::stod(field(r.out, "count_mean")), 1.5, 1e-6);
  EXPECT_NEAR(std::stod(field(r.out, "count_variance")), 0.75, 1e-5);
  EXPECT_EQ(parse_complex(field(r.out, "M")), complex(1.0, 0.0));
}

TEST(Cli, GeneratingFunctionMatchesLibrary) {
  const Result r = run("gf --init coherent:alpha=1+0.5i --xi 0.3-0.2i --eta -0.4 --t 1.5 --omega 0.2");
  ASSERT_EQ(r.code, 0) << r.out;
  SimParams p;
  p.omega = 0.2;
  const complex ref = generating_function(Coherent{complex(1.0, 0.5)},
                                          GFQuery::scalar(complex(0.3, -0.2), -0.4, 1.5), p);
  EXPECT_NEAR(std::abs(parse_complex(field(r.out, "M")) - ref), 0.0, 1e-14 * std::abs(ref));
  const auto mom = coherent_homodyne_moments(complex(1.0, 0.5), p, 1.5);
  EXPECT_NEAR(std::abs(parse_complex(field(r.out, "A_mean")) - mom.mean), 0.0, 1e-7);
}

TEST(Cli, DensityMatchesLibrary) {
  const Result r = run("pdf --init number:n=2 --m 1 --t 1 --A 0.1+0.2i");
  ASSERT_EQ(r.code, 0) << r.out;
  SimParams p;
  const double ref = joint_density_pm(Number{2}, 1, RecordAccumulators::at(complex(0.1, 0.2), 1.0, p), p);
  EXPECT_DOUBLE_EQ(std::stod(field(r.out, "log_p")), ref);
}

TEST(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("simulate --no-such-flag").code, 2);
  EXPECT_EQ(run("gf --init bogus:x=1").code, 2);
  EXPECT_EQ(run("gf --init number:n=3 --t abc").code, 2);
  EXPECT_EQ(run("oracle --init number:n=3 --dt -1").code, 2);
  EXPECT_EQ(run("oracle --init thermal:nbar=1 --thermal-mode mixed").code, 2);
  EXPECT_EQ(run("simulate --init number:n=1 -M 2 --t-final 0.1 --out /proc/forbidden").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, NumericalGuardsExitThree) {
  EXPECT_EQ(run("oracle --init number:n=40 --dt 0.01 -M 2").code, 3);
  EXPECT_EQ(run("oracle --init number:n=3 --dim 3 -M 2").code, 3);
  EXPECT_EQ(run("gf --init thermal:nbar=3 --eta 1 --t inf").code, 3);
}

TEST(Cli, StrictOracleFailureExitsFour) {
  // Homodyne conditioning breaks the exact -1 jump of a number state.
  const std::string args = "oracle --init number:n=3 -M 40 --t-final 1";
  EXPECT_EQ(run(args).code, 0);
  EXPECT_EQ(run(args + " --strict").code, 4);
  EXPECT_EQ(run("oracle --init number:n=3 -M 40 --t-final 1 --gamma2 0 --strict").code, 0);
}

TEST(Cli, SimulateWritesFilesReproducibly) {
  const auto a = scratch("a"), b = scratch("b");
  const std::string base =
      "simulate --init thermal:nbar=1 -M 20 --t-final 0.5 --snapshot-stride 50 --sample-paths 3 "
      "--thermal-mode sampled --record-dW --out ";
  ASSERT_EQ(run(base + a.string() + " --workers 1").code, 0);
  ASSERT_EQ(run(base + b.string() + " --workers 4").code, 0);
  for (const char* name : {"ensemble.csv", "trajectories.jsonl", "counts.csv", "paths.csv",
                           "thermal_levels.csv", "report.json"}) {
    ASSERT_TRUE(std::filesystem::exists(a / name)) << name;
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  }
  const auto report = nlohmann::json::parse(slurp(a / "report.json"));
  EXPECT_EQ(report.at("trajectories").get<int>(), 20);
  EXPECT_EQ(report.at("thermal_mode").get<std::string>(), "sampled");
  EXPECT_FALSE(report.at("checks").empty());
  std::ifstream in(a / "trajectories.jsonl");
  std::string line;
  std::getline(in, line);
  const auto first = nlohmann::json::parse(line);
  EXPECT_EQ(first.at("dW").size(), 500u);
  EXPECT_TRUE(first.contains("initial_n"));
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}
