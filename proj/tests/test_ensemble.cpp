#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "qtraj/io.hpp"
#include "qtraj/qtraj.hpp"

using namespace qtraj;

namespace {

RunConfig small_config(InitialState init, std::size_t M = 40) {
  RunConfig cfg;
  cfg.init = init;
  cfg.params.t_final = 1.0;
  cfg.params.dim = default_dimension(init);
  cfg.trajectories = M;
  cfg.snapshot_stride = 100;
  cfg.workers = 1;
  return cfg;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

class TempDir {
 public:
  TempDir() {
    path_ = std::filesystem::temp_directory_path() /
            ("qtraj_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

void write_all(const std::filesystem::path& dir, const EnsembleStats& st, const RunConfig& cfg) {
  write_ensemble_csv((dir / "ensemble.csv").string(), st);
  write_trajectories_jsonl((dir / "trajectories.jsonl").string(), st, cfg.keep_records);
  write_counts_csv((dir / "counts.csv").string(), st);
}

}  // namespace

TEST(Ensemble, SingleCoherentTrajectoryFollowsDecay) {
  // Euler bias on <n> is about |alpha|^2 e^{-2t} t dt, so dt = 2e-6 keeps it below 1e-6.
  RunConfig cfg = small_config(Coherent{1.0}, 1);
  cfg.params.dt = 2e-6;
  cfg.params.t_final = 2.0;
  cfg.snapshot_stride = 50000;
  const EnsembleStats st = run_ensemble(cfg);
  ASSERT_EQ(st.times.size(), 21u);
  for (std::size_t k = 0; k < st.times.size(); ++k) {
    EXPECT_NEAR(st.mean_n[k], std::exp(-2.0 * st.times[k]), 1e-6) << "t=" << st.times[k];
    EXPECT_EQ(st.sem_n[k], 0.0);
  }
}

TEST(Ensemble, IndependentOfWorkerCount) {
  RunConfig cfg = small_config(Thermal{1.0}, 24);
  const EnsembleStats one = run_ensemble(cfg);
  cfg.workers = 3;
  const EnsembleStats three = run_ensemble(cfg);
  EXPECT_EQ(one.mean_n, three.mean_n);
  EXPECT_EQ(one.sem_n, three.sem_n);
  EXPECT_EQ(one.count_histogram, three.count_histogram);
  for (std::size_t i = 0; i < one.summaries.size(); ++i) {
    EXPECT_EQ(one.summaries[i].jump_times, three.summaries[i].jump_times);
  }
}

TEST(Ensemble, SeedChangesTheRun) {
  RunConfig cfg = small_config(Number{3}, 20);
  const EnsembleStats a = run_ensemble(cfg);
  cfg.params.seed += 1;
  const EnsembleStats b = run_ensemble(cfg);
  EXPECT_NE(a.mean_n, b.mean_n);
}

TEST(Ensemble, HistogramAndSnapshots) {
  const RunConfig cfg = small_config(Number{3}, 50);
  const EnsembleStats st = run_ensemble(cfg);
  EXPECT_EQ(st.times.size(), 11u);
  EXPECT_DOUBLE_EQ(st.times.back(), 1.0);
  std::size_t total = 0;
  for (auto c : st.count_histogram) total += c;
  EXPECT_EQ(total, 50u);
  EXPECT_LE(st.count_histogram.size(), 4u);
  EXPECT_DOUBLE_EQ(st.initial_mean, 3.0);
}

TEST(Ensemble, SampledThermalMode) {
  RunConfig cfg = small_config(Thermal{2.0}, 60);
  cfg.thermal_mode = ThermalMode::Sampled;
  const EnsembleStats st = run_ensemble(cfg);
  std::size_t total = 0;
  for (auto c : st.sampled_levels) total += c;
  EXPECT_EQ(total, 60u);
  for (const auto& s : st.summaries) {
    EXPECT_GE(s.sampled_level, 0);
    for (const auto& e : s.jumps) EXPECT_NEAR(e.n_after, e.n_predicted, 1e-8);
  }
}

TEST(Ensemble, ErrorsCarryTrajectoryIndex) {
  RunConfig cfg = small_config(Number{40}, 3);
  cfg.params.dt = 0.01;
  try {
    run_ensemble(cfg);
    FAIL() << "expected StepSizeError";
  } catch (const StepSizeError& e) {
    EXPECT_NE(std::string(e.what()).find("trajectory 0"), std::string::npos) << e.what();
  }
}

TEST(Ensemble, ConfigValidation) {
  RunConfig cfg = small_config(Number{3});
  cfg.trajectories = 0;
  EXPECT_THROW(run_ensemble(cfg), ConfigError);
  cfg = small_config(Number{3});
  cfg.snapshot_stride = 5000;
  EXPECT_THROW(run_ensemble(cfg), ConfigError);
  cfg = small_config(Number{3});
  cfg.params.dim = 3;
  EXPECT_THROW(run_ensemble(cfg), TruncationError);
}

TEST(CompareOracle, RejectsMismatchedConfig) {
  RunConfig cfg = small_config(Number{3}, 10);
  const EnsembleStats st = run_ensemble(cfg);
  RunConfig other = cfg;
  other.trajectories = 11;
  EXPECT_THROW(compare_oracle(st, other), ConfigError);
  other = cfg;
  other.params.t_final = 2.0;
  EXPECT_THROW(compare_oracle(st, other), ConfigError);
}

TEST(CompareOracle, ReportsChecksPerInput) {
  RunConfig cfg = small_config(Coherent{1.0}, 30);
  const OracleReport coh = compare_oracle(run_ensemble(cfg), cfg);
  std::vector<std::string> names;
  for (const auto& c : coh.checks) names.push_back(c.name);
  EXPECT_NE(std::find(names.begin(), names.end(), "homodyne_mean_z"), names.end());
  EXPECT_NE(std::find(names.begin(), names.end(), "count_mean_z"), names.end());

  cfg = small_config(Number{3}, 30);
  const OracleReport num = compare_oracle(run_ensemble(cfg), cfg);
  names.clear();
  for (const auto& c : num.checks) names.push_back(c.name);
  EXPECT_NE(std::find(names.begin(), names.end(), "jump_exactly_minus_one"), names.end());
  EXPECT_EQ(std::find(names.begin(), names.end(), "homodyne_mean_z"), names.end());
}

TEST(CompareOracle, RoundoffSpreadIsComparedExactly) {
  // Every bundle trajectory starts from the same mixture, so the t = 0 spread is
  // pure roundoff and must not enter the z-score.
  const RunConfig cfg = small_config(Thermal{3.0}, 40);
  const EnsembleStats st = run_ensemble(cfg);
  ASSERT_LT(st.sem_n[0], 1e-14);
  double worst = 0.0;
  for (std::size_t k = 1; k < st.times.size(); ++k) {
    worst = std::max(worst, std::abs(st.mean_n[k] - st.analytic_mean[k]) / st.sem_n[k]);
  }
  const OracleReport rep = compare_oracle(st, cfg);
  EXPECT_EQ(rep.checks.front().name, "decay_curve_max_z");
  EXPECT_DOUBLE_EQ(rep.checks.front().value, worst);
}

TEST(Output, FilesRoundTrip) {
  TempDir dir;
  RunConfig cfg = small_config(Number{3}, 12);
  cfg.keep_records = true;
  const EnsembleStats st = run_ensemble(cfg);
  write_all(dir.path(), st, cfg);

  const auto ens = read_csv(dir.path() / "ensemble.csv");
  ASSERT_EQ(ens.size(), st.times.size() + 1);
  EXPECT_EQ(ens[0], (std::vector<std::string>{"t", "mean_n", "sem_n", "analytic_mean"}));
  for (std::size_t k = 0; k < st.times.size(); ++k) {
    EXPECT_EQ(std::stod(ens[k + 1][0]), st.times[k]);
    EXPECT_EQ(std::stod(ens[k + 1][1]), st.mean_n[k]);
    EXPECT_EQ(std::stod(ens[k + 1][2]), st.sem_n[k]);
  }

  std::ifstream in(dir.path() / "trajectories.jsonl");
  std::string line;
  std::size_t i = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("traj").get<std::size_t>(), i);
    EXPECT_EQ(j.at("jumps").get<std::vector<double>>(), st.summaries[i].jump_times);
    EXPECT_EQ(j.at("final_n").get<double>(), st.summaries[i].final_n);
    EXPECT_EQ(j.at("dW").size(), cfg.params.step_count());
    ++i;
  }
  EXPECT_EQ(i, 12u);

  const auto counts = read_csv(dir.path() / "counts.csv");
  EXPECT_EQ(counts[0], (std::vector<std::string>{"m", "count", "probability"}));
  double total = 0.0;
  for (std::size_t r = 1; r < counts.size(); ++r) total += std::stod(counts[r][2]);
  EXPECT_NEAR(total, 1.0, 1e-15);
}

TEST(Output, RerunIsByteIdentical) {
  TempDir a_dir;
  const std::filesystem::path a = a_dir.path() / "a", b = a_dir.path() / "b";
  std::filesystem::create_directories(a);
  std::filesystem::create_directories(b);
  const RunConfig cfg = small_config(Squeezed{0.5, 0.4}, 10);
  write_all(a, run_ensemble(cfg), cfg);
  RunConfig threaded = cfg;
  threaded.workers = 4;
  write_all(b, run_ensemble(threaded), threaded);
  for (const char* name : {"ensemble.csv", "trajectories.jsonl", "counts.csv"}) {
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  }
}

TEST(Output, UnwritablePathIsConfigError) {
  const EnsembleStats st = run_ensemble(small_config(Number{1}, 2));
  EXPECT_THROW(write_ensemble_csv("/nonexistent-dir/x.csv", st), ConfigError);
}
