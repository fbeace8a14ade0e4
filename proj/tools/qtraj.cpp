#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "qtraj/io.hpp"
#include "qtraj/parse.hpp"
#include "qtraj/qtraj.hpp"

namespace {

using namespace qtraj;

enum Exit { kOk = 0, kConfig = 2, kNumerical = 3, kOracle = 4 };

struct Common {
  std::string init = "number:n=3";
  SimParams params;
  std::size_t dim = 0;
};

void add_physics(CLI::App* cmd, Common& c) {
  cmd->add_option("--init", c.init, "coherent:alpha=1+0i | number:n=3 | thermal:nbar=3 | "
                                    "squeezed:alpha=1+0i,r=1.2")
      ->capture_default_str();
  cmd->add_option("--gamma1", c.params.gamma1, "photodetector coupling")->capture_default_str();
  cmd->add_option("--gamma2", c.params.gamma2, "homodyne coupling")->capture_default_str();
  cmd->add_option("--omega", c.params.omega, "detuning")->capture_default_str();
}

void add_integration(CLI::App* cmd, Common& c) {
  cmd->add_option("--dt", c.params.dt)->capture_default_str();
  cmd->add_option("--t-final", c.params.t_final)->capture_default_str();
  cmd->add_option("--dim", c.dim, "Fock truncation (default: chosen from the initial state)");
  cmd->add_option("--seed", c.params.seed)->capture_default_str();
}

struct Resolved {
  InitialState init;
  SimParams params;
};

Resolved resolve(const Common& c) {
  try {
    Resolved r{parse_initial_state(c.init), c.params};
    r.params.dim = c.dim ? c.dim : default_dimension(r.init);
    r.params.validate();
    return r;
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
}

std::string fmt_complex(complex z) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.17g%+.17gi", z.real(), z.imag());
  return buf;
}

void print_report(const OracleReport& rep) {
  for (const auto& c : rep.checks) {
    std::printf("%-24s %-4s value=%.6g threshold=%.6g  %s\n", c.name.c_str(),
                c.pass ? "PASS" : "FAIL", c.value, c.threshold, c.detail.c_str());
  }
}

struct EnsembleArgs {
  std::size_t trajectories = 10000;
  std::size_t snapshot_stride = 100;
  std::string thermal_mode = "bundle";
  std::size_t workers = 0;
  bool strict = false;
};

RunConfig make_config(const Resolved& r, const EnsembleArgs& e) {
  RunConfig cfg;
  cfg.params = r.params;
  cfg.init = r.init;
  cfg.trajectories = e.trajectories;
  cfg.snapshot_stride = e.snapshot_stride;
  cfg.thermal_mode = e.thermal_mode == "sampled" ? ThermalMode::Sampled : ThermalMode::Bundle;
  cfg.workers = e.workers;
  return cfg;
}

void add_ensemble(CLI::App* cmd, EnsembleArgs& e) {
  cmd->add_option("--trajectories,-M", e.trajectories)->capture_default_str();
  cmd->add_option("--snapshot-stride", e.snapshot_stride, "steps between snapshots")
      ->capture_default_str();
  cmd->add_option("--thermal-mode", e.thermal_mode,
                  "bundle: exact conditional mixture; sampled: one number state per trajectory")
      ->check(CLI::IsMember({"bundle", "sampled"}))
      ->capture_default_str();
  cmd->add_option("--workers", e.workers, "threads (0: all cores)")->capture_default_str();
  cmd->add_flag("--strict", e.strict, "exit 4 when an oracle check fails");
}

int run_simulate(const Common& c, const EnsembleArgs& e, const std::string& out_dir, bool record_dW,
                 std::size_t sample_paths) {
  const Resolved r = resolve(c);
  RunConfig cfg = make_config(r, e);
  cfg.keep_records = record_dW;
  cfg.sample_paths = sample_paths;
  const auto start = std::chrono::steady_clock::now();
  const EnsembleStats st = run_ensemble(cfg);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const OracleReport rep = compare_oracle(st, cfg);

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  write_ensemble_csv((dir / "ensemble.csv").string(), st);
  write_trajectories_jsonl((dir / "trajectories.jsonl").string(), st, record_dW);
  write_counts_csv((dir / "counts.csv").string(), st);
  if (!st.sample_paths.empty()) write_paths_csv((dir / "paths.csv").string(), st);
  if (!st.sampled_levels.empty()) write_sampled_levels_csv((dir / "thermal_levels.csv").string(), st);
  {
    nlohmann::ordered_json j;
    j["init"] = describe(cfg.init);
    j["gamma1"] = cfg.params.gamma1;
    j["gamma2"] = cfg.params.gamma2;
    j["omega"] = cfg.params.omega;
    j["dt"] = cfg.params.dt;
    j["t_final"] = cfg.params.t_final;
    j["dim"] = cfg.params.dim;
    j["seed"] = cfg.params.seed;
    j["trajectories"] = cfg.trajectories;
    j["thermal_mode"] = e.thermal_mode;
    j["initial_mean"] = st.initial_mean;
    j["checks"] = report_json(rep);
    auto out = detail::open_output((dir / "report.json").string());
    out << j.dump(2) << '\n';
  }
  std::fprintf(stderr, "%zu trajectories of %s in %.2f s, dim %zu\n", cfg.trajectories,
               describe(cfg.init).c_str(), secs, cfg.params.dim);
  print_report(rep);
  return e.strict && !rep.all_pass() ? kOracle : kOk;
}

int run_oracle(const Common& c, const EnsembleArgs& e) {
  const Resolved r = resolve(c);
  const RunConfig cfg = make_config(r, e);
  const EnsembleStats st = run_ensemble(cfg);
  const OracleReport rep = compare_oracle(st, cfg);
  print_report(rep);
  return e.strict && !rep.all_pass() ? kOracle : kOk;
}

int run_gf(const Common& c, const std::string& xi_text, const std::string& eta_text,
           const std::string& t_text) {
  const Resolved r = resolve(c);
  const complex xi = parse_complex(xi_text);
  const complex eta = parse_complex(eta_text);
  const double t = parse_real(t_text);
  const complex M = generating_function(r.init, GFQuery::scalar(xi, eta, t), r.params);
  const CountMoments cm = count_moments_from_gf(r.init, t, r.params);
  // d/ds log M at xi = s and xi = i s give 2 Re E[A] and -2 Im E[A].
  const double h = 1e-5;
  auto logm = [&](complex x) {
    return std::log(generating_function(r.init, GFQuery::scalar(x, 0.0, t), r.params)).real();
  };
  const double re = (logm(h) - logm(-h)) / (4.0 * h);
  const double im = -(logm(complex(0.0, h)) - logm(complex(0.0, -h))) / (4.0 * h);
  std::printf("M %s\n", fmt_complex(M).c_str());
  std::printf("count_mean %.17g\n", cm.mean);
  std::printf("count_variance %.17g\n", cm.variance);
  std::printf("A_mean %s\n", fmt_complex({re + 0.0, im + 0.0}).c_str());
  return kOk;
}

int run_pdf(const Common& c, long m, const std::string& t_text, const std::string& A_text,
            const std::string& B_text) {
  const Resolved r = resolve(c);
  const double t = parse_real(t_text);
  RecordAccumulators acc = RecordAccumulators::at(parse_complex(A_text), t, r.params);
  if (!B_text.empty()) acc.B = parse_complex(B_text);
  std::printf("log_p %.17g\n", joint_density_pm(r.init, m, acc, r.params));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory simulator for simultaneous photon counting and homodyne detection"};
  app.require_subcommand(1);

  Common common;
  EnsembleArgs ens;
  std::string out_dir = "out";
  bool record_dW = false;
  std::size_t sample_paths = 0;
  auto* sim = app.add_subcommand("simulate", "run an ensemble and write plot-data files");
  add_physics(sim, common);
  add_integration(sim, common);
  add_ensemble(sim, ens);
  sim->add_option("--out", out_dir, "output directory")->capture_default_str();
  sim->add_flag("--record-dW", record_dW, "store every homodyne increment in trajectories.jsonl");
  sim->add_option("--sample-paths", sample_paths, "individual <n>(t) paths written to paths.csv");

  auto* orc = app.add_subcommand("oracle", "run an ensemble and print the oracle comparison");
  add_physics(orc, common);
  add_integration(orc, common);
  add_ensemble(orc, ens);

  std::string xi = "0", eta = "0", t_text = "1";
  auto* gf = app.add_subcommand("gf", "evaluate the generating function and count moments");
  add_physics(gf, common);
  gf->add_option("--xi", xi, "complex homodyne argument")->capture_default_str();
  gf->add_option("--eta", eta, "count argument (complex allowed)")->capture_default_str();
  gf->add_option("--t", t_text, "horizon, or inf")->capture_default_str();
  gf->add_option("--dim", common.dim);

  long m = 0;
  std::string A = "0", B;
  auto* pdf = app.add_subcommand("pdf", "print log p_m(t; W) for given record functionals");
  add_physics(pdf, common);
  pdf->add_option("--m", m)->required();
  pdf->add_option("--t", t_text, "horizon, or inf")->capture_default_str();
  pdf->add_option("--A", A, "record functional A(t)")->capture_default_str();
  pdf->add_option("--B", B, "override B(t) (default: closed form)");
  pdf->add_option("--dim", common.dim);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*sim) return run_simulate(common, ens, out_dir, record_dW, sample_paths);
    if (*orc) return run_oracle(common, ens);
    if (*gf) return run_gf(common, xi, eta, t_text);
    if (*pdf) return run_pdf(common, m, t_text, A, B);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const DimensionError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const Error& e) {
    std::cerr << "numerical guard: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfig;
  }
  return kOk;
}
