#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "qtraj/analytics.hpp"
#include "qtraj/engine.hpp"
#include "qtraj/errors.hpp"
#include "qtraj/fock.hpp"
#include "qtraj/params.hpp"
#include "qtraj/rng.hpp"

namespace qtraj {

/// Bundle: one conditional mixture per trajectory (exact). Sampled: draw a
/// number state per trajectory from the thermal weights.
enum class ThermalMode { Bundle, Sampled };

struct RunConfig {
  SimParams params;
  InitialState init = Number{3};
  std::size_t trajectories = 10000;
  std::size_t snapshot_stride = 100;
  ThermalMode thermal_mode = ThermalMode::Bundle;
  bool keep_records = false;     // per-trajectory dW~ arrays
  std::size_t sample_paths = 0;  // individual <n>(t) paths kept for plotting
  std::size_t workers = 0;       // 0: hardware concurrency

  void validate() const {
    params.validate();
    qtraj::validate(init);
    if (trajectories < 1) throw ConfigError("at least one trajectory is required");
    if (snapshot_stride < 1) throw ConfigError("snapshot stride must be positive");
    if (static_cast<double>(snapshot_stride) * params.dt > params.t_final * (1.0 + 1e-12)) {
      throw ConfigError("snapshot stride times dt exceeds t_final");
    }
    if (const auto* num = std::get_if<Number>(&init); num && num->n >= params.dim) {
      throw TruncationError("number state n = " + std::to_string(num->n) +
                            " does not fit in dimension " + std::to_string(params.dim));
    }
  }
};

struct TrajectorySummary {
  std::size_t index = 0;
  std::vector<double> jump_times;
  std::vector<JumpEvent> jumps;
  double final_n = 0.0;
  complex A_final{0.0};
  long sampled_level = -1;  // thermal sampled mode only
  std::vector<double> dWt;
};

struct EnsembleStats {
  std::vector<double> times;
  std::vector<double> mean_n;
  std::vector<double> sem_n;
  std::vector<double> analytic_mean;
  std::vector<std::size_t> count_histogram;
  std::vector<TrajectorySummary> summaries;
  std::vector<std::vector<double>> sample_paths;
  std::vector<std::size_t> sampled_levels;  // thermal sampled mode histogram
  double initial_mean = 0.0;
  double t_final = 0.0;

  std::size_t trajectories() const { return summaries.size(); }
};

namespace detail {

[[noreturn]] inline void rethrow_with_index(std::exception_ptr e, std::size_t index) {
  const std::string where = "trajectory " + std::to_string(index) + ": ";
  try {
    std::rethrow_exception(e);
  } catch (const TruncationError& err) {
    throw TruncationError(where + err.what());
  } catch (const StepSizeError& err) {
    throw StepSizeError(where + err.what());
  } catch (const ConfigError& err) {
    throw ConfigError(where + err.what());
  } catch (const DimensionError& err) {
    throw DimensionError(where + err.what());
  } catch (const DomainError& err) {
    throw DomainError(where + err.what());
  } catch (...) {
    throw;
  }
}

inline std::size_t sample_level(const std::vector<double>& weights, double u) {
  double acc = 0.0;
  for (std::size_t n = 0; n < weights.size(); ++n) {
    acc += weights[n];
    if (u < acc) return n;
  }
  return weights.size() - 1;
}

}  // namespace detail

/// Runs cfg.trajectories independent trajectories. Trajectory i always uses
/// RandomStream(seed, i), and the reduction runs in index order, so the result
/// does not depend on the number of workers.
inline EnsembleStats run_ensemble(const RunConfig& cfg) {
  cfg.validate();
  const SimParams& p = cfg.params;
  const PreparedState prepared = make_state(cfg.init, p.dim);
  const std::size_t M = cfg.trajectories;
  const bool sampled =
      cfg.thermal_mode == ThermalMode::Sampled && std::holds_alternative<NumberMixture>(prepared);

  TrajectoryOptions opt;
  opt.snapshot_stride = cfg.snapshot_stride;
  opt.keep_record = cfg.keep_records;

  std::vector<std::vector<double>> paths(M);
  std::vector<TrajectorySummary> summaries(M);
  std::vector<std::exception_ptr> errors(M);
  std::vector<double> snapshot_times;

  auto work = [&](std::size_t i) {
    try {
      RandomStream rng(p.seed, i);
      TrajectorySummary& sum = summaries[i];
      sum.index = i;
      ConditionalState start = [&] {
        if (sampled) {
          const auto& mix = std::get<NumberMixture>(prepared);
          const std::size_t n = detail::sample_level(mix.weights, rng.unit());
          sum.sampled_level = static_cast<long>(n);
          return ConditionalState::pure(StateVector::basis(p.dim, n));
        }
        return ConditionalState::from_prepared(prepared);
      }();
      Trajectory tr = run_trajectory(std::move(start), p, rng, opt);
      sum.jump_times = std::move(tr.record.counts.times);
      sum.jumps = std::move(tr.jumps);
      sum.final_n = tr.final_n;
      sum.A_final = tr.accumulators.A;
      sum.dWt = std::move(tr.record.dWt);
      paths[i] = std::move(tr.n_expect);
      if (i == 0) snapshot_times = std::move(tr.times);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  std::size_t workers = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, M);
  if (workers == 1) {
    for (std::size_t i = 0; i < M; ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < M; i += workers) work(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < M; ++i) {
    if (errors[i]) detail::rethrow_with_index(errors[i], i);
  }

  EnsembleStats st;
  st.t_final = static_cast<double>(p.step_count()) * p.dt;
  st.times = snapshot_times;
  st.initial_mean = std::visit(
      [](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, StateVector>) {
          double m = 0.0;
          for (std::size_t k = 0; k < s.dim(); ++k) m += static_cast<double>(k) * std::norm(s[k]);
          return m / s.norm2();
        } else {
          return s.mean();
        }
      },
      prepared);
  const std::size_t S = st.times.size();
  st.mean_n.assign(S, 0.0);
  st.sem_n.assign(S, 0.0);
  st.analytic_mean.resize(S);
  for (std::size_t k = 0; k < S; ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < M; ++i) mean += paths[i][k];
    mean /= static_cast<double>(M);
    double ss = 0.0;
    for (std::size_t i = 0; i < M; ++i) ss += (paths[i][k] - mean) * (paths[i][k] - mean);
    st.mean_n[k] = mean;
    st.sem_n[k] = M > 1 ? std::sqrt(ss / static_cast<double>(M - 1) / static_cast<double>(M)) : 0.0;
    st.analytic_mean[k] = st.initial_mean * std::exp(-p.total_loss() * st.times[k]);
  }
  std::size_t max_count = 0;
  for (const auto& s : summaries) max_count = std::max(max_count, s.jump_times.size());
  st.count_histogram.assign(max_count + 1, 0);
  for (const auto& s : summaries) ++st.count_histogram[s.jump_times.size()];
  if (sampled) {
    st.sampled_levels.assign(std::get<NumberMixture>(prepared).weights.size(), 0);
    for (const auto& s : summaries) ++st.sampled_levels[static_cast<std::size_t>(s.sampled_level)];
  }
  const std::size_t keep = std::min(cfg.sample_paths, M);
  st.sample_paths.assign(paths.begin(), paths.begin() + static_cast<long>(keep));
  st.summaries = std::move(summaries);
  return st;
}

// ---------------------------------------------------------------------------
// Oracle comparison.

struct OracleCheck {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::string detail;
};

struct OracleReport {
  std::vector<OracleCheck> checks;

  bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
  }
};

inline constexpr double kDecayZLimit = 4.0;
inline constexpr double kMomentZLimit = 3.0;
inline constexpr double kJumpLawTolerance = 1e-9;

/// z-scores and audits of an ensemble against the analytic oracles.
inline OracleReport compare_oracle(const EnsembleStats& st, const RunConfig& cfg) {
  const SimParams& p = cfg.params;
  if (st.trajectories() != cfg.trajectories) {
    throw ConfigError("statistics were produced with a different trajectory count");
  }
  if (std::abs(st.t_final - static_cast<double>(p.step_count()) * p.dt) > 1e-12) {
    throw ConfigError("statistics were produced with a different horizon or step");
  }
  OracleReport rep;
  const auto M = static_cast<double>(st.trajectories());

  {
    double worst = 0.0;
    bool exact_ok = true;
    for (std::size_t k = 0; k < st.times.size(); ++k) {
      const double diff = st.mean_n[k] - st.analytic_mean[k];
      // Spread at roundoff level (t = 0, or a deterministic ensemble) is compared exactly.
      if (st.sem_n[k] > 1e-12 * std::max(1.0, std::abs(st.analytic_mean[k]))) {
        worst = std::max(worst, std::abs(diff) / st.sem_n[k]);
      } else if (std::abs(diff) > 1e-6) {
        exact_ok = false;
      }
    }
    rep.checks.push_back({"decay_curve_max_z", worst, kDecayZLimit, exact_ok && worst <= kDecayZLimit,
                          "ensemble <n>(t) against <n>_0 e^{-Gamma t}"});
  }

  {
    double mean = 0.0;
    for (const auto& s : st.summaries) mean += static_cast<double>(s.jump_times.size());
    mean /= M;
    const CountMoments cm = count_moments_from_gf(cfg.init, st.t_final, p);
    const double z = cm.variance > 0.0 ? (mean - cm.mean) / std::sqrt(cm.variance / M) : 0.0;
    rep.checks.push_back({"count_mean_z", std::abs(z), kDecayZLimit, std::abs(z) <= kDecayZLimit,
                          "mean count against the generating-function derivative"});
  }

  if (const auto* coh = std::get_if<Coherent>(&cfg.init)) {
    const auto mom = coherent_homodyne_moments(coh->alpha, p, st.t_final);
    complex mean = 0.0;
    for (const auto& s : st.summaries) mean += s.A_final;
    mean /= M;
    const double var_re = 0.5 * (mom.variance + mom.pseudo_variance.real());
    const double var_im = 0.5 * (mom.variance - mom.pseudo_variance.real());
    const double z_re = (mean.real() - mom.mean.real()) / std::sqrt(var_re / M);
    const double z_im = var_im > 1e-14 ? (mean.imag() - mom.mean.imag()) / std::sqrt(var_im / M)
                                       : 0.0;
    const double z = std::max(std::abs(z_re), std::abs(z_im));
    rep.checks.push_back({"homodyne_mean_z", z, kMomentZLimit, z <= kMomentZLimit,
                          "mean of A(T) against the coherent-state moment formula"});
  }

  std::size_t events = 0, positive = 0, minus_one = 0;
  double law = 0.0;
  for (const auto& s : st.summaries) {
    for (const auto& e : s.jumps) {
      ++events;
      law = std::max(law, std::abs(e.n_after - e.n_predicted));
      if (e.delta_n() > 0.0) ++positive;
      if (std::abs(e.delta_n() + 1.0) <= kJumpLawTolerance) ++minus_one;
    }
  }
  rep.checks.push_back({"jump_update_law", law, 1e-8, law <= 1e-8,
                        std::to_string(events) + " jumps against <n> - 1 + Var/<n>"});
  if (std::holds_alternative<Number>(cfg.init)) {
    rep.checks.push_back({"jump_exactly_minus_one", static_cast<double>(events - minus_one), 0.0,
                          minus_one == events,
                          std::to_string(minus_one) + " of " + std::to_string(events) +
                              " jumps change <n> by -1 within 1e-9"});
  } else if (std::holds_alternative<Thermal>(cfg.init) ||
             std::holds_alternative<Squeezed>(cfg.init)) {
    rep.checks.push_back({"jump_positive", static_cast<double>(events - positive), 0.0,
                          positive == events,
                          std::to_string(positive) + " of " + std::to_string(events) +
                              " jumps increase <n>"});
  }
  return rep;
}

}  // namespace qtraj
