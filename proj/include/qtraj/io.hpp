#pragma once

#include <cstddef>
#include <fstream>
#include <iomanip>
#include <string>

#include "json.hpp"
#include "qtraj/ensemble.hpp"
#include "qtraj/errors.hpp"

namespace qtraj {

namespace detail {

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << std::setprecision(17);
  return out;
}

}  // namespace detail

inline void write_ensemble_csv(const std::string& path, const EnsembleStats& st) {
  auto out = detail::open_output(path);
  out << "t,mean_n,sem_n,analytic_mean\n";
  for (std::size_t k = 0; k < st.times.size(); ++k) {
    out << st.times[k] << ',' << st.mean_n[k] << ',' << st.sem_n[k] << ',' << st.analytic_mean[k]
        << '\n';
  }
}

inline void write_trajectories_jsonl(const std::string& path, const EnsembleStats& st,
                                     bool include_dW) {
  auto out = detail::open_output(path);
  for (const auto& s : st.summaries) {
    nlohmann::ordered_json j;
    j["traj"] = s.index;
    j["jumps"] = s.jump_times;
    j["final_n"] = s.final_n;
    if (s.sampled_level >= 0) j["initial_n"] = s.sampled_level;
    if (include_dW) j["dW"] = s.dWt;
    out << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict) << '\n';
  }
}

inline void write_counts_csv(const std::string& path, const EnsembleStats& st) {
  auto out = detail::open_output(path);
  out << "m,count,probability\n";
  const auto M = static_cast<double>(st.trajectories());
  for (std::size_t m = 0; m < st.count_histogram.size(); ++m) {
    out << m << ',' << st.count_histogram[m] << ',' << static_cast<double>(st.count_histogram[m]) / M
        << '\n';
  }
}

inline void write_paths_csv(const std::string& path, const EnsembleStats& st) {
  auto out = detail::open_output(path);
  out << 't';
  for (std::size_t i = 0; i < st.sample_paths.size(); ++i) out << ",traj" << i;
  out << '\n';
  for (std::size_t k = 0; k < st.times.size(); ++k) {
    out << st.times[k];
    for (const auto& path_i : st.sample_paths) out << ',' << path_i[k];
    out << '\n';
  }
}

inline void write_sampled_levels_csv(const std::string& path, const EnsembleStats& st) {
  auto out = detail::open_output(path);
  out << "n,count\n";
  for (std::size_t n = 0; n < st.sampled_levels.size(); ++n) {
    out << n << ',' << st.sampled_levels[n] << '\n';
  }
}

inline nlohmann::ordered_json report_json(const OracleReport& rep) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& c : rep.checks) {
    j.push_back({{"name", c.name},
                 {"value", c.value},
                 {"threshold", c.threshold},
                 {"pass", c.pass},
                 {"detail", c.detail}});
  }
  return j;
}

}  // namespace qtraj
