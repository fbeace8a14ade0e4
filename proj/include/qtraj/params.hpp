#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>

#include "qtraj/errors.hpp"

namespace qtraj {

using complex = std::complex<double>;
inline constexpr complex I{0.0, 1.0};

/// Physical and numerical parameters of a simultaneous counting/homodyne run.
///
/// Rates are in inverse time units. The total loss rate is derived, never
/// stored, so it always equals gamma1 + gamma2.
struct SimParams {
  double gamma1 = 1.0;  ///< photodetector coupling
  double gamma2 = 1.0;  ///< homodyne coupling
  double omega = 0.0;   ///< detuning with respect to the local oscillator
  double dt = 1e-3;
  double t_final = 4.0;
  std::size_t dim = 32;
  std::uint64_t seed = 42;

  double total_loss() const { return gamma1 + gamma2; }

  /// iω + Γ/2, the complex rate of the no-count decay.
  complex decay_rate() const { return complex(0.5 * total_loss(), omega); }

  /// Number of integration steps covering [0, t_final].
  std::size_t step_count() const {
    const double ratio = t_final / dt;
    const double nearest = std::round(ratio);
    if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, ratio)) {
      return static_cast<std::size_t>(nearest);
    }
    return static_cast<std::size_t>(std::ceil(ratio));
  }

  void validate() const {
    if (!(gamma1 >= 0.0) || !(gamma2 >= 0.0)) {
      throw ConfigError("coupling rates must be non-negative");
    }
    if (!std::isfinite(omega)) throw ConfigError("detuning must be finite");
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (!(t_final > 0.0)) throw ConfigError("t_final must be positive");
    if (dim < 2) throw DimensionError("truncation dimension must be at least 2");
  }
};

}  // namespace qtraj
