#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "qtraj/errors.hpp"
#include "qtraj/fock.hpp"
#include "qtraj/params.hpp"

namespace qtraj {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// e^z - 1 without cancellation for small |z|.
inline complex expm1(complex z) {
  const double half_sin = std::sin(0.5 * z.imag());
  const double re = std::expm1(z.real()) * std::cos(z.imag()) - 2.0 * half_sin * half_sin;
  return {re, std::exp(z.real()) * std::sin(z.imag())};
}

/// (1 - e^{-z t}) / z, including the z -> 0 and t -> infinity limits.
inline complex decay_integral(complex z, double t) {
  if (std::isinf(t)) {
    if (!(z.real() > 0.0)) throw DomainError("infinite-horizon integral needs Re z > 0");
    return 1.0 / z;
  }
  const complex zt = z * t;
  if (std::abs(zt) < 1e-8) return t * (1.0 - 0.5 * zt);
  return -qtraj::expm1(-zt) / z;
}

/// B(t) = -(gamma2/2) (1 - e^{-(2i omega + Gamma) t}) / (2i omega + Gamma).
inline complex b_closed_form(const SimParams& p, double t) {
  if (p.gamma2 == 0.0) return 0.0;
  return -0.5 * p.gamma2 * decay_integral(2.0 * p.decay_rate(), t);
}

/// Running values of the record functionals A(t) and B(t).
struct RecordAccumulators {
  complex A{0.0};
  complex B{0.0};
  double t = 0.0;

  bool infinite() const { return std::isinf(t); }

  /// e^{(i omega + Gamma/2) t} A(t)
  complex A_rotated(const SimParams& p) const {
    if (infinite()) throw DomainError("rotated accumulators diverge at t = infinity");
    return std::exp(p.decay_rate() * t) * A;
  }
  /// e^{(2i omega + Gamma) t} B(t)
  complex B_rotated(const SimParams& p) const {
    if (infinite()) throw DomainError("rotated accumulators diverge at t = infinity");
    return std::exp(2.0 * p.decay_rate() * t) * B;
  }

  /// Accumulators for a given A(t) with B(t) taken from its closed form.
  static RecordAccumulators at(complex A, double t, const SimParams& p) {
    return {A, b_closed_form(p, t), t};
  }
};

/// Left-point increment A += sqrt(gamma2) e^{-(i omega + Gamma/2) t} dW~.
inline RecordAccumulators accumulate(RecordAccumulators acc, double dWt, double dt,
                                     const SimParams& p) {
  if (!(dt > 0.0)) throw DomainError("dt must be positive");
  acc.A += std::sqrt(p.gamma2) * std::exp(-p.decay_rate() * acc.t) * dWt;
  acc.t += dt;
  acc.B = b_closed_form(p, acc.t);
  return acc;
}

inline RecordAccumulators accumulate_record(const std::vector<double>& dWt, double dt,
                                            const SimParams& p) {
  RecordAccumulators acc;
  for (double w : dWt) acc = accumulate(acc, w, dt, p);
  return acc;
}

/// Ordered photocount times.
struct CountRecord {
  std::vector<double> times;

  std::size_t m() const { return times.size(); }

  void validate(double horizon) const {
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (!(times[i] >= 0.0) || times[i] > horizon) {
        throw DomainError("count time " + std::to_string(times[i]) + " outside [0, t]");
      }
      if (i > 0 && !(times[i] > times[i - 1])) {
        throw DomainError("count times must be strictly increasing");
      }
    }
  }
};

inline constexpr double kPropagatorLeakageLimit = 1e-6;

namespace detail {

/// Norm that the top retained level pushes into lower levels through
/// exp(Aa + Ba^2), relative to the image. Levels above the cutoff would feed
/// the same components, so a large share means the result cannot be trusted.
inline double boundary_share(const Vector& psi0, const Vector& image, complex A, complex B) {
  const Eigen::Index d = psi0.size();
  Vector top = Vector::Zero(d);
  top[d - 1] = psi0[d - 1];
  if (top[d - 1] == complex(0.0)) return 0.0;
  const double total = image.squaredNorm();
  Vector fed = apply_lowering_exp(top, A, B);
  fed[d - 1] = 0.0;
  const double edge = fed.squaredNorm();
  if (total == 0.0) return edge > 0.0 ? 1.0 : 0.0;
  return edge / total;
}

}  // namespace detail

/// N(t,0;W~)|psi0> = e^{-(i omega + Gamma/2) t n} exp[A a + B a^2] |psi0>, unnormalized.
inline StateVector no_count_propagate(const StateVector& psi0, const RecordAccumulators& acc,
                                      const SimParams& p) {
  const Vector v = apply_lowering_exp(psi0.amps(), acc.A, acc.B);
  const double share = detail::boundary_share(psi0.amps(), v, acc.A, acc.B);
  if (share > kPropagatorLeakageLimit) {
    throw TruncationError("no-count propagation draws " + std::to_string(share) +
                          " of its norm from the truncation boundary");
  }
  if (acc.infinite()) {
    Vector out = Vector::Zero(v.size());
    out[0] = v[0];
    return StateVector(std::move(out));
  }
  return StateVector(apply_number_exp(v, -p.decay_rate() * acc.t));
}

/// Unnormalized conditional vector plus its c-number prefactor in log form.
struct ConditionalVector {
  StateVector vector;
  complex log_prefactor{0.0};

  bool is_zero() const { return vector.norm2() == 0.0; }
};

/// m-count conditional state
/// gamma1^{m/2} e^{-(i omega + Gamma/2) sum t_k} e^{-(i omega + Gamma/2) t n} a^m exp[A a + B a^2] psi0.
inline ConditionalVector m_count_state(const StateVector& psi0, const CountRecord& counts,
                                       const RecordAccumulators& acc, const SimParams& p) {
  counts.validate(acc.t);
  const std::size_t m = counts.m();
  Vector v = apply_lowering_exp(psi0.amps(), acc.A, acc.B);
  const double share = detail::boundary_share(psi0.amps(), v, acc.A, acc.B);
  if (share > kPropagatorLeakageLimit) {
    throw TruncationError("m-count propagation draws " + std::to_string(share) +
                          " of its norm from the truncation boundary");
  }
  v = apply_ladder_power(v, m);
  if (acc.infinite()) {
    const complex keep = v[0];
    v.setZero();
    v[0] = keep;
  } else {
    v = apply_number_exp(v, -p.decay_rate() * acc.t);
  }
  complex log_pref = 0.0;
  if (m > 0) {
    double sum_t = 0.0;
    for (double tk : counts.times) sum_t += tk;
    log_pref = 0.5 * static_cast<double>(m) * std::log(p.gamma1) - p.decay_rate() * sum_t;
  }
  return {StateVector(std::move(v)), log_pref};
}

}  // namespace qtraj
