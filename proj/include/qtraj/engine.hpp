#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "qtraj/errors.hpp"
#include "qtraj/fock.hpp"
#include "qtraj/params.hpp"
#include "qtraj/propagators.hpp"
#include "qtraj/rng.hpp"

namespace qtraj {

inline constexpr double kJumpProbabilityCap = 0.05;
inline constexpr double kTrajectoryLeakageLimit = 1e-6;

/// Raw moment sums over all branches; divide by s0 for expectations.
struct MomentSums {
  double s0 = 0.0;
  double s1 = 0.0;   // sum k |c_k|^2
  double s2 = 0.0;   // sum k^2 |c_k|^2
  complex a{0.0};    // <a> numerator
  complex naa{0.0};  // <a^dag a a> numerator
  double top = 0.0;  // population of level D-1

  double mean_n() const { return s1 / s0; }
  double mean_n2() const { return s2 / s0; }
  double variance_n() const {
    const double m = mean_n();
    return mean_n2() - m * m;
  }
  complex mean_a() const { return a / s0; }
  complex mean_naa() const { return naa / s0; }
  double leakage() const { return top / s0; }
};

/// Conditional state of the mode. A pure state is a single branch; a thermal
/// input is a bundle of number-state branches that share one measurement
/// record, which is the exact conditional mixture. Branch vectors are kept
/// unnormalized, split into real and imaginary planes, and rescaled together.
class ConditionalState {
 public:
  static ConditionalState pure(const StateVector& psi) {
    ConditionalState s(psi.dim(), 1);
    for (std::size_t k = 0; k < psi.dim(); ++k) s.set(0, k, psi[k]);
    s.top_[0] = static_cast<int>(support_top(psi.amps()));
    s.refresh();
    return s;
  }

  static ConditionalState mixture(const NumberMixture& mix) {
    require_dimension(mix.dim);
    if (mix.weights.size() > mix.dim) throw DimensionError("mixture has more levels than dim");
    ConditionalState s(mix.dim, mix.weights.size());
    for (std::size_t n = 0; n < mix.weights.size(); ++n) {
      if (mix.weights[n] > 0.0) {
        s.set(n, n, std::sqrt(mix.weights[n]));
        s.top_[n] = static_cast<int>(n);
      } else {
        s.top_[n] = -1;
      }
    }
    s.refresh();
    return s;
  }

  static ConditionalState from_prepared(const PreparedState& prepared) {
    if (const auto* sv = std::get_if<StateVector>(&prepared)) return pure(*sv);
    return mixture(std::get<NumberMixture>(prepared));
  }

  std::size_t dim() const { return dim_; }
  std::size_t branch_count() const { return top_.size(); }
  bool is_pure() const { return top_.size() == 1; }

  double mean_n() const { return s1_ / s0_; }
  complex mean_a() const { return x_ / s0_; }

  MomentSums moments() const {
    MomentSums m;
    for (std::size_t b = 0; b < top_.size(); ++b) {
      for (int k = 0; k <= top_[b]; ++k) {
        const complex ck = at(b, k);
        const double pk = std::norm(ck);
        const double kk = static_cast<double>(k);
        m.s0 += pk;
        m.s1 += kk * pk;
        m.s2 += kk * kk * pk;
        if (k > 0) {
          const complex cross = std::conj(at(b, k - 1)) * ck;
          m.a += sqrt_[k] * cross;
          m.naa += sqrt_[k] * (kk - 1.0) * cross;
        }
      }
      if (top_[b] == static_cast<int>(dim_) - 1) m.top += std::norm(at(b, dim_ - 1));
    }
    return m;
  }

  double leakage() const { return moments().leakage(); }

  /// Normalized pure state; only for single-branch states.
  StateVector state() const {
    if (!is_pure()) throw DomainError("a mixture has no single state vector");
    return StateVector(branch_vector(0) / std::sqrt(s0_));
  }

  /// Normalized density matrix sum_b |c_b><c_b| / s0.
  Matrix density_matrix() const {
    const auto d = static_cast<Eigen::Index>(dim_);
    Matrix rho = Matrix::Zero(d, d);
    for (std::size_t b = 0; b < top_.size(); ++b) {
      const Vector c = branch_vector(b);
      rho += c * c.adjoint();
    }
    return rho / s0_;
  }

  void normalize() {
    const double scale = 1.0 / std::sqrt(s0_);
    for (std::size_t b = 0; b < top_.size(); ++b) {
      double* re = re_.data() + b * dim_;
      double* im = im_.data() + b * dim_;
      for (int k = 0; k <= top_[b]; ++k) {
        re[k] *= scale;
        im[k] *= scale;
      }
    }
    s0_ = 1.0;
    s1_ *= scale * scale;
    x_ *= scale * scale;
  }

  /// Applies 1 - (i omega + Gamma/2) n dt + g a to every branch.
  void diffuse(double g, const SimParams& p) {
    const double re_rate = 0.5 * p.total_loss() * p.dt;
    const double im_rate = p.omega * p.dt;
    if (re_rate != cached_re_ || im_rate != cached_im_) {
      for (std::size_t k = 0; k < dim_; ++k) {
        diag_re_[k] = 1.0 - re_rate * static_cast<double>(k);
        diag_im_[k] = -im_rate * static_cast<double>(k);
      }
      cached_re_ = re_rate;
      cached_im_ = im_rate;
    }
    const double* dr = diag_re_.data();
    const double* di = diag_im_.data();
    const double* sq = sqrt_.data();
    double s0 = 0.0, s1 = 0.0, xr = 0.0, xi = 0.0;
    for (std::size_t b = 0; b < top_.size(); ++b) {
      const int top = top_[b];
      if (top < 0) continue;
      double* __restrict re = re_.data() + b * dim_;
      double* __restrict im = im_.data() + b * dim_;
      for (int k = 0; k < top; ++k) {
        const double gs = g * sq[k + 1];
        const double cr = re[k], ci = im[k];
        re[k] = dr[k] * cr - di[k] * ci + gs * re[k + 1];
        im[k] = dr[k] * ci + di[k] * cr + gs * im[k + 1];
      }
      {
        const double cr = re[top], ci = im[top];
        re[top] = dr[top] * cr - di[top] * ci;
        im[top] = dr[top] * ci + di[top] * cr;
      }
      // Two interleaved accumulators per sum shorten the dependency chains.
      double p0[2] = {re[0] * re[0] + im[0] * im[0], 0.0};
      double p1[2] = {0.0, 0.0}, pr[2] = {0.0, 0.0}, pi[2] = {0.0, 0.0};
      int k = 1;
      for (; k + 1 <= top; k += 2) {
        for (int u = 0; u < 2; ++u) {
          const int j = k + u;
          const double pk = re[j] * re[j] + im[j] * im[j];
          p0[u] += pk;
          p1[u] += static_cast<double>(j) * pk;
          pr[u] += sq[j] * (re[j - 1] * re[j] + im[j - 1] * im[j]);
          pi[u] += sq[j] * (re[j - 1] * im[j] - im[j - 1] * re[j]);
        }
      }
      if (k == top) {
        const double pk = re[k] * re[k] + im[k] * im[k];
        p0[0] += pk;
        p1[0] += static_cast<double>(k) * pk;
        pr[0] += sq[k] * (re[k - 1] * re[k] + im[k - 1] * im[k]);
        pi[0] += sq[k] * (re[k - 1] * im[k] - im[k - 1] * re[k]);
      }
      const double bs0 = p0[0] + p0[1];
      s1 += p1[0] + p1[1];
      xr += pr[0] + pr[1];
      xi += pi[0] + pi[1];
      s0 += bs0;
      trim(b, bs0, s0_);
    }
    s0_ = s0;
    s1_ = s1;
    x_ = complex(xr, xi);
    rescale_if_needed();
  }

  /// Applies a to every branch.
  void jump() {
    for (std::size_t b = 0; b < top_.size(); ++b) {
      const int top = top_[b];
      if (top < 0) continue;
      double* re = re_.data() + b * dim_;
      double* im = im_.data() + b * dim_;
      for (int k = 0; k < top; ++k) {
        re[k] = sqrt_[k + 1] * re[k + 1];
        im[k] = sqrt_[k + 1] * im[k + 1];
      }
      re[top] = 0.0;
      im[top] = 0.0;
      top_[b] = top - 1;
    }
    refresh();
    if (!(s0_ > 0.0)) throw UndefinedConditionalError("jump annihilated the conditional state");
    rescale_if_needed();
  }

 private:
  ConditionalState(std::size_t dim, std::size_t branches)
      : dim_(dim),
        re_(dim * branches, 0.0),
        im_(dim * branches, 0.0),
        top_(branches, -1),
        sqrt_(dim + 1),
        diag_re_(dim),
        diag_im_(dim) {
    for (std::size_t k = 0; k <= dim; ++k) sqrt_[k] = std::sqrt(static_cast<double>(k));
  }

  complex at(std::size_t b, std::size_t k) const {
    return {re_[b * dim_ + k], im_[b * dim_ + k]};
  }
  complex at(std::size_t b, int k) const { return at(b, static_cast<std::size_t>(k)); }
  void set(std::size_t b, std::size_t k, complex v) {
    re_[b * dim_ + k] = v.real();
    im_[b * dim_ + k] = v.imag();
  }
  Vector branch_vector(std::size_t b) const {
    Vector v(static_cast<Eigen::Index>(dim_));
    for (std::size_t k = 0; k < dim_; ++k) v[static_cast<Eigen::Index>(k)] = at(b, k);
    return v;
  }

  // Drops top levels whose population is below kTrimFloor of the total norm.
  void trim(std::size_t b, double branch_s0, double total_s0) {
    if (branch_s0 == 0.0) {
      top_[b] = -1;
      return;
    }
    const double floor = kTrimFloor * total_s0;
    while (top_[b] > 0 && std::norm(at(b, top_[b])) < floor) {
      set(b, static_cast<std::size_t>(top_[b]), 0.0);
      --top_[b];
    }
  }

  void refresh() {
    s0_ = 0.0;
    s1_ = 0.0;
    x_ = 0.0;
    for (std::size_t b = 0; b < top_.size(); ++b) {
      for (int k = 0; k <= top_[b]; ++k) {
        const double pk = std::norm(at(b, k));
        s0_ += pk;
        s1_ += static_cast<double>(k) * pk;
        if (k > 0) x_ += sqrt_[k] * std::conj(at(b, k - 1)) * at(b, k);
      }
    }
  }

  void rescale_if_needed() {
    if (s0_ > 1e64 || s0_ < 1e-64) normalize();
  }

  static constexpr double kTrimFloor = 1e-36;

  std::size_t dim_;
  std::vector<double> re_;
  std::vector<double> im_;
  std::vector<int> top_;
  std::vector<double> sqrt_;
  std::vector<double> diag_re_;
  std::vector<double> diag_im_;
  double cached_re_ = -1.0;
  double cached_im_ = 0.0;
  double s0_ = 0.0;
  double s1_ = 0.0;
  complex x_{0.0};
};

struct StepOutcome {
  double dWt = 0.0;
  bool jumped = false;
};

namespace detail {

inline double jump_probability(const ConditionalState& state, const SimParams& p) {
  const double pj = p.gamma1 * state.mean_n() * p.dt;
  if (pj > kJumpProbabilityCap) {
    throw StepSizeError("jump probability " + std::to_string(pj) +
                        " per step exceeds 0.05; reduce dt");
  }
  return pj;
}

inline double diffuse_step(ConditionalState& state, const SimParams& p, RandomStream& rng) {
  const double dW = std::sqrt(p.dt) * rng.gaussian();
  const double sg2 = std::sqrt(p.gamma2);
  const double dWt = sg2 * 2.0 * state.mean_a().real() * p.dt + dW;
  state.diffuse(sg2 * dWt, p);
  return dWt;
}

}  // namespace detail

/// One Euler step of the counting/homodyne measurement. A jump step applies a
/// and records dW~ = 0; otherwise dW~ = sqrt(gamma2) <a + a^dag> dt + dW.
inline StepOutcome step(ConditionalState& state, const SimParams& p, RandomStream& rng) {
  const double pj = detail::jump_probability(state, p);
  if (rng.unit() < pj) {
    state.jump();
    return {0.0, true};
  }
  return {detail::diffuse_step(state, p, rng), false};
}

/// Pure-state form of step: returns the normalized successor.
struct PureStep {
  StateVector state;
  double dWt = 0.0;
  bool jumped = false;
};

inline PureStep step(const StateVector& psi, const SimParams& p, RandomStream& rng) {
  if (!psi.is_normalized(1e-9)) throw DomainError("step requires a normalized state");
  ConditionalState s = ConditionalState::pure(psi);
  const StepOutcome out = step(s, p, rng);
  return {s.state(), out.dWt, out.jumped};
}

/// Moments immediately after a photocount:
/// <n>+ = <n> - 1 + Var(n)/<n>,  <a>+ = <a^dag a a>/<n>.
struct JumpMoments {
  double n = 0.0;
  complex a{0.0};
};

inline JumpMoments jump_update_moments(double n, double n2, complex a, complex naa) {
  if (!(n > 0.0)) throw DomainError("a photocount cannot occur from a state with <n> = 0");
  const double var = n2 - n * n;
  return {n - 1.0 + var / n, a + (naa - n * a) / n};
}

/// Audit record for one photocount.
struct JumpEvent {
  double t = 0.0;
  double n_before = 0.0;
  double var_before = 0.0;
  double n_after = 0.0;
  double n_predicted = 0.0;
  complex a_before{0.0};
  complex a_after{0.0};
  complex a_predicted{0.0};

  double delta_n() const { return n_after - n_before; }
};

struct MeasurementRecord {
  std::vector<double> dWt;
  CountRecord counts;
};

struct TrajectoryOptions {
  std::size_t snapshot_stride = 100;
  bool keep_record = false;
  bool keep_states = false;
  bool audit_jumps = true;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<double> n_expect;
  std::vector<complex> a_expect;
  std::vector<StateVector> states;
  MeasurementRecord record;
  std::vector<JumpEvent> jumps;
  RecordAccumulators accumulators;
  double final_n = 0.0;
  double max_leakage = 0.0;
};

/// Integrates one trajectory over step_count() steps from `init`.
inline Trajectory run_trajectory(ConditionalState state, const SimParams& p, RandomStream& rng,
                                 const TrajectoryOptions& opt = {}) {
  p.validate();
  if (opt.snapshot_stride == 0) throw ConfigError("snapshot stride must be positive");
  if (state.dim() != p.dim) {
    throw DimensionError("state dimension " + std::to_string(state.dim()) +
                         " does not match params.dim " + std::to_string(p.dim));
  }
  const std::size_t steps = p.step_count();
  Trajectory tr;
  if (opt.keep_record) tr.record.dWt.reserve(steps);
  const double sg2 = std::sqrt(p.gamma2);
  const complex rate = p.decay_rate();
  const complex shrink = std::exp(-rate * p.dt);
  complex rot = 1.0;
  complex A = 0.0;

  auto snapshot = [&](std::size_t i) {
    const double t = static_cast<double>(i) * p.dt;
    const MomentSums m = state.moments();
    const double leak = m.leakage();
    tr.max_leakage = std::max(tr.max_leakage, leak);
    if (leak >= kTrajectoryLeakageLimit) {
      throw TruncationError("truncation leakage " + std::to_string(leak) + " at t = " +
                            std::to_string(t) + "; increase the dimension");
    }
    tr.times.push_back(t);
    tr.n_expect.push_back(m.mean_n());
    tr.a_expect.push_back(m.mean_a());
    if (opt.keep_states && state.is_pure()) tr.states.push_back(state.state());
  };

  snapshot(0);
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) * p.dt;
    const double pj = detail::jump_probability(state, p);
    StepOutcome out;
    if (rng.unit() < pj) {
      out.jumped = true;
      tr.record.counts.times.push_back(t);
      if (opt.audit_jumps) {
        const MomentSums before = state.moments();
        state.jump();
        const MomentSums after = state.moments();
        const JumpMoments pred = jump_update_moments(before.mean_n(), before.mean_n2(),
                                                     before.mean_a(), before.mean_naa());
        tr.jumps.push_back({t, before.mean_n(), before.variance_n(), after.mean_n(), pred.n,
                            before.mean_a(), after.mean_a(), pred.a});
      } else {
        state.jump();
      }
    } else {
      out.dWt = detail::diffuse_step(state, p, rng);
      A += sg2 * rot * out.dWt;
    }
    if (opt.keep_record) tr.record.dWt.push_back(out.dWt);
    rot = ((i + 1) % 1024 == 0) ? std::exp(-rate * (static_cast<double>(i + 1) * p.dt))
                                : rot * shrink;
    if ((i + 1) % opt.snapshot_stride == 0 || i + 1 == steps) snapshot(i + 1);
  }
  tr.final_n = state.mean_n();
  tr.accumulators = RecordAccumulators::at(A, static_cast<double>(steps) * p.dt, p);
  return tr;
}

inline Trajectory run_trajectory(const StateVector& init, const SimParams& p, RandomStream& rng,
                                 const TrajectoryOptions& opt = {}) {
  if (!init.is_normalized(1e-9)) throw DomainError("initial state must be normalized");
  return run_trajectory(ConditionalState::pure(init), p, rng, opt);
}

/// Residuals of one diffusive step against the no-count drift laws
///   d<n> = -(gamma2 <n> + gamma1 Var n) dt
///   d<a> = -[(i omega + Gamma/2) <a> + gamma1 (<a^dag a a> - <n><a>)] dt.
/// The Wiener increment is averaged over the antithetic pair dW = +-sqrt(dt),
/// which reproduces the Ito mean up to O(dt^2).
struct DriftResidual {
  double dn_measured = 0.0;
  double dn_predicted = 0.0;
  complex da_measured{0.0};
  complex da_predicted{0.0};

  double n_residual() const { return std::abs(dn_measured - dn_predicted); }
  double a_residual() const { return std::abs(da_measured - da_predicted); }
};

inline DriftResidual nocount_drift_check(const StateVector& psi, const SimParams& p) {
  if (!psi.is_normalized(1e-9)) throw DomainError("drift check requires a normalized state");
  const ConditionalState s0 = ConditionalState::pure(psi);
  const MomentSums m0 = s0.moments();
  const double sg2 = std::sqrt(p.gamma2);
  DriftResidual r;
  for (double sign : {1.0, -1.0}) {
    ConditionalState s = s0;
    const double dWt = sg2 * 2.0 * m0.mean_a().real() * p.dt + sign * std::sqrt(p.dt);
    s.diffuse(sg2 * dWt, p);
    const MomentSums m1 = s.moments();
    r.dn_measured += 0.5 * (m1.mean_n() - m0.mean_n());
    r.da_measured += 0.5 * (m1.mean_a() - m0.mean_a());
  }
  r.dn_predicted = -(p.gamma2 * m0.mean_n() + p.gamma1 * m0.variance_n()) * p.dt;
  r.da_predicted = -(p.decay_rate() * m0.mean_a() +
                     p.gamma1 * (m0.mean_naa() - m0.mean_n() * m0.mean_a())) *
                   p.dt;
  return r;
}

}  // namespace qtraj
