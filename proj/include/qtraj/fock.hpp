#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "qtraj/errors.hpp"
#include "qtraj/params.hpp"

namespace qtraj {

using Vector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXcd;

/// Pure state in the truncated Fock basis |0>..|D-1>; amps[k] is the
/// amplitude of |k>. Not necessarily normalized.
class StateVector {
 public:
  StateVector() = default;

  explicit StateVector(Vector amps) : amps_(std::move(amps)) {
    if (amps_.size() < 2) {
      throw DimensionError("state dimension must be at least 2, got " +
                           std::to_string(amps_.size()));
    }
  }

  static StateVector basis(std::size_t dim, std::size_t level) {
    if (level >= dim) {
      throw TruncationError("Fock level " + std::to_string(level) +
                            " does not fit in dimension " + std::to_string(dim));
    }
    Vector v = Vector::Zero(static_cast<Eigen::Index>(dim));
    v[static_cast<Eigen::Index>(level)] = 1.0;
    return StateVector(std::move(v));
  }

  std::size_t dim() const { return static_cast<std::size_t>(amps_.size()); }
  const Vector& amps() const { return amps_; }
  Vector& amps() { return amps_; }
  complex operator[](std::size_t k) const { return amps_[static_cast<Eigen::Index>(k)]; }

  double norm2() const { return amps_.squaredNorm(); }

  bool is_normalized(double tol = 1e-12) const { return std::abs(norm2() - 1.0) <= tol; }

  /// Population of the highest retained level, relative to the total.
  double leakage() const {
    const double total = norm2();
    if (total == 0.0) return 0.0;
    return std::norm(amps_[amps_.size() - 1]) / total;
  }

  StateVector normalized() const {
    const double n = std::sqrt(norm2());
    if (n == 0.0) throw UndefinedConditionalError("cannot normalize the zero vector");
    return StateVector(amps_ / n);
  }

 private:
  Vector amps_;
};

/// Dense operator on the truncated Fock space.
struct FockOperator {
  Matrix matrix;

  std::size_t dim() const { return static_cast<std::size_t>(matrix.rows()); }

  FockOperator adjoint() const { return {matrix.adjoint()}; }
  friend FockOperator operator*(const FockOperator& a, const FockOperator& b) {
    return {a.matrix * b.matrix};
  }
  friend FockOperator operator+(const FockOperator& a, const FockOperator& b) {
    return {a.matrix + b.matrix};
  }
};

inline void require_dimension(std::size_t dim) {
  if (dim < 2) {
    throw DimensionError("truncation dimension must be at least 2, got " + std::to_string(dim));
  }
}

/// Annihilation operator: a[k-1, k] = sqrt(k).
inline FockOperator make_ladder(std::size_t dim) {
  require_dimension(dim);
  const auto d = static_cast<Eigen::Index>(dim);
  Matrix a = Matrix::Zero(d, d);
  for (Eigen::Index k = 1; k < d; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
  return {std::move(a)};
}

inline FockOperator make_creation(std::size_t dim) { return make_ladder(dim).adjoint(); }

inline FockOperator make_number(std::size_t dim) {
  require_dimension(dim);
  const auto d = static_cast<Eigen::Index>(dim);
  Matrix n = Matrix::Zero(d, d);
  for (Eigen::Index k = 0; k < d; ++k) n(k, k) = static_cast<double>(k);
  return {std::move(n)};
}

inline FockOperator make_identity(std::size_t dim) {
  require_dimension(dim);
  const auto d = static_cast<Eigen::Index>(dim);
  return {Matrix::Identity(d, d)};
}

/// <psi|O|psi> for a normalized state.
inline complex expect(const StateVector& state, const FockOperator& op) {
  if (state.dim() != op.dim()) {
    throw DimensionError("state has dimension " + std::to_string(state.dim()) +
                         " but operator has dimension " + std::to_string(op.dim()));
  }
  if (!state.is_normalized(1e-9)) {
    throw DomainError("expectation requires a normalized state");
  }
  return state.amps().dot(op.matrix * state.amps());
}

// ---------------------------------------------------------------------------
// Structured actions. The ladder operator only ever lowers the level, so the
// truncated space is invariant under every function of it and the results
// below are exact for vectors that live in the truncated space.

/// Index of the highest nonzero amplitude, or -1 for the zero vector.
inline Eigen::Index support_top(const Vector& v) {
  for (Eigen::Index k = v.size() - 1; k >= 0; --k) {
    if (v[k] != complex(0.0)) return k;
  }
  return -1;
}

/// a^m v.
inline Vector apply_ladder_power(const Vector& v, std::size_t m) {
  Vector out = v;
  const Eigen::Index d = v.size();
  for (std::size_t rep = 0; rep < m; ++rep) {
    for (Eigen::Index k = 0; k + 1 < d; ++k) {
      out[k] = std::sqrt(static_cast<double>(k + 1)) * out[k + 1];
    }
    out[d - 1] = 0.0;
  }
  return out;
}

/// exp(A a + B a^2) v, summed until the nilpotent series terminates.
inline Vector apply_lowering_exp(const Vector& v, complex A, complex B) {
  const Eigen::Index d = v.size();
  Vector result = v;
  Vector term = v;
  Vector next(d);
  for (Eigen::Index j = 1; j <= d; ++j) {
    const double inv_j = 1.0 / static_cast<double>(j);
    bool nonzero = false;
    for (Eigen::Index k = 0; k < d; ++k) {
      complex acc = 0.0;
      if (k + 1 < d) acc += A * std::sqrt(static_cast<double>(k + 1)) * term[k + 1];
      if (k + 2 < d) {
        acc += B * std::sqrt(static_cast<double>((k + 1) * (k + 2))) * term[k + 2];
      }
      next[k] = acc * inv_j;
      nonzero = nonzero || acc != complex(0.0);
    }
    if (!nonzero) break;
    term.swap(next);
    result += term;
  }
  return result;
}

/// exp(lambda n) v.
inline Vector apply_number_exp(const Vector& v, complex lambda) {
  Vector out = v;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (out[k] != complex(0.0)) out[k] *= std::exp(lambda * static_cast<double>(k));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Initial states.

struct Coherent {
  complex alpha;
};

struct Number {
  std::size_t n = 0;
};

/// Thermal state with mean occupation nbar; equivalently exp(-beta*omega) = nbar/(1+nbar).
struct Thermal {
  double nbar = 1.0;

  static Thermal from_beta_omega(double beta_omega) {
    if (!(beta_omega > 0.0)) throw DomainError("beta*omega must be positive");
    return {1.0 / std::expm1(beta_omega)};
  }
  double boltzmann_ratio() const { return nbar / (1.0 + nbar); }
  double beta_omega() const { return std::log1p(1.0 / nbar); }
};

/// D(alpha) S(r)|0> with S(r) = exp(r/2 (a^2 - a^dag^2)).
struct Squeezed {
  complex alpha;
  double r = 0.0;
};

using InitialState = std::variant<Coherent, Number, Thermal, Squeezed>;

inline std::string describe(const InitialState& init) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Coherent>) {
          return "coherent(alpha=" + std::to_string(s.alpha.real()) + "+" +
                 std::to_string(s.alpha.imag()) + "i)";
        } else if constexpr (std::is_same_v<T, Number>) {
          return "number(n=" + std::to_string(s.n) + ")";
        } else if constexpr (std::is_same_v<T, Thermal>) {
          return "thermal(nbar=" + std::to_string(s.nbar) + ")";
        } else {
          return "squeezed(alpha=" + std::to_string(s.alpha.real()) + "+" +
                 std::to_string(s.alpha.imag()) + "i, r=" + std::to_string(s.r) + ")";
        }
      },
      init);
}

/// Mean photon number of the untruncated state.
inline double mean_photon_number(const InitialState& init) {
  return std::visit(
      [](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Coherent>) {
          return std::norm(s.alpha);
        } else if constexpr (std::is_same_v<T, Number>) {
          return static_cast<double>(s.n);
        } else if constexpr (std::is_same_v<T, Thermal>) {
          return s.nbar;
        } else {
          const double sh = std::sinh(s.r);
          return std::norm(s.alpha) + sh * sh;
        }
      },
      init);
}

inline void validate(const InitialState& init) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Coherent>) {
          if (!std::isfinite(s.alpha.real()) || !std::isfinite(s.alpha.imag())) {
            throw ConfigError("coherent amplitude must be finite");
          }
        } else if constexpr (std::is_same_v<T, Thermal>) {
          if (!(s.nbar > 0.0) || !std::isfinite(s.nbar)) {
            throw ConfigError("thermal mean occupation must be positive");
          }
        } else if constexpr (std::is_same_v<T, Squeezed>) {
          if (!std::isfinite(s.r) || !std::isfinite(s.alpha.real()) ||
              !std::isfinite(s.alpha.imag())) {
            throw ConfigError("squeezed-state parameters must be finite");
          }
        }
      },
      init);
}

/// Exact amplitudes e^{-|alpha|^2/2} alpha^k / sqrt(k!) for k < dim.
inline Vector coherent_amplitudes(complex alpha, std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  Vector v(d);
  v[0] = std::exp(-0.5 * std::norm(alpha));
  for (Eigen::Index k = 1; k < d; ++k) v[k] = v[k - 1] * alpha / std::sqrt(static_cast<double>(k));
  return v;
}

/// Exact amplitudes of S(r)|0> for k < dim: only even levels are populated,
/// <2k|S(r)|0> = (-tanh r / 2)^k sqrt((2k)!) / (k! sqrt(cosh r)).
inline Vector squeezed_vacuum_amplitudes(double r, std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  Vector v = Vector::Zero(d);
  const double ratio = -0.5 * std::tanh(r);
  double c = 1.0 / std::sqrt(std::cosh(r));
  for (Eigen::Index k = 0; 2 * k < d; ++k) {
    v[2 * k] = c;
    const double kk = static_cast<double>(k);
    c *= ratio * std::sqrt((2 * kk + 1) * (2 * kk + 2)) / (kk + 1);
  }
  return v;
}

/// D(alpha) v via the spectral decomposition of the Hermitian generator
/// i(alpha a^dag - alpha^* a). Exact for the truncated generator.
inline Vector apply_displacement(const Vector& v, complex alpha) {
  const Eigen::Index d = v.size();
  if (alpha == complex(0.0)) return v;
  Matrix h = Matrix::Zero(d, d);
  for (Eigen::Index k = 1; k < d; ++k) {
    const double s = std::sqrt(static_cast<double>(k));
    h(k, k - 1) = I * alpha * s;                // i alpha a^dag
    h(k - 1, k) = -I * std::conj(alpha) * s;    // -i alpha^* a
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
  // D = exp(-i H) with H = i(alpha a^dag - alpha^* a).
  const Eigen::VectorXcd phases =
      (-I * eig.eigenvalues().cast<complex>()).array().exp().matrix();
  return eig.eigenvectors() * (phases.asDiagonal() * (eig.eigenvectors().adjoint() * v));
}

/// Classical mixture of number states |n> with weights[n]; thermal input.
struct NumberMixture {
  std::vector<double> weights;
  std::size_t dim = 0;

  double mean() const {
    double m = 0.0;
    for (std::size_t n = 0; n < weights.size(); ++n) m += static_cast<double>(n) * weights[n];
    return m;
  }
};

using PreparedState = std::variant<StateVector, NumberMixture>;

inline constexpr double kPreparationLeakageLimit = 1e-8;

namespace detail {

inline double finish_truncated(Vector& v, const char* what) {
  const double kept = v.squaredNorm();
  const double leak = 1.0 - kept;
  if (leak > kPreparationLeakageLimit) {
    throw TruncationError(std::string(what) + " loses " + std::to_string(leak) +
                          " of its norm to truncation; increase the dimension");
  }
  v /= std::sqrt(kept);
  return leak;
}

inline Vector squeezed_truncated(const Squeezed& s, std::size_t dim) {
  const std::size_t work = 2 * dim + 32;
  Vector full = apply_displacement(squeezed_vacuum_amplitudes(s.r, work), s.alpha);
  return full.head(static_cast<Eigen::Index>(dim));
}

}  // namespace detail

/// Truncated geometric weights for nbar on levels 0..dim-2. The top level is
/// left empty so the leakage monitor stays meaningful for mixtures.
inline NumberMixture thermal_weights(const Thermal& th, std::size_t dim) {
  require_dimension(dim);
  if (!(th.nbar > 0.0)) throw DomainError("thermal mean occupation must be positive");
  const double x = th.boltzmann_ratio();
  NumberMixture mix;
  mix.dim = dim;
  mix.weights.resize(dim - 1);
  double w = 1.0, total = 0.0;
  for (auto& wn : mix.weights) {
    wn = w;
    total += w;
    w *= x;
  }
  for (auto& wn : mix.weights) wn /= total;
  return mix;
}

/// Builds the initial state in dimension `dim`. Pure inputs are renormalized
/// after truncation; thermal input yields its number-state weight table.
inline PreparedState make_state(const InitialState& init, std::size_t dim) {
  require_dimension(dim);
  validate(init);
  return std::visit(
      [dim](const auto& s) -> PreparedState {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Coherent>) {
          Vector v = coherent_amplitudes(s.alpha, dim);
          detail::finish_truncated(v, "coherent state");
          return StateVector(std::move(v));
        } else if constexpr (std::is_same_v<T, Number>) {
          return StateVector::basis(dim, s.n);
        } else if constexpr (std::is_same_v<T, Thermal>) {
          return thermal_weights(s, dim);
        } else {
          Vector v = detail::squeezed_truncated(s, dim);
          detail::finish_truncated(v, "squeezed state");
          return StateVector(std::move(v));
        }
      },
      init);
}

/// make_state for inputs that are pure; thermal input is rejected.
inline StateVector make_pure_state(const InitialState& init, std::size_t dim) {
  auto prepared = make_state(init, dim);
  if (auto* sv = std::get_if<StateVector>(&prepared)) return std::move(*sv);
  throw DomainError("thermal input is a mixture, not a pure state");
}

/// Norm lost to truncation before renormalization (0 for number/thermal).
inline double preparation_leakage(const InitialState& init, std::size_t dim) {
  if (const auto* c = std::get_if<Coherent>(&init)) {
    return 1.0 - coherent_amplitudes(c->alpha, dim).squaredNorm();
  }
  if (const auto* s = std::get_if<Squeezed>(&init)) {
    return 1.0 - detail::squeezed_truncated(*s, dim).squaredNorm();
  }
  return 0.0;
}

/// Default truncation: max(32, ceil(4(<n>+1)) + 8 ceil(sqrt(<n>+1))), grown in
/// steps of 8 until coherent/squeezed preparation leakage is below 1e-10.
inline std::size_t default_dimension(const InitialState& init) {
  const double n0 = mean_photon_number(init) + 1.0;
  std::size_t dim = std::max<std::size_t>(
      32, static_cast<std::size_t>(std::ceil(4.0 * n0) + 8.0 * std::ceil(std::sqrt(n0))));
  if (const auto* num = std::get_if<Number>(&init)) dim = std::max(dim, num->n + 2);
  if (std::holds_alternative<Coherent>(init) || std::holds_alternative<Squeezed>(init)) {
    while (preparation_leakage(init, dim) > 1e-10) {
      dim += 8;
      if (dim > 2048) throw TruncationError("no dimension up to 2048 holds " + describe(init));
    }
  }
  return dim;
}

}  // namespace qtraj
