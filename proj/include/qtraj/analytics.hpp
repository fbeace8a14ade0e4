#pragma once

#include <Eigen/Dense>
#include <boost/math/distributions/binomial.hpp>
#include <boost/math/special_functions/binomial.hpp>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "qtraj/errors.hpp"
#include "qtraj/fock.hpp"
#include "qtraj/params.hpp"
#include "qtraj/propagators.hpp"
#include "qtraj/quadrature.hpp"

namespace qtraj {

// ---------------------------------------------------------------------------
// Generating functional of the records.

/// Value held constant on [t0, t1); t1 may be infinite.
template <class T>
struct Piece {
  double t0 = 0.0;
  double t1 = 0.0;
  T value{};
};

/// Piecewise-constant test functions xi(t), eta(t) on [0, horizon].
struct GFQuery {
  std::vector<Piece<complex>> xi;
  std::vector<Piece<complex>> eta;
  double horizon = kInfinity;

  static GFQuery scalar(complex xi, complex eta, double t) {
    GFQuery q;
    q.horizon = t;
    if (xi != complex(0.0)) q.xi.push_back({0.0, t, xi});
    if (eta != complex(0.0)) q.eta.push_back({0.0, t, eta});
    return q;
  }

  void validate() const {
    if (!(horizon > 0.0)) throw DomainError("generating-function horizon must be positive");
    auto check = [this](const auto& pieces, const char* name) {
      double last = 0.0;
      for (const auto& pc : pieces) {
        if (!(pc.t0 >= last) || !(pc.t1 > pc.t0) || pc.t1 > horizon) {
          throw DomainError(std::string(name) +
                            " pieces must be ordered, non-overlapping and inside [0, horizon]");
        }
        last = pc.t1;
      }
    };
    check(xi, "xi");
    check(eta, "eta");
  }
};

struct KappaNu {
  complex kappa{0.0};
  complex nu{0.0};
  /// (gamma2/2) int (xi e^{-(i w + G/2)t} + xi^* e^{-(-i w + G/2)t})^2 dt
  complex log_gaussian{0.0};
};

/// int_{t0}^{t1} e^{-z t} dt
inline complex exp_integral(complex z, double t0, double t1) {
  return std::exp(-z * t0) * decay_integral(z, t1 - t0);
}

/// Closed-form piecewise integrals for kappa, nu and the Gaussian prefactor.
inline KappaNu kappa_nu(const GFQuery& q, const SimParams& p) {
  q.validate();
  const complex c = p.decay_rate();
  const complex cbar = std::conj(c);
  const double G = p.total_loss();
  KappaNu kn;
  for (const auto& pc : q.xi) {
    const complex x = pc.value;
    const complex xc = std::conj(x);
    const complex j_fast = exp_integral(2.0 * c, pc.t0, pc.t1);
    const complex j_fast_bar = exp_integral(2.0 * cbar, pc.t0, pc.t1);
    const complex j_slow = exp_integral(G, pc.t0, pc.t1);
    kn.kappa += p.gamma2 * (x * j_fast + xc * j_slow);
    kn.log_gaussian += 0.5 * p.gamma2 * (x * x * j_fast + xc * xc * j_fast_bar + 2.0 * x * xc * j_slow);
  }
  for (const auto& pc : q.eta) {
    if (p.gamma1 == 0.0) continue;
    kn.nu += p.gamma1 * qtraj::expm1(pc.value) * exp_integral(G, pc.t0, pc.t1);
  }
  return kn;
}

/// L_n(x) by the three-term recurrence.
inline double laguerre(unsigned n, double x) {
  double prev = 1.0;
  if (n == 0) return prev;
  double cur = 1.0 - x;
  for (unsigned k = 1; k < n; ++k) {
    const double next = ((2.0 * k + 1.0 - x) * cur - k * prev) / (k + 1.0);
    prev = cur;
    cur = next;
  }
  return cur;
}

/// <n| :exp(kappa a + kappa^* a^dag + nu n): |n> = sum_j C(n,j) |kappa|^{2j} (1+nu)^{n-j} / j!.
inline complex number_normal_expectation(std::size_t n, complex kappa, complex nu) {
  const double k2 = std::norm(kappa);
  const complex base = 1.0 + nu;
  complex total = 0.0;
  double coef = 1.0;
  for (std::size_t j = 0; j <= n; ++j) {
    const complex power = (n - j == 0) ? complex(1.0) : std::pow(base, static_cast<double>(n - j));
    total += coef * power;
    coef *= k2 * static_cast<double>(n - j) / static_cast<double>((j + 1) * (j + 1));
  }
  return total;
}

inline complex coherent_normal_expectation(complex alpha, complex kappa, complex nu) {
  return std::exp(kappa * alpha + std::conj(kappa) * std::conj(alpha) + nu * std::norm(alpha));
}

/// Thermal <:exp(kappa a + kappa^* a^dag + nu n):> = exp(nbar|kappa|^2/(1 - nbar nu)) / (1 - nbar nu).
inline complex thermal_normal_expectation(double nbar, complex kappa, complex nu) {
  const double x = nbar / (1.0 + nbar);
  if (std::abs(x * (1.0 + nu)) >= 1.0) {
    throw DivergenceError("thermal generating function diverges at nu = " +
                          std::to_string(nu.real()) + " (pole at 1/nbar = " +
                          std::to_string(1.0 / nbar) + ")");
  }
  const complex denom = 1.0 - nbar * nu;
  return std::exp(nbar * std::norm(kappa) / denom) / denom;
}

/// <alpha, r| :exp(kappa a + kappa^* a^dag + nu n): |alpha, r> from the Gaussian
/// integral over the Q-function. With s_x = tanh r, s_y = -tanh r and the
/// bracket factors b_{x,y} = 1 + nu (1 - e^{-+2r})/2:
///   M = (b_x b_y)^{-1/2} exp(X + Y),
///   X = [(1+s_x)(2 k_x a_x + nu a_x^2) - s_x k_x^2] / (1 + s_x (1 + nu)),
/// with k_x = Re kappa, a_x = Re alpha, and Y likewise with k_y = -Im kappa,
/// a_y = Im alpha.
inline complex squeezed_normal_expectation(complex alpha, double r, complex kappa, complex nu) {
  const double th = std::tanh(r);
  const complex bx = 1.0 + 0.5 * nu * (-std::expm1(-2.0 * r));
  const complex by = 1.0 + 0.5 * nu * (-std::expm1(2.0 * r));
  if (!(bx.real() > 0.0) || !(by.real() > 0.0)) {
    throw DomainError("squeezed generating function diverges: bracket factors " +
                      std::to_string(bx.real()) + ", " + std::to_string(by.real()));
  }
  auto axis = [&nu](double s, double k, double a) {
    return ((1.0 + s) * (2.0 * k * a + nu * a * a) - s * k * k) / (1.0 + s * (1.0 + nu));
  };
  const complex X = axis(th, kappa.real(), alpha.real());
  const complex Y = axis(-th, -kappa.imag(), alpha.imag());
  return std::exp(X + Y) / std::sqrt(bx * by);
}

/// Dense evaluation sum_k (1+nu)^k |(e^{kappa a} psi)_k|^2.
inline complex fock_normal_expectation(const StateVector& psi, complex kappa, complex nu) {
  const Vector v = apply_lowering_exp(psi.amps(), kappa, 0.0);
  const complex base = 1.0 + nu;
  complex total = 0.0, power = 1.0;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    total += power * std::norm(v[k]);
    power *= base;
  }
  return total / psi.norm2();
}

inline complex fock_normal_expectation(const NumberMixture& mix, complex kappa, complex nu) {
  complex total = 0.0;
  for (std::size_t n = 0; n < mix.weights.size(); ++n) {
    if (mix.weights[n] != 0.0) total += mix.weights[n] * number_normal_expectation(n, kappa, nu);
  }
  return total;
}

/// State-dependent factor <:exp(kappa a + kappa^* a^dag + nu n):> for the untruncated state.
inline complex normal_expectation(const InitialState& init, complex kappa, complex nu) {
  validate(init);
  return std::visit(
      [&](const auto& s) -> complex {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Coherent>) {
          return coherent_normal_expectation(s.alpha, kappa, nu);
        } else if constexpr (std::is_same_v<T, Number>) {
          return number_normal_expectation(s.n, kappa, nu);
        } else if constexpr (std::is_same_v<T, Thermal>) {
          return thermal_normal_expectation(s.nbar, kappa, nu);
        } else {
          return squeezed_normal_expectation(s.alpha, s.r, kappa, nu);
        }
      },
      init);
}

/// M[xi, eta] = exp(G) <:exp(kappa a + kappa^* a^dag + nu n):>.
inline complex generating_function(const InitialState& init, const GFQuery& q,
                                   const SimParams& p) {
  const KappaNu kn = kappa_nu(q, p);
  return std::exp(kn.log_gaussian) * normal_expectation(init, kn.kappa, kn.nu);
}

/// Mean and variance of the count N_t from central differences of log M(0, eta).
struct CountMoments {
  double mean = 0.0;
  double variance = 0.0;
};

inline CountMoments count_moments_from_gf(const InitialState& init, double t, const SimParams& p,
                                          double h = 1e-3) {
  auto logm = [&](double eta) {
    return std::log(generating_function(init, GFQuery::scalar(0.0, eta, t), p)).real();
  };
  const double fp = logm(h), f0 = logm(0.0), fm = logm(-h);
  return {(fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h)};
}

// ---------------------------------------------------------------------------
// Count distribution.

/// Probability that a photon present at t=0 is counted by time t.
inline double detection_probability(double t, const SimParams& p) {
  if (p.gamma1 == 0.0) return 0.0;
  return p.gamma1 * decay_integral(complex(p.total_loss()), t).real();
}

inline std::vector<double> photon_distribution(const PreparedState& prepared) {
  if (const auto* sv = std::get_if<StateVector>(&prepared)) {
    std::vector<double> out(sv->dim());
    const double norm = sv->norm2();
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::norm((*sv)[k]) / norm;
    return out;
  }
  return std::get<NumberMixture>(prepared).weights;
}

/// Distribution of the total count N_t: binomial thinning of the photon-number
/// distribution with the detection probability.
inline std::vector<double> count_distribution(const std::vector<double>& photons, double t,
                                              const SimParams& p) {
  const double R = detection_probability(t, p);
  std::vector<double> out(photons.size(), 0.0);
  for (std::size_t k = 0; k < photons.size(); ++k) {
    if (photons[k] == 0.0) continue;
    const boost::math::binomial_distribution<double> thin(static_cast<double>(k), R);
    for (std::size_t m = 0; m <= k; ++m) {
      out[m] += photons[k] * boost::math::pdf(thin, static_cast<double>(m));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Homodyne record moments for coherent input.

struct ComplexGaussianMoments {
  complex mean{0.0};
  complex pseudo_variance{0.0};  // E[(A - E A)^2]
  double variance = 0.0;         // E[|A - E A|^2]
};

inline ComplexGaussianMoments coherent_homodyne_moments(complex alpha, const SimParams& p,
                                                        double t) {
  const complex I2 = decay_integral(2.0 * p.decay_rate(), t);
  const double IG = decay_integral(complex(p.total_loss()), t).real();
  return {p.gamma2 * (alpha * I2 + std::conj(alpha) * IG), p.gamma2 * I2, p.gamma2 * IG};
}

// ---------------------------------------------------------------------------
// Joint density of m counts and the homodyne record, relative to the Wiener
// measure for the record and Lebesgue measure on ordered count times.

namespace detail {

/// R^m sum_{j >= m} C(j, m) y^{j-m} |v_j|^2, R = gamma1 (1 - e^{-Gamma t})/Gamma, y = e^{-Gamma t}.
inline double density_from_lowered(const Vector& v, std::size_t m, double t, const SimParams& p) {
  const double R = detection_probability(t, p);
  const double y = std::isinf(t) ? 0.0 : std::exp(-p.total_loss() * t);
  double total = 0.0, ypow = 1.0;
  for (Eigen::Index j = static_cast<Eigen::Index>(m); j < v.size(); ++j) {
    total += boost::math::binomial_coefficient<double>(static_cast<unsigned>(j),
                                                       static_cast<unsigned>(m)) *
             ypow * std::norm(v[j]);
    ypow *= y;
  }
  return std::pow(R, static_cast<double>(m)) * total;
}

inline double number_density_generic(std::size_t n, std::size_t m,
                                     const RecordAccumulators& acc, const SimParams& p) {
  if (m > n) return 0.0;
  const Vector v = apply_lowering_exp(StateVector::basis(n + 1 == 1 ? 2 : n + 1, n).amps(),
                                      acc.A, acc.B);
  return density_from_lowered(v, m, acc.t, p);
}

/// Number of geometric terms needed so that the thermal tail weight is below 1e-18.
inline std::size_t thermal_tail_levels(double nbar) {
  const double x = nbar / (1.0 + nbar);
  const auto n = static_cast<std::size_t>(std::ceil(std::log(1e-18) / std::log(x)));
  if (n > 4000) throw DomainError("thermal occupation too large for the density sum");
  return n + 1;
}

}  // namespace detail

/// Closed form for |n>: R^m sum_q C(n-q, m) y^{n-q-m} n!/(n-q)! |S_q|^2 with
/// S_q = sum_l A^{q-2l} B^l / ((q-2l)! l!).
inline double number_density_closed(std::size_t n, std::size_t m, const RecordAccumulators& acc,
                                    const SimParams& p) {
  if (m > n) return 0.0;
  const std::size_t Q = n - m;
  std::vector<complex> pa(Q + 1), pb(Q / 2 + 1);
  pa[0] = 1.0;
  for (std::size_t j = 1; j <= Q; ++j) pa[j] = pa[j - 1] * acc.A / static_cast<double>(j);
  pb[0] = 1.0;
  for (std::size_t l = 1; l < pb.size(); ++l) pb[l] = pb[l - 1] * acc.B / static_cast<double>(l);
  const double R = detection_probability(acc.t, p);
  const double y = acc.infinite() ? 0.0 : std::exp(-p.total_loss() * acc.t);
  double total = 0.0, falling = 1.0;  // n!/(n-q)!
  for (std::size_t q = 0; q <= Q; ++q) {
    if (q > 0) falling *= static_cast<double>(n - q + 1);
    complex S = 0.0;
    for (std::size_t l = 0; 2 * l <= q; ++l) S += pa[q - 2 * l] * pb[l];
    const std::size_t j = n - q;
    const double ypow = (j == m) ? 1.0 : std::pow(y, static_cast<double>(j - m));
    total += boost::math::binomial_coefficient<double>(static_cast<unsigned>(j),
                                                       static_cast<unsigned>(m)) *
             ypow * falling * std::norm(S);
  }
  return std::pow(R, static_cast<double>(m)) * total;
}

/// Closed form for the thermal state, x = nbar/(1+nbar):
/// (1-x)(xR)^m sum_q |S_q|^2 x^q (m+q)!/(m! (1-xy)^{m+q+1}).
inline double thermal_density_closed(double nbar, std::size_t m, const RecordAccumulators& acc,
                                     const SimParams& p) {
  using real = long double;
  using lcomplex = std::complex<long double>;
  const real x = static_cast<real>(nbar) / (1.0L + static_cast<real>(nbar));
  const real R = detection_probability(acc.t, p);
  const real y = acc.infinite() ? 0.0L : std::exp(-static_cast<real>(p.total_loss() * acc.t));
  const real one_minus = 1.0L - x * y;
  const lcomplex A(acc.A.real(), acc.A.imag());
  const lcomplex B(acc.B.real(), acc.B.imag());
  const std::size_t qmax = 6000;
  std::vector<lcomplex> pa{1.0L}, pb{1.0L};
  real factor = 1.0L / std::pow(one_minus, static_cast<real>(m + 1));
  real total = 0.0L;
  int quiet = 0;
  for (std::size_t q = 0; q <= qmax; ++q) {
    if (q > 0) {
      pa.push_back(pa.back() * A / static_cast<real>(q));
      if (q % 2 == 0) pb.push_back(pb.back() * B / static_cast<real>(q / 2));
      factor *= x * static_cast<real>(m + q) / one_minus;
    }
    lcomplex S = 0.0L;
    for (std::size_t l = 0; 2 * l <= q; ++l) S += pa[q - 2 * l] * pb[l];
    const real term = std::norm(S) * factor;
    total += term;
    quiet = (term <= 1e-19L * total) ? quiet + 1 : 0;
    if (quiet >= 8 && q > 16) break;
    if (q == qmax) throw DomainError("thermal density series did not converge");
  }
  return static_cast<double>((1.0L - x) * std::pow(x * R, static_cast<real>(m)) * total);
}

/// Density for a pure truncated state, evaluated in the Fock basis.
inline double fock_density(const StateVector& psi0, std::size_t m, const RecordAccumulators& acc,
                           const SimParams& p) {
  const Vector v = apply_lowering_exp(psi0.amps(), acc.A, acc.B);
  return detail::density_from_lowered(v, m, acc.t, p) / psi0.norm2();
}

/// p~_m on the Fock basis. Thermal input is summed over number states with
/// untruncated geometric weights.
inline double joint_density_generic(const InitialState& init, std::size_t m,
                                    const RecordAccumulators& acc, const SimParams& p) {
  validate(init);
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Number>) {
          return detail::number_density_generic(s.n, m, acc, p);
        } else if constexpr (std::is_same_v<T, Thermal>) {
          const double x = s.boltzmann_ratio();
          const std::size_t levels = detail::thermal_tail_levels(s.nbar);
          double total = 0.0, w = 1.0 - x;
          for (std::size_t n = 0; n < levels; ++n) {
            if (n >= m) total += w * detail::number_density_generic(n, m, acc, p);
            w *= x;
          }
          return total;
        } else {
          return fock_density(make_pure_state(init, default_dimension(init)), m, acc, p);
        }
      },
      init);
}

inline constexpr double kDensityAgreement = 1e-8;

/// log p~_m(t; W~). For Number and Thermal input the closed form is evaluated
/// as well and must agree with the Fock-basis value.
inline double joint_density_pm(const InitialState& init, long m, const RecordAccumulators& acc,
                               const SimParams& p) {
  if (m < 0) throw DomainError("count number must be non-negative");
  const auto mm = static_cast<std::size_t>(m);
  const double generic = joint_density_generic(init, mm, acc, p);
  double closed = generic;
  if (const auto* num = std::get_if<Number>(&init)) {
    closed = number_density_closed(num->n, mm, acc, p);
  } else if (const auto* th = std::get_if<Thermal>(&init)) {
    closed = thermal_density_closed(th->nbar, mm, acc, p);
  }
  const double scale = std::max(std::abs(generic), std::abs(closed));
  if (scale > 0.0 && std::abs(generic - closed) > kDensityAgreement * scale) {
    throw Error("closed-form density " + std::to_string(closed) +
                " disagrees with the Fock-basis value " + std::to_string(generic));
  }
  return std::log(generic);
}

/// Marginal probability of m counts by time t: the density integrated over the
/// Wiener reference measure, under which A(t) is a centred complex Gaussian
/// with E[A^2] = gamma2 I(2i w + G) and E|A|^2 = gamma2 I(G).
inline double marginal_count_probability(const InitialState& init, std::size_t m, double t,
                                         const SimParams& p, std::size_t nodes = 40) {
  const complex P = p.gamma2 * decay_integral(2.0 * p.decay_rate(), t);
  const double V = p.gamma2 * decay_integral(complex(p.total_loss()), t).real();
  Eigen::Matrix2d cov;
  cov << 0.5 * (V + P.real()), 0.5 * P.imag(), 0.5 * P.imag(), 0.5 * (V - P.real());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  Eigen::Matrix2d root = eig.eigenvectors();
  for (int k = 0; k < 2; ++k) root.col(k) *= std::sqrt(std::max(0.0, eig.eigenvalues()[k]));
  const GaussHermite gh(nodes);
  const complex B = b_closed_form(p, t);
  double total = 0.0;
  for (std::size_t i = 0; i < gh.size(); ++i) {
    for (std::size_t j = 0; j < gh.size(); ++j) {
      const Eigen::Vector2d z(std::sqrt(2.0) * gh.nodes[i], std::sqrt(2.0) * gh.nodes[j]);
      const Eigen::Vector2d a = root * z;
      const RecordAccumulators acc{complex(a[0], a[1]), B, t};
      total += gh.weights[i] * gh.weights[j] * joint_density_generic(init, m, acc, p);
    }
  }
  return total / std::numbers::pi;
}

// ---------------------------------------------------------------------------
// Photocount-conditioned homodyne expectations.

enum class Side { Before, After };

namespace detail {

struct QuadratureSums {
  double norm = 0.0;
  double n = 0.0;
  double x = 0.0;      // <a + a^dag>
  double axa = 0.0;    // <a^dag (a + a^dag) a>
};

inline void add_quadrature_sums(const Vector& c, double weight, QuadratureSums& s) {
  for (Eigen::Index k = 0; k < c.size(); ++k) {
    const double pk = std::norm(c[k]);
    s.norm += weight * pk;
    s.n += weight * static_cast<double>(k) * pk;
    if (k > 0) {
      const complex cross = std::conj(c[k - 1]) * c[k];
      const double sk = std::sqrt(static_cast<double>(k));
      s.x += weight * 2.0 * sk * cross.real();
      s.axa += weight * 2.0 * sk * static_cast<double>(k - 1) * cross.real();
    }
  }
}

/// e^{-(i w + G/2) t n} a^m exp(A a + B a^2) psi0 (scalar prefactor dropped).
inline Vector conditional_vector(const Vector& psi0, std::size_t m, const RecordAccumulators& acc,
                                 const SimParams& p) {
  Vector v = apply_ladder_power(apply_lowering_exp(psi0, acc.A, acc.B), m);
  if (acc.infinite()) {
    const complex keep = v[0];
    v.setZero();
    v[0] = keep;
    return v;
  }
  return apply_number_exp(v, -p.decay_rate() * acc.t);
}

inline double finish_quadrature(const QuadratureSums& s, Side side) {
  if (!(s.norm > 0.0)) throw UndefinedConditionalError("the conditional state vanishes");
  if (side == Side::Before) return s.x / s.norm;
  if (!(s.n > 0.0)) throw UndefinedConditionalError("<n> = 0 on the conditional state");
  return s.axa / s.n;
}

}  // namespace detail

/// <a + a^dag> on the m-count conditional state (Before), or the same quadrature
/// right after one more photocount, <a^dag (a + a^dag) a>/<a^dag a> (After).
inline double conditioned_quadrature(const PreparedState& prepared, std::size_t m,
                                     const RecordAccumulators& acc, const SimParams& p,
                                     Side side) {
  detail::QuadratureSums sums;
  if (const auto* sv = std::get_if<StateVector>(&prepared)) {
    detail::add_quadrature_sums(detail::conditional_vector(sv->amps(), m, acc, p), 1.0, sums);
  } else {
    const auto& mix = std::get<NumberMixture>(prepared);
    for (std::size_t n = m; n < mix.weights.size(); ++n) {
      if (mix.weights[n] == 0.0) continue;
      const Vector basis = StateVector::basis(mix.dim, n).amps();
      detail::add_quadrature_sums(detail::conditional_vector(basis, m, acc, p), mix.weights[n],
                                  sums);
    }
  }
  return detail::finish_quadrature(sums, side);
}

inline double conditioned_quadrature(const InitialState& init, std::size_t m,
                                     const RecordAccumulators& acc, const SimParams& p,
                                     Side side) {
  return conditioned_quadrature(make_state(init, default_dimension(init)), m, acc, p, side);
}

}  // namespace qtraj
