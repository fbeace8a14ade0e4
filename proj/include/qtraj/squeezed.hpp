#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "qtraj/errors.hpp"
#include "qtraj/fock.hpp"
#include "qtraj/params.hpp"
#include "qtraj/quadrature.hpp"

namespace qtraj {

/// Q-function data of D(alpha) S(r)|0>.
struct GaussianQState {
  complex alpha;
  double r = 0.0;

  /// Coefficients of x^2 and y^2 in -log Q, with beta - alpha = x + i y.
  double width_x() const { return 2.0 / (1.0 + std::exp(-2.0 * r)); }
  double width_y() const { return 2.0 / (1.0 + std::exp(2.0 * r)); }
};

/// Q(beta) = exp[-|d|^2 - (tanh r / 2)(d^2 + d^*^2)] / (pi cosh r), d = beta - alpha.
inline double q_function(const GaussianQState& s, complex beta) {
  const complex d = beta - s.alpha;
  const double quad = std::norm(d) + std::tanh(s.r) * (d * d).real();
  return std::exp(-quad) / (std::numbers::pi * std::cosh(s.r));
}

/// int Q(beta) e^{shift |beta - alpha|^2} f(beta) d^2 beta by tensor
/// Gauss-Hermite quadrature. The shift is folded into the Gaussian weight and
/// must be below both widths.
template <class F>
complex q_expectation(const GaussianQState& s, F&& f, std::size_t nodes = 80,
                      double shift = 0.0) {
  const double ax = s.width_x() - shift;
  const double ay = s.width_y() - shift;
  if (!(ax > 0.0) || !(ay > 0.0)) throw DomainError("quadrature shift exceeds the Q-function width");
  const GaussHermite gh(nodes);
  const double sx = 1.0 / std::sqrt(ax), sy = 1.0 / std::sqrt(ay);
  complex total = 0.0;
  for (std::size_t i = 0; i < gh.size(); ++i) {
    const double x = gh.nodes[i] * sx;
    for (std::size_t j = 0; j < gh.size(); ++j) {
      const double y = gh.nodes[j] * sy;
      total += gh.weights[i] * gh.weights[j] * f(s.alpha + complex(x, y));
    }
  }
  return total * sx * sy / (std::numbers::pi * std::cosh(s.r));
}

/// :exp(kappa a + kappa^* a^dag + nu n): = e^{log_prefactor} x the anti-normally
/// ordered exp(kappa' a + kappa'^* a^dag + nu' n).
struct ReorderedExponential {
  complex kappa;
  double nu = 0.0;
  double log_prefactor = 0.0;
};

inline ReorderedExponential antinormal_reorder(complex kappa, double nu) {
  if (!(nu > -1.0)) throw DomainError("anti-normal reordering needs nu > -1");
  const double onep = 1.0 + nu;
  return {kappa / onep, nu / onep, -std::norm(kappa) / onep - std::log1p(nu)};
}

/// Normally ordered expectation on the squeezed state through the Q-function:
/// e^{log_prefactor} int Q(beta) exp(kappa' beta + kappa'^* beta^* + nu' |beta|^2).
inline complex squeezed_expectation_via_q(complex alpha, double r, complex kappa, double nu,
                                          std::size_t nodes = 80) {
  const ReorderedExponential re = antinormal_reorder(kappa, nu);
  const GaussianQState s{alpha, r};
  // Split nu'|beta|^2 = nu'|d|^2 + nu'(2 Re(alpha^* d) + |alpha|^2) and let the
  // quadrature absorb the first term.
  auto f = [&](complex beta) {
    const complex d = beta - alpha;
    const double linear = 2.0 * (re.kappa * beta).real() +
                          re.nu * (2.0 * (std::conj(alpha) * d).real() + std::norm(alpha));
    return complex(std::exp(linear));
  };
  return std::exp(re.log_prefactor) * q_expectation(s, f, nodes, re.nu);
}

/// (1/sqrt(cosh r)) exp[-(a^dag)^2 tanh r / 2] exp[-n ln cosh r] exp[a^2 tanh r / 2].
/// Every factor is triangular in the Fock basis, so the D x D product equals
/// the corresponding block of the untruncated operator. The product is an
/// alternating sum whose terms outgrow the result by ~1e8 near D = 60, so it
/// is accumulated in 50-digit arithmetic.
inline FockOperator squeeze_factorization(double r, std::size_t dim) {
  using hp = boost::multiprecision::cpp_bin_float_50;
  require_dimension(dim);
  if (!(std::abs(r) <= 2.0)) {
    throw DomainError("squeeze factorization supports |r| <= 2, got " + std::to_string(r));
  }
  const hp rr(r);
  const hp tau = tanh(rr) / 2;
  const hp shrink = 1 / cosh(rr);
  // coef[l][k] = tau^l / l! sqrt((k+2l)! / k!) = <k| exp(tau a^2) |k+2l>.
  const std::size_t half = (dim + 1) / 2;
  std::vector<std::vector<hp>> coef(half, std::vector<hp>(dim));
  for (std::size_t k = 0; k < dim; ++k) coef[0][k] = 1;
  for (std::size_t l = 1; l < half; ++l) {
    for (std::size_t k = 0; k + 2 * l < dim; ++k) {
      const hp top(static_cast<double>(k + 2 * l));
      coef[l][k] = coef[l - 1][k] * tau / static_cast<double>(l) * sqrt(top * (top - 1));
    }
  }
  std::vector<hp> diag(dim);
  diag[0] = 1;
  for (std::size_t k = 1; k < dim; ++k) diag[k] = diag[k - 1] * shrink;
  const hp norm = sqrt(shrink);
  const auto d = static_cast<Eigen::Index>(dim);
  Matrix out = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i % 2; j < dim; j += 2) {
      hp total = 0;
      for (std::size_t k = i % 2; k <= std::min(i, j); k += 2) {
        const std::size_t li = (i - k) / 2, lj = (j - k) / 2;
        const hp term = coef[li][k] * diag[k] * coef[lj][k];
        total += li % 2 ? -term : term;
      }
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(total * norm);
    }
  }
  return {out};
}

}  // namespace qtraj
