#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "qtraj/errors.hpp"

namespace qtraj {

/// Gauss-Hermite rule for the weight e^{-x^2}.
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;

  /// Golub-Welsch: eigen-decomposition of the symmetric Jacobi matrix.
  explicit GaussHermite(std::size_t n) {
    if (n == 0) throw DomainError("Gauss-Hermite rule needs at least one node");
    const auto size = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(size, size);
    for (Eigen::Index k = 1; k < size; ++k) {
      const double off = std::sqrt(0.5 * static_cast<double>(k));
      jacobi(k, k - 1) = off;
      jacobi(k - 1, k) = off;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
    nodes.resize(n);
    weights.resize(n);
    const double mu0 = std::sqrt(std::numbers::pi);
    for (Eigen::Index k = 0; k < size; ++k) {
      nodes[static_cast<std::size_t>(k)] = eig.eigenvalues()[k];
      const double v0 = eig.eigenvectors()(0, k);
      weights[static_cast<std::size_t>(k)] = mu0 * v0 * v0;
    }
  }

  std::size_t size() const { return nodes.size(); }

  /// E[f(Z)] for Z ~ Normal(0, 1).
  template <class F>
  double expect_standard_normal(F&& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < size(); ++i) acc += weights[i] * f(std::sqrt(2.0) * nodes[i]);
    return acc / std::sqrt(std::numbers::pi);
  }
};

}  // namespace qtraj
