#include "autonomy/quadrature.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "autonomy/errors.hpp"

namespace autonomy {

namespace {

/// Golub-Welsch for a symmetric weight with zero recurrence diagonal.
QuadratureRule symmetric_rule(const Eigen::VectorXd& sub, double mu0) {
  const int order = static_cast<int>(sub.size()) + 1;
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw NumericError("quadrature: eigensolver failed");

  QuadratureRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  for (int i = 0; i < order; ++i) {
    rule.nodes[i] = solver.eigenvalues()(i);
    const double v = solver.eigenvectors()(0, i);
    rule.weights[i] = mu0 * v * v;
  }
  // The rule is symmetric; enforce it exactly.
  for (int i = 0; i < order / 2; ++i) {
    const int j = order - 1 - i;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    rule.weights[i] = rule.weights[j] = w;
  }
  if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
  return rule;
}

}  // namespace

QuadratureRule gauss_hermite(int order) {
  if (order < 1) throw InvalidDimension("gauss_hermite: order must be positive");
  Eigen::VectorXd sub(order - 1);
  for (int k = 1; k < order; ++k) sub(k - 1) = std::sqrt(0.5 * k);
  return symmetric_rule(sub, std::sqrt(std::numbers::pi));
}

QuadratureRule gauss_legendre(int order) {
  if (order < 1) throw InvalidDimension("gauss_legendre: order must be positive");
  Eigen::VectorXd sub(order - 1);
  for (int k = 1; k < order; ++k) sub(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  return symmetric_rule(sub, 2.0);
}

}  // namespace autonomy
