#pragma once

#include <vector>

namespace autonomy {

/// Nodes and weights of a one-dimensional Gauss rule.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Hermite rule for the weight e^{-x^2} on the real line
/// (Golub-Welsch). Weights sum to sqrt(pi).
QuadratureRule gauss_hermite(int order);

/// Gauss-Legendre rule on [-1, 1]. Weights sum to 2.
QuadratureRule gauss_legendre(int order);

}  // namespace autonomy
