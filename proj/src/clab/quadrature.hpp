#pragma once

#include <vector>

namespace clab {

// Gauss-Legendre rule mapped onto [a, b].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

QuadratureRule gauss_legendre(int n, double a, double b);

// Composite rule: `panels` equal sub-intervals with an n-point rule each.
QuadratureRule composite_gauss_legendre(int n, int panels, double a, double b);

template <typename Fn>
double integrate(const QuadratureRule& rule, Fn&& fn) {
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) acc += rule.weights[i] * fn(rule.nodes[i]);
  return acc;
}

}  // namespace clab
